//! The penalized selection map `S_ε(y) = argmin_{x ∈ C} h(y, x) ± ε f(y, x)²`
//! and the single-valued upper objective it induces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lower_solver::{frank_wolfe_minimize, FieldAt, FwConfig};
use crate::model::{BilevelProblem, Polytope, ScalarField};
use crate::sampling::{convex_combination, rng, vertex_pool};

/// `+ε f²` selects the leader's worst follower response, `−ε f²` its best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Pessimistic,
    Optimistic,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Pessimistic => 1.0,
            Sign::Optimistic => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Pessimistic => "pessimistic",
            Sign::Optimistic => "optimistic",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" | "+1" | "1" | "+" => Ok(Sign::Pessimistic),
            "optimistic" | "-1" | "-" => Ok(Sign::Optimistic),
            other => Err(Error::Config(format!("unknown sign '{other}' (use pessimistic or optimistic)"))),
        }
    }
}

/// `h + sign·ε·f²`.
pub fn penalized_field(p: &BilevelProblem, epsilon: f64, sign: Sign) -> Result<ScalarField> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    p.h.plus_weighted_square(&p.f, sign.factor() * epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub tol: f64,
    /// Defaults to `min(#vertices, 16)`.
    pub n_starts: Option<usize>,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { tol: 1e-8, n_starts: None, max_iter: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub sign: Sign,
    pub x: Vec<f64>,
    /// `f(y, x)`, the constant `κ_y` on the selection set.
    pub f_value: f64,
    pub h_value: f64,
    pub penalized_value: f64,
    pub fw_gap: f64,
    pub n_starts: usize,
    /// The best start reached `fw_gap ≤ tol`.
    pub reliable: bool,
}

/// Distinct vertices first, then random points of `C`; deterministic in `seed`.
pub(crate) fn start_points(c: &Polytope, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let pool = vertex_pool(c, &mut r);
    let mut starts: Vec<Vec<f64>> = pool.iter().take(count).cloned().collect();
    while starts.len() < count {
        starts.push(convex_combination(&pool, &mut r));
    }
    starts
}

fn vertex_count(c: &Polytope) -> usize {
    vertex_pool(c, &mut rng(0)).len()
}

struct StartOutcome {
    x: Vec<f64>,
    penalized: f64,
    fw_gap: f64,
    converged: bool,
}

fn solve_from_starts(
    field: &ScalarField,
    p: &BilevelProblem,
    y: &[f64],
    starts: &[Vec<f64>],
    cfg: &SelectConfig,
) -> Result<Vec<StartOutcome>> {
    let fw = FwConfig { tol: cfg.tol, max_iter: cfg.max_iter, away_steps: true };
    let obj = FieldAt { field, y };
    starts
        .iter()
        .map(|s| {
            let sol = frank_wolfe_minimize(&obj, &p.c, &fw, Some(s))?;
            Ok(StartOutcome { x: sol.x, penalized: sol.value, fw_gap: sol.fw_gap, converged: sol.converged })
        })
        .collect()
}

fn check_inputs(p: &BilevelProblem, y: &[f64], epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    if !p.k.contains(y) {
        return Err(Error::Precondition(format!("y = {y:?} is not in K")));
    }
    Ok(())
}

/// One element of `S_ε(y)` by multistart Frank–Wolfe; the start with the
/// lowest penalized value wins, ties going to the earlier start.
pub fn select_response(
    p: &BilevelProblem,
    y: &[f64],
    epsilon: f64,
    sign: Sign,
    cfg: &SelectConfig,
) -> Result<SelectionResult> {
    check_inputs(p, y, epsilon)?;
    let vertices = vertex_count(&p.c);
    let n_starts = cfg.n_starts.unwrap_or_else(|| vertices.min(16)).max(1);
    if sign == Sign::Optimistic && n_starts < vertices.min(8) {
        return Err(Error::Precondition(format!(
            "the optimistic penalty is nonconvex: need n_starts >= {} (got {n_starts})",
            vertices.min(8)
        )));
    }
    let field = penalized_field(p, epsilon, sign)?;
    let starts = start_points(&p.c, n_starts, cfg.seed);
    let outcomes = solve_from_starts(&field, p, y, &starts, cfg)?;
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (i, o)| if o.penalized < outcomes[best].penalized { i } else { best });
    let o = &outcomes[best];
    Ok(SelectionResult {
        y: y.to_vec(),
        epsilon,
        sign,
        x: o.x.clone(),
        f_value: p.f.evaluate(y, &o.x),
        h_value: p.h.evaluate(y, &o.x),
        penalized_value: o.penalized,
        fw_gap: o.fw_gap,
        n_starts,
        reliable: o.converged,
    })
}

/// `v_ε(y)`: the leader objective at the selected response.
pub fn upper_value(p: &BilevelProblem, y: &[f64], epsilon: f64, sign: Sign, cfg: &SelectConfig) -> Result<f64> {
    Ok(select_response(p, y, epsilon, sign, cfg)?.f_value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyWitness {
    pub x: Vec<f64>,
    pub f_value: f64,
    pub penalized_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    /// `f` at the best start.
    pub kappa: f64,
    /// `max f − min f` over starts within `tol` of the best penalized value.
    pub spread: f64,
    pub witnesses: Vec<ConstancyWitness>,
    /// Number of witnesses counted in `spread`.
    pub near_optimal: usize,
}

/// Solves the (pessimistic) penalized lower level from many starts and
/// measures how much `f` varies across the near-optimal ones.
pub fn constancy_check(
    p: &BilevelProblem,
    y: &[f64],
    epsilon: f64,
    n_starts: usize,
    cfg: &SelectConfig,
) -> Result<ConstancyReport> {
    check_inputs(p, y, epsilon)?;
    if n_starts < 8 {
        return Err(Error::Precondition(format!("constancy check needs at least 8 starts (got {n_starts})")));
    }
    let field = penalized_field(p, epsilon, Sign::Pessimistic)?;
    let starts = start_points(&p.c, n_starts, cfg.seed);
    let outcomes = solve_from_starts(&field, p, y, &starts, cfg)?;
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (i, o)| if o.penalized < outcomes[best].penalized { i } else { best });
    let best_value = outcomes[best].penalized;
    let witnesses: Vec<ConstancyWitness> = outcomes
        .iter()
        .map(|o| ConstancyWitness { x: o.x.clone(), f_value: p.f.evaluate(y, &o.x), penalized_value: o.penalized })
        .collect();
    let window = cfg.tol * (1.0 + best_value.abs());
    let near: Vec<f64> =
        witnesses.iter().filter(|w| w.penalized_value <= best_value + window).map(|w| w.f_value).collect();
    let max = near.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = near.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConstancyReport { kappa: witnesses[best].f_value, spread: max - min, near_optimal: near.len(), witnesses })
}
