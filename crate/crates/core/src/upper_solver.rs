//! Derivative-free maximization of the leader objective `v_ε` over `K`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BilevelProblem, BoxSet};
use crate::sampling::scrambled_halton;
use crate::selection::{select_response, SelectConfig, SelectionResult, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperConfig {
    pub n_multistarts: usize,
    /// Initial poll step as a fraction of each coordinate's width.
    pub initial_step: f64,
    pub shrink: f64,
    /// Absolute step below which the search stops.
    pub min_step: f64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for UpperConfig {
    fn default() -> Self {
        Self { n_multistarts: 8, initial_step: 0.25, shrink: 0.5, min_step: 1e-6, max_evals: 20_000, seed: 0 }
    }
}

impl UpperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink must lie in (0, 1) (got {})", self.shrink)));
        }
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(Error::Config(format!(
                "need 0 < min_step < initial_step (got {} and {})",
                self.min_step, self.initial_step
            )));
        }
        if self.n_multistarts == 0 || self.max_evals == 0 {
            return Err(Error::Config("n_multistarts and max_evals must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResult {
    pub y: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out before the mesh was refined
    /// down to `min_step`.
    pub converged: bool,
}

/// Compass search: poll `±step_d e_d` (clipped to `K`), move to the first
/// strict improvement, otherwise shrink every step. Stops once all steps are
/// below `min_step` or the budget is spent.
pub fn pattern_search_maximize<F>(value_fn: F, k: &BoxSet, cfg: &UpperConfig, start: &[f64]) -> Result<PatternResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    if start.len() != k.dim() {
        return Err(Error::Dimension(format!("start has length {}, K has dimension {}", start.len(), k.dim())));
    }
    let mut y = start.to_vec();
    k.clip(&mut y);
    let mut best = value_fn(&y)?;
    let mut evals = 1;
    let mut steps: Vec<f64> = k.widths().iter().map(|w| cfg.initial_step * w).collect();
    let mut trial = y.clone();

    loop {
        if steps.iter().all(|&s| s < cfg.min_step) {
            return Ok(PatternResult { y, value: best, evals, converged: true });
        }
        let mut improved = false;
        'poll: for d in 0..y.len() {
            if steps[d] < cfg.min_step {
                continue;
            }
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&y);
                trial[d] = (y[d] + dir * steps[d]).clamp(k.lower()[d], k.upper()[d]);
                if trial[d] == y[d] {
                    continue;
                }
                if evals >= cfg.max_evals {
                    return Ok(PatternResult { y, value: best, evals, converged: false });
                }
                let v = value_fn(&trial)?;
                evals += 1;
                if v > best {
                    best = v;
                    y.copy_from_slice(&trial);
                    improved = true;
                    break 'poll;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= cfg.shrink);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedSolution {
    pub y: Vec<f64>,
    pub selection: SelectionResult,
    /// `v_ε(y) = f(y, x_ε)`.
    pub value: f64,
    /// Total leader-objective evaluations over all starts.
    pub evals: usize,
    pub converged: bool,
}

/// Solves `max_{y ∈ K} v_ε(y)` by multistart pattern search. Starts are the
/// optional warm start followed by `n_multistarts` scrambled Halton points;
/// the best start wins, ties going to the earliest.
pub fn solve_penalized(
    p: &BilevelProblem,
    epsilon: f64,
    sign: Sign,
    cfg: &UpperConfig,
    select: &SelectConfig,
    warm_start: Option<&[f64]>,
) -> Result<PenalizedSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    cfg.validate()?;
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm_start {
        if w.len() != p.dim_y() {
            return Err(Error::Dimension(format!("warm start has length {}, K has dimension {}", w.len(), p.dim_y())));
        }
        let mut w = w.to_vec();
        p.k.clip(&mut w);
        starts.push(w);
    }
    starts.extend(scrambled_halton(&p.k, cfg.n_multistarts, cfg.seed));

    // one selection up front surfaces precondition errors before the fan-out
    select_response(p, &starts[0], epsilon, sign, select)?;

    let value_fn = |y: &[f64]| -> Result<f64> { Ok(select_response(p, y, epsilon, sign, select)?.f_value) };
    let runs: Vec<PatternResult> =
        starts.par_iter().map(|s| pattern_search_maximize(value_fn, &p.k, cfg, s)).collect::<Result<_>>()?;
    let evals = runs.iter().map(|r| r.evals).sum();
    let best = runs.iter().enumerate().fold(0, |b, (i, r)| if r.value > runs[b].value { i } else { b });
    let run = &runs[best];
    let selection = select_response(p, &run.y, epsilon, sign, select)?;
    Ok(PenalizedSolution {
        y: run.y.clone(),
        value: selection.f_value,
        converged: run.converged && selection.reliable,
        selection,
        evals,
    })
}
