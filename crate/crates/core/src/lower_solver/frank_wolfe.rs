use serde::{Deserialize, Serialize};

use super::lp_minimize;
use super::simplex::LpStatus;
use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs_diff};
use crate::model::{Polytope, ScalarField};

/// A differentiable objective over `ℝⁿ`.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// At most quadratic, so a three-point fit along a segment is exact.
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// A [`ScalarField`] with `y` held fixed.
pub struct FieldAt<'a> {
    pub field: &'a ScalarField,
    pub y: &'a [f64],
}

impl Objective for FieldAt<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.field.evaluate(self.y, x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.field.gradient_x_into(self.y, x, out)
    }

    fn is_quadratic(&self) -> bool {
        self.field.structure().is_at_most_quadratic()
    }
}

/// `½ xᵀQx + ⟨c, x⟩ + constant`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub constant: f64,
}

impl Objective for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let quad: f64 = self.q.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
        0.5 * quad + dot(&self.c, x) + self.constant
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, ci)) in out.iter_mut().zip(self.q.iter().zip(&self.c)) {
            *o = dot(row, x) + ci;
        }
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Allow away steps from active atoms. Plain Frank–Wolfe when false.
    pub away_steps: bool,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000, away_steps: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// `max_v ⟨∇g(x), x − v⟩` over vertices of `C` at the returned point.
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn line_search(obj: &dyn Objective, x: &[f64], fx: f64, slope: f64, d: &[f64], tmax: f64) -> f64 {
    let point = |t: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + t * di).collect() };
    if obj.is_quadratic() {
        // The directional derivative is affine in t, so the exact minimizer
        // follows from its values at both ends. Differencing derivatives
        // rather than function values avoids cancellation on short segments.
        let mut g_end = vec![0.0; x.len()];
        obj.gradient(&point(tmax), &mut g_end);
        let slope_end = dot(&g_end, d);
        if slope_end <= 0.0 {
            tmax
        } else {
            (tmax * slope / (slope - slope_end)).clamp(0.0, tmax)
        }
    } else {
        let mut t = tmax;
        while t > 1e-16 * tmax {
            if obj.value(&point(t)) <= fx + 1e-4 * t * slope {
                return t;
            }
            t *= 0.5;
        }
        0.0
    }
}

fn vertex_for(c: &[f64], set: &Polytope) -> Result<Vec<f64>> {
    let lp = lp_minimize(c, set);
    match lp.status {
        LpStatus::Optimal => Ok(lp.x),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Minimizes `obj` over `set` with (away-step) Frank–Wolfe.
///
/// The linear minimization oracle is the simplex solver. Steps are exact on
/// quadratic objectives and Armijo backtracking otherwise. For convex
/// objectives `value − min ≤ fw_gap`. An infeasible warm start is replaced
/// by the vertex most aligned with it.
pub fn frank_wolfe_minimize(
    obj: &dyn Objective,
    set: &Polytope,
    cfg: &FwConfig,
    start: Option<&[f64]>,
) -> Result<FwSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("Frank-Wolfe tolerance must be positive (got {})", cfg.tol)));
    }
    let n = set.n();
    let mut x = match start {
        Some(s) if s.len() != n => {
            return Err(Error::Dimension(format!("start has length {}, C has n = {n}", s.len())))
        }
        Some(s) if set.contains(s, 1e-9) => s.to_vec(),
        Some(s) => vertex_for(&s.iter().map(|v| -v).collect::<Vec<_>>(), set)?,
        None => vertex_for(&vec![0.0; n], set)?,
    };
    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(x.clone(), 1.0)];
    let mut fx = obj.value(&x);
    let mut g = vec![0.0; n];
    let mut gap;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        obj.gradient(&x, &mut g);
        let v = vertex_for(&g, set)?;
        gap = (dot(&g, &x) - dot(&g, &v)).max(0.0);
        if gap <= cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut away: Option<(usize, f64)> = None;
        if cfg.away_steps && atoms.len() > 1 {
            let (ai, _) = atoms
                .iter()
                .enumerate()
                .map(|(i, (a, _))| (i, dot(&g, a)))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            let away_gap = dot(&g, &atoms[ai].0) - dot(&g, &x);
            if away_gap > gap {
                let w = atoms[ai].1;
                away = Some((ai, w / (1.0 - w)));
            }
        }

        let (d, tmax): (Vec<f64>, f64) = match away {
            Some((ai, tmax)) => (x.iter().zip(&atoms[ai].0).map(|(xi, ai)| xi - ai).collect(), tmax),
            None => (v.iter().zip(&x).map(|(vi, xi)| vi - xi).collect(), 1.0),
        };
        let slope = dot(&g, &d);
        let t = line_search(obj, &x, fx, slope, &d, tmax);
        if t <= 0.0 {
            break;
        }
        let candidate: Vec<f64> = if away.is_none() && t == tmax {
            v.clone()
        } else {
            x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect()
        };
        let f_new = obj.value(&candidate);
        // a genuine descent step may still round to a last-bit increase
        if f_new > fx + 4.0 * f64::EPSILON * fx.abs().max(1.0) {
            break;
        }
        x = candidate;
        fx = f_new;

        match away {
            None if t == 1.0 => atoms = vec![(v, 1.0)],
            None => {
                atoms.iter_mut().for_each(|(_, w)| *w *= 1.0 - t);
                match atoms.iter_mut().find(|(a, _)| max_abs_diff(a, &v) <= 1e-14) {
                    Some((_, w)) => *w += t,
                    None => atoms.push((v, t)),
                }
            }
            Some((ai, tmax)) => {
                atoms.iter_mut().for_each(|(_, w)| *w *= 1.0 + t);
                atoms[ai].1 -= t;
                if t >= tmax || atoms[ai].1 <= 1e-15 {
                    atoms.remove(ai);
                }
            }
        }
    }

    Ok(FwSolution { x, value: fx, fw_gap: gap, iterations, converged })
}
