use serde::{Deserialize, Serialize};

use super::{BilevelProblem, ScalarField};
use crate::error::{Error, Result};
use crate::sampling::{box_point, convex_combination, rng, vertex_pool};

const MIDPOINT_SLACK: f64 = 1e-9;
const GRADIENT_REL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub witness_y: Vec<f64>,
    pub witness_x: Vec<f64>,
    pub worst_value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problem: String,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative gradient error `‖∇ − fd‖∞ / max(1, ‖∇‖∞)` against central
/// differences.
pub(crate) fn gradient_error(field: &ScalarField, y: &[f64], x: &[f64]) -> f64 {
    let g = field.gradient_x(y, x);
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        let step = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let up = field.evaluate(y, &xp);
        xp[j] = x[j] - step;
        let down = field.evaluate(y, &xp);
        xp[j] = x[j];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((g[j] - fd).abs());
    }
    let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
    worst / scale
}

/// Samples `K × C` to check the standing assumptions on a problem:
/// positivity of `f`, convexity of `h` (and of `f` when it claims it) by
/// midpoint tests, analytic gradients against central differences, and
/// boundedness of `C`.
pub fn validate_problem(p: &BilevelProblem, samples: usize, seed: u64) -> Result<ValidationReport> {
    if samples < 100 {
        return Err(Error::Precondition(format!("validation needs at least 100 samples (got {samples})")));
    }
    let mut r = rng(seed);
    let pool = vertex_pool(&p.c, &mut r);
    let points: Vec<(Vec<f64>, Vec<f64>)> =
        (0..samples).map(|_| (box_point(&p.k, &mut r), convex_combination(&pool, &mut r))).collect();

    let mut checks = Vec::new();

    // positivity
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (i, (y, x)) in points.iter().enumerate() {
        let v = p.f.evaluate(y, x);
        if !(v >= worst) {
            worst = v;
            at = i;
        }
    }
    checks.push(CheckResult {
        name: "positivity".into(),
        passed: worst > 0.0,
        witness_y: points[at].0.clone(),
        witness_x: points[at].1.clone(),
        worst_value: worst,
        detail: "minimum of f over sampled K x C".into(),
    });

    // convexity in x by midpoint tests on sampled segments
    let mut fields: Vec<(&str, &ScalarField)> = vec![("h", &p.h)];
    if p.f.convex_in_x() {
        fields.push(("f", &p.f));
    }
    let (mut worst, mut witness, mut which) = (f64::NEG_INFINITY, (Vec::new(), Vec::new()), "h");
    for (y, x1) in &points {
        let x2 = convex_combination(&pool, &mut r);
        let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * (a + b)).collect();
        for (label, field) in &fields {
            let chord = 0.5 * (field.evaluate(y, x1) + field.evaluate(y, &x2));
            let excess = field.evaluate(y, &mid) - chord;
            let normalized = excess / (1.0 + chord.abs());
            if normalized > worst {
                worst = normalized;
                witness = (y.clone(), mid.clone());
                which = label;
            }
        }
    }
    checks.push(CheckResult {
        name: "convexity_in_x".into(),
        passed: worst <= MIDPOINT_SLACK,
        witness_y: witness.0,
        witness_x: witness.1,
        worst_value: worst,
        detail: format!("largest midpoint excess (relative), attained by {which}"),
    });

    // analytic gradients
    let (mut worst, mut at, mut which) = (0.0, 0, "f");
    for (i, (y, x)) in points.iter().enumerate() {
        for (label, field) in [("f", &p.f), ("h", &p.h)] {
            let e = gradient_error(field, y, x);
            if e > worst {
                worst = e;
                at = i;
                which = label;
            }
        }
    }
    checks.push(CheckResult {
        name: "gradient_consistency".into(),
        passed: worst <= GRADIENT_REL_TOL,
        witness_y: points[at].0.clone(),
        witness_x: points[at].1.clone(),
        worst_value: worst,
        detail: format!("largest relative error vs central differences, attained by {which}"),
    });

    // boundedness (established by LP at construction; reported here)
    let (at, bound) = p
        .c
        .upper_bounds()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let mut witness_x = vec![0.0; p.dim_x()];
    if !witness_x.is_empty() {
        witness_x[at] = bound;
    }
    checks.push(CheckResult {
        name: "boundedness".into(),
        passed: bound.is_finite(),
        witness_y: p.k.upper().to_vec(),
        witness_x,
        worst_value: bound,
        detail: "largest coordinate bound max x_i over C".into(),
    });

    Ok(ValidationReport { problem: p.name.clone(), samples, checks })
}
