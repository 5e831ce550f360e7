//! Certificates around the three-level solution, strong-slope (Hoffman)
//! bounds, and empirical error-rate classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::lower_solver::{frank_wolfe_minimize, FieldAt, FwConfig};
use crate::model::{BilevelProblem, Polytope, ScalarField, Structure};
use crate::oracle::{GapRow, OracleSolution};
use crate::report::{self, CERTIFICATE_SCHEMA, RATEFIT_SCHEMA};
use crate::sampling::{feasible_points, rng, vertex_pool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub h: f64,
    pub f: f64,
    /// `h ≤ α* + tol ∧ f ≤ β* + tol`.
    pub sublevel: bool,
    /// `h + f ≤ σ* + 2 tol`.
    pub sum: bool,
    /// `|h − α*| ≤ tol ∧ |f − β*| ≤ tol`.
    pub level: bool,
}

/// The set `C* = {x ∈ C : h(y*, x) ≤ α*, f(y*, x) ≤ β*}` with its sum
/// description `h + f ≤ σ*`, checked on samples of `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub problem: String,
    pub y_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub alpha_star: f64,
    pub beta_star: f64,
    /// `α* + β*`.
    pub sigma_star: f64,
    pub tol: f64,
    pub samples: usize,
    pub n_counterexamples: usize,
    /// The first few counterexamples found.
    pub counterexamples: Vec<Counterexample>,
    pub valid: bool,
}

const MAX_REPORTED_COUNTEREXAMPLES: usize = 20;

impl Certificate {
    /// `x ∈ C ∧ h(y*, x) + f(y*, x) ≤ σ* + tol`.
    pub fn membership(&self, p: &BilevelProblem, x: &[f64]) -> bool {
        x.len() == p.dim_x()
            && p.c.contains(x, 1e-9)
            && p.h.evaluate(&self.y_star, x) + p.f.evaluate(&self.y_star, x) <= self.sigma_star + self.tol
    }

    pub fn to_json(&self) -> Result<String> {
        report::to_json(CERTIFICATE_SCHEMA, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        report::from_json(CERTIFICATE_SCHEMA, text)
    }
}

/// Builds `α*, β*, σ*` from an oracle solution and tests, on `x*`, the
/// vertices of `C`, and random points of `C` (`n_samples` in total), that the
/// sublevel, sum and level descriptions of `C*` agree. Any disagreement is
/// recorded and marks the certificate invalid.
pub fn build_certificate(
    p: &BilevelProblem,
    o: &OracleSolution,
    tol: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Certificate> {
    if o.problem != p.name {
        return Err(Error::Precondition(format!("oracle is for '{}', problem is '{}'", o.problem, p.name)));
    }
    if o.y_star.len() != p.dim_y() || o.x_star.len() != p.dim_x() {
        return Err(Error::Dimension("oracle solution does not match the problem's dimensions".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Config(format!("tol must be nonnegative (got {tol})")));
    }
    let (alpha, beta) = (o.alpha_star, o.beta_star);
    let sigma = alpha + beta;
    let y = &o.y_star;

    let mut r = rng(seed);
    let mut points = vec![o.x_star.clone()];
    points.extend(vertex_pool(&p.c, &mut r));
    points.truncate(n_samples);
    let rest = n_samples - points.len();
    points.extend(feasible_points(&p.c, rest, &mut r));

    let mut counterexamples = Vec::new();
    let mut n_counterexamples = 0;
    for x in &points {
        let (h, f) = (p.h.evaluate(y, x), p.f.evaluate(y, x));
        let sublevel = h <= alpha + tol && f <= beta + tol;
        let sum = h + f <= sigma + 2.0 * tol;
        let level = (h - alpha).abs() <= tol && (f - beta).abs() <= tol;
        if !(sublevel == sum && sum == level) {
            n_counterexamples += 1;
            if counterexamples.len() < MAX_REPORTED_COUNTEREXAMPLES {
                counterexamples.push(Counterexample { x: x.clone(), h, f, sublevel, sum, level });
            }
        }
    }
    Ok(Certificate {
        problem: p.name.clone(),
        y_star: y.clone(),
        x_star: o.x_star.clone(),
        alpha_star: alpha,
        beta_star: beta,
        sigma_star: sigma,
        tol,
        samples: points.len(),
        n_counterexamples,
        counterexamples,
        valid: n_counterexamples == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeValidity {
    ExactLinear,
    Sampled,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub sigma_lower: f64,
    /// `1 / sigma_lower`, absent when the bound is zero.
    pub gamma: Option<f64>,
    pub validity: SlopeValidity,
}

impl SlopeEstimate {
    fn from_sigma(sigma_lower: f64, validity: SlopeValidity) -> Self {
        if sigma_lower > 0.0 {
            Self { sigma_lower, gamma: Some(1.0 / sigma_lower), validity }
        } else {
            Self { sigma_lower: 0.0, gamma: None, validity: SlopeValidity::Unavailable }
        }
    }
}

const MINIMIZER_EXCLUSION: f64 = 1e-6;
const RAY_STEPS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
/// A sampled infimum this small relative to the largest sampled gradient
/// is treated as zero.
const RELATIVE_ZERO: f64 = 1e-3;

/// Lower bound on the strong slope `inf ‖∇_x field(y, x)‖` away from the
/// minimizers of `field(y, ·)` on `C`.
///
/// Linear fields have a constant gradient, so the bound is exact. Otherwise
/// the infimum is sampled on random points of `C` and on rays shrinking
/// towards the Frank–Wolfe minimizer, skipping points within `1e-6` of it.
pub fn strong_slope_lower_bound(
    field: &ScalarField,
    y: &[f64],
    c: &Polytope,
    n_samples: usize,
    seed: u64,
) -> Result<SlopeEstimate> {
    if field.dim_y() != y.len() || field.dim_x() != c.n() {
        return Err(Error::Dimension("field, y and C have inconsistent dimensions".into()));
    }
    let mut r = rng(seed);
    if field.structure() == Structure::LinearInX {
        let x = vertex_pool(c, &mut r).swap_remove(0);
        return Ok(SlopeEstimate::from_sigma(norm(&field.gradient_x(y, &x)), SlopeValidity::ExactLinear));
    }
    let fw = FwConfig { tol: 1e-12, max_iter: 100_000, away_steps: true };
    let x_min = frank_wolfe_minimize(&FieldAt { field, y }, c, &fw, None)?.x;
    let samples = feasible_points(c, n_samples.max(1), &mut r);
    let mut points = samples.clone();
    for s in &samples {
        for t in RAY_STEPS {
            points.push(x_min.iter().zip(s).map(|(m, v)| m + t * (v - m)).collect());
        }
    }
    let (mut inf, mut sup) = (f64::INFINITY, 0.0f64);
    for x in points.iter().filter(|x| dist(x, &x_min) > MINIMIZER_EXCLUSION) {
        let g = norm(&field.gradient_x(y, x));
        inf = inf.min(g);
        sup = sup.max(g);
    }
    if !inf.is_finite() || inf <= RELATIVE_ZERO * sup {
        return Ok(SlopeEstimate::from_sigma(0.0, SlopeValidity::Unavailable));
    }
    Ok(SlopeEstimate::from_sigma(inf, SlopeValidity::Sampled))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    /// Slope `≥ 1 − τ`: consistent with the `o(ε)` rate.
    #[serde(rename = "consistent_H1")]
    ConsistentH1,
    /// Slope `≥ 0.5 − τ`: consistent with the `o(√ε)` rate.
    #[serde(rename = "consistent_H2")]
    ConsistentH2,
    Inconclusive,
    /// Every gap is below `1e-12`.
    ExactSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent `s` in `gap ≈ c εˢ`; absent for exact selection.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub classification: RateClass,
    pub tau: f64,
    pub n_points: usize,
    pub meets_h1_threshold: bool,
    pub meets_h2_threshold: bool,
}

impl RateFit {
    pub fn to_json(&self) -> Result<String> {
        report::to_json(RATEFIT_SCHEMA, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        report::from_json(RATEFIT_SCHEMA, text)
    }
}

pub const GAP_FLOOR: f64 = 1e-12;

/// Least-squares fit of `log gap` against `log ε` over the gaps above
/// [`GAP_FLOOR`], classified by slope thresholds `1 − τ` and `0.5 − τ`.
pub fn fit_rate(gaps: &[GapRow], tau: f64) -> Result<RateFit> {
    if gaps.iter().any(|g| !(g.epsilon > 0.0)) {
        return Err(Error::NonPositiveEpsilon(gaps.iter().map(|g| g.epsilon).fold(f64::INFINITY, f64::min)));
    }
    if !gaps.is_empty() && gaps.iter().all(|g| g.gap < GAP_FLOOR) {
        return Ok(RateFit {
            slope: None,
            intercept: None,
            r_squared: None,
            classification: RateClass::ExactSelection,
            tau,
            n_points: gaps.len(),
            meets_h1_threshold: true,
            meets_h2_threshold: true,
        });
    }
    let pts: Vec<(f64, f64)> = gaps.iter().filter(|g| g.gap > GAP_FLOOR).map(|g| (g.epsilon.ln(), g.gap.ln())).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 gaps above {GAP_FLOOR} (got {})", pts.len())));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (e, _)| (lo.min(*e), hi.max(*e)));
    if (hi - lo) / std::f64::consts::LN_10 < 2.0 - 1e-9 {
        return Err(Error::InsufficientData("epsilons must span at least two decades".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let meets_h1_threshold = slope >= 1.0 - tau;
    let meets_h2_threshold = slope >= 0.5 - tau;
    let classification = if meets_h1_threshold {
        RateClass::ConsistentH1
    } else if meets_h2_threshold {
        RateClass::ConsistentH2
    } else {
        RateClass::Inconclusive
    };
    Ok(RateFit {
        slope: Some(slope),
        intercept: Some(intercept),
        r_squared: Some(r_squared),
        classification,
        tau,
        n_points: pts.len(),
        meets_h1_threshold,
        meets_h2_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Hoffman-type bound available and an `o(ε)`-compatible rate.
    #[serde(rename = "H1")]
    H1,
    /// Rate compatible with quadratic growth only.
    #[serde(rename = "H2")]
    H2,
    ExactSelection,
    Inconclusive,
}

/// Combines the rate fit with the strong-slope bound: `H1` is diagnosed
/// only when the slope bound certifies a Hoffman constant, so a fast rate
/// without one counts as evidence for `H2`.
pub fn diagnose(fit: &RateFit, slope: &SlopeEstimate) -> Hypothesis {
    match fit.classification {
        RateClass::ExactSelection => Hypothesis::ExactSelection,
        RateClass::Inconclusive => Hypothesis::Inconclusive,
        _ if fit.meets_h1_threshold && slope.validity != SlopeValidity::Unavailable => Hypothesis::H1,
        _ => Hypothesis::H2,
    }
}
