//! Driving `ε ↓ 0` with warm starts, and checks on the resulting trace.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BilevelProblem;
use crate::report::{self, TRACE_SCHEMA};
use crate::selection::{SelectConfig, Sign};
use crate::upper_solver::{solve_penalized, UpperConfig};

/// `ε_k = eps0 · rho^k` for `k = 0, …, k_max − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub rho: f64,
    pub k_max: usize,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self { eps0: 0.1, rho: 0.5, k_max: 12 }
    }
}

impl EpsSchedule {
    pub fn new(eps0: f64, rho: f64, k_max: usize) -> Result<Self> {
        let s = Self { eps0, rho, k_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0) || !self.eps0.is_finite() {
            return Err(Error::NonPositiveEpsilon(self.eps0));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1) (got {})", self.rho)));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.k_max).map(|k| self.eps0 * self.rho.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epsilon: f64,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// `f(y_ε, x_ε)`.
    pub v: f64,
    pub h_value: f64,
    pub fw_gap: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub problem: String,
    pub sign: Sign,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

/// Solves the penalized problem for each `ε_k`, warm-starting `y` from the
/// previous row. `x` is always re-selected from scratch. Unconverged rows are
/// kept and flagged.
pub fn run_continuation(
    p: &BilevelProblem,
    schedule: &EpsSchedule,
    sign: Sign,
    cfg: &UpperConfig,
    select: &SelectConfig,
) -> Result<ContinuationTrace> {
    schedule.validate()?;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(schedule.k_max);
    for epsilon in schedule.epsilons() {
        let warm = rows.last().map(|r| r.y.clone());
        let s = solve_penalized(p, epsilon, sign, cfg, select, warm.as_deref())?;
        rows.push(TraceRow {
            epsilon,
            y: s.y,
            x: s.selection.x,
            v: s.value,
            h_value: s.selection.h_value,
            fw_gap: s.selection.fw_gap,
            evals: s.evals,
            converged: s.converged,
        });
    }
    Ok(ContinuationTrace { problem: p.name.clone(), sign, seed: cfg.seed, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub ok: bool,
    /// Rows `k` whose value moved the wrong way relative to row `k − 1`.
    pub violations: Vec<usize>,
}

fn check_decreasing_eps(t: &ContinuationTrace) -> Result<()> {
    if let Some(w) = t.rows.windows(2).position(|w| !(w[1].epsilon < w[0].epsilon)) {
        return Err(Error::Precondition(format!("epsilons are not strictly decreasing at row {}", w + 1)));
    }
    Ok(())
}

/// Pessimistic traces must be nondecreasing in `v` as `ε` shrinks,
/// optimistic traces nonincreasing, both up to `slack`.
pub fn check_monotone(t: &ContinuationTrace, slack: f64) -> Result<MonotoneReport> {
    if t.rows.is_empty() {
        return Err(Error::Precondition("trace is empty".into()));
    }
    check_decreasing_eps(t)?;
    let direction = t.sign.factor();
    let violations: Vec<usize> = t
        .rows
        .windows(2)
        .enumerate()
        .filter(|(_, w)| direction * (w[1].v - w[0].v) < -slack)
        .map(|(k, _)| k + 1)
        .collect();
    Ok(MonotoneReport { ok: violations.is_empty(), violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub y_limit: Vec<f64>,
    pub x_limit: Vec<f64>,
    pub v_limit: f64,
    /// Fitted `a` in `v ≈ v_limit − a ε`.
    pub slope: f64,
}

/// Extrapolates `v` to `ε = 0` by a least-squares line through the last
/// three rows; `y` and `x` are taken from the last row.
pub fn limit_estimate(t: &ContinuationTrace) -> Result<LimitEstimate> {
    if t.rows.len() < 3 {
        return Err(Error::Precondition(format!("need k ≥ 3 for limit estimate (trace has {} rows)", t.rows.len())));
    }
    check_decreasing_eps(t)?;
    let tail = &t.rows[t.rows.len() - 3..];
    let me = tail.iter().map(|r| r.epsilon).sum::<f64>() / 3.0;
    let mv = tail.iter().map(|r| r.v).sum::<f64>() / 3.0;
    let sxy: f64 = tail.iter().map(|r| (r.epsilon - me) * (r.v - mv)).sum();
    let sxx: f64 = tail.iter().map(|r| (r.epsilon - me).powi(2)).sum();
    let b = sxy / sxx;
    let last = &tail[2];
    Ok(LimitEstimate { y_limit: last.y.clone(), x_limit: last.x.clone(), v_limit: mv - b * me, slope: -b })
}

impl ContinuationTrace {
    pub fn to_json(&self) -> Result<String> {
        report::to_json(TRACE_SCHEMA, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        report::from_json(TRACE_SCHEMA, text)
    }

    /// `epsilon,y0..,x0..,v,h_value,fw_gap,evals`.
    pub fn csv_header(&self) -> Vec<String> {
        let (p, n) = self.rows.first().map_or((0, 0), |r| (r.y.len(), r.x.len()));
        let mut header = vec!["epsilon".to_string()];
        header.extend((0..p).map(|i| format!("y{i}")));
        header.extend((0..n).map(|j| format!("x{j}")));
        header.extend(["v", "h_value", "fw_gap", "evals"].map(String::from));
        header
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for r in &self.rows {
            let mut rec = vec![format!("{:?}", r.epsilon)];
            rec.extend(r.y.iter().chain(&r.x).map(|v| format!("{v:?}")));
            rec.extend([format!("{:?}", r.v), format!("{:?}", r.h_value), format!("{:?}", r.fw_gap), r.evals.to_string()]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
