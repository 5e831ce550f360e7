//! Dense two-phase tableau simplex for `min ⟨c, x⟩ s.t. Ax = b, x ≥ 0`.
//!
//! Entering and leaving variables follow Bland's rule, so degenerate
//! problems cannot cycle.

use serde::{Deserialize, Serialize};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Basic column indices, ascending.
    pub basis: Vec<usize>,
    pub status: LpStatus,
}

impl LpSolution {
    fn failed(n: usize, status: LpStatus) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self { x: vec![f64::NAN; n], value, basis: Vec::new(), status }
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows + 1) x (cols + 1); last row is the objective, last column the rhs
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        self.t[pr * w + pc] = 1.0;
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.t[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                self.t[r * w + c] -= factor * self.t[pr * w + c];
            }
            self.t[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Sets the objective row to reduced costs of `cost` (length `cols`)
    /// under the current basis.
    fn load_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows * w;
        self.t[obj..obj + self.cols].copy_from_slice(&cost[..self.cols]);
        self.t[obj + self.cols] = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for c in 0..w {
                self.t[obj + c] -= cb * self.t[r * w + c];
            }
        }
    }

    /// Runs Bland-rule iterations over columns `allowed`. Returns false on
    /// unboundedness.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&c| self.at(self.rows, c) < -COST_TOL);
            let Some(pc) = entering else { return true };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let cand = (ratio, self.basis[r], r);
                    best = match best {
                        None => Some(cand),
                        Some(b) if ratio < b.0 - 1e-12 || (ratio <= b.0 + 1e-12 && cand.1 < b.1) => Some(cand),
                        keep => keep,
                    };
                }
            }
            let Some((_, _, pr)) = best else { return false };
            self.pivot(pr, pc);
        }
    }
}

/// Minimizes `⟨c, x⟩` over `{x : Ax = b, x ≥ 0}`. `a` is row-major `m × n`.
pub fn solve_standard_form(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpSolution {
    let m = a.len();
    let n = c.len();
    if m == 0 {
        // only x >= 0: bounded below iff c >= 0
        if c.iter().any(|&v| v < -COST_TOL) {
            return LpSolution::failed(n, LpStatus::Unbounded);
        }
        return LpSolution { x: vec![0.0; n], value: 0.0, basis: Vec::new(), status: LpStatus::Optimal };
    }
    let cols = n + m;
    let w = cols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    for r in 0..m {
        let sgn = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r * w + j] = sgn * a[r][j];
        }
        t[r * w + n + r] = 1.0;
        t[r * w + cols] = sgn * b[r];
    }
    let mut tab = Tableau { rows: m, cols, t, basis: (n..n + m).collect() };

    // phase 1: minimize the sum of artificials
    let mut phase1 = vec![0.0; cols];
    phase1[n..].fill(1.0);
    tab.load_objective(&phase1);
    tab.optimize(cols);
    let infeasibility = -tab.at(m, cols);
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > PHASE1_TOL * scale {
        return LpSolution::failed(n, LpStatus::Infeasible);
    }

    // drive remaining artificials out; rows where that is impossible are redundant
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.at(r, j).abs() > 1e-9) {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
    }
    if !redundant.is_empty() {
        let keep: Vec<usize> = (0..m).filter(|r| !redundant.contains(r)).collect();
        let mut t2 = Vec::with_capacity((keep.len() + 1) * w);
        let mut basis = Vec::with_capacity(keep.len());
        for &r in &keep {
            t2.extend_from_slice(&tab.t[r * w..(r + 1) * w]);
            basis.push(tab.basis[r]);
        }
        t2.extend(std::iter::repeat_n(0.0, w));
        tab = Tableau { rows: keep.len(), cols, t: t2, basis };
    }

    // phase 2 over the original columns only
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(c);
    tab.load_objective(&cost);
    if !tab.optimize(n) {
        return LpSolution::failed(n, LpStatus::Unbounded);
    }

    let mut x = vec![0.0; n];
    for r in 0..tab.rows {
        let j = tab.basis[r];
        if j < n {
            let v = tab.rhs(r);
            x[j] = if v < 0.0 && v > -1e-12 { 0.0 } else { v };
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    let mut basis: Vec<usize> = tab.basis.iter().copied().filter(|&j| j < n).collect();
    basis.sort_unstable();
    LpSolution { x, value, basis, status: LpStatus::Optimal }
}
