//! Brute-force ground truth: the lower-level solution set `S(y)`, its
//! pessimistic selection `S̃(y) = argmin {f²(y, z) : z ∈ S(y)}`, and the
//! three-level problem `max_y f(y, S̃(y))`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::ContinuationTrace;
use crate::error::{Error, Result};
use crate::lower_solver::{enumerate_vertices, frank_wolfe_minimize, independent_rows, FieldAt, FwConfig, Objective};
use crate::model::{BilevelProblem, Polytope, ScalarField, Structure};
use crate::report::{self, ORACLE_SCHEMA};
use crate::upper_solver::{pattern_search_maximize, UpperConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub y_step: f64,
    /// Grid spacing on the intrinsic (free) coordinates of `C`.
    pub x_step: f64,
    /// Relative tolerance for membership in `S(y)`: `h ≤ min + tol·(1 + |min|)`.
    pub tol: f64,
    /// Guard on the number of grid points per lower-level set.
    pub max_grid_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { y_step: 1e-3, x_step: 1e-3, tol: 1e-8, max_grid_points: 10_000_000 }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if !(self.y_step > 0.0 && self.x_step > 0.0 && self.tol >= 0.0) {
            return Err(Error::Config("grid steps must be positive and tol nonnegative".into()));
        }
        Ok(())
    }
}

/// Largest intrinsic dimension of `C` the grid fallback accepts.
pub const MAX_GRID_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerSetKind {
    SinglePoint,
    VertexFace,
    GridCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    FaceEnum,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerSetDescription {
    pub kind: LowerSetKind,
    pub method: OracleMethod,
    /// Optimal vertices (face), grid points (cloud), or the minimizer.
    pub points: Vec<Vec<f64>>,
    /// The minimal value of `h(y, ·)`.
    pub value: f64,
    /// Grid spacing used, if any.
    pub resolution: Option<f64>,
}

/// `x = x_B0 − M x_N` on the basic coordinates, with the free ones gridded.
struct IntrinsicGrid {
    free: Vec<usize>,
    basic: Vec<usize>,
    x_basic0: Vec<f64>,
    m: DMatrix<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl IntrinsicGrid {
    fn new(c: &Polytope, step: f64, max_points: usize) -> Result<Self> {
        let rows = independent_rows(c.a());
        let n = c.n();
        let col = |j: usize| -> Vec<f64> { rows.iter().map(|&r| c.a()[r][j]).collect() };
        let mut basic: Vec<usize> = Vec::new();
        for j in (0..n).rev() {
            if basic.len() == rows.len() {
                break;
            }
            let mut cols: Vec<f64> = basic.iter().flat_map(|&k| col(k)).collect();
            cols.extend(col(j));
            if DMatrix::from_column_slice(rows.len(), basic.len() + 1, &cols).rank(1e-9) == basic.len() + 1 {
                basic.push(j);
            }
        }
        basic.sort_unstable();
        let free: Vec<usize> = (0..n).filter(|j| !basic.contains(j)).collect();
        if free.len() > MAX_GRID_DIM {
            return Err(Error::GridGuard(format!(
                "C has intrinsic dimension {} > {MAX_GRID_DIM}; the grid oracle cannot describe S(y)",
                free.len()
            )));
        }
        let r = rows.len();
        let ab = DMatrix::from_fn(r, r, |i, k| c.a()[rows[i]][basic[k]]);
        let an = DMatrix::from_fn(r, free.len(), |i, k| c.a()[rows[i]][free[k]]);
        let b = DMatrix::from_fn(r, 1, |i, _| c.b()[rows[i]]);
        let inv = ab.try_inverse().ok_or_else(|| Error::GridGuard("singular basis for C".into()))?;
        let x_basic0 = (&inv * b).column(0).iter().copied().collect();
        let m = &inv * an;
        let upper: Vec<f64> = free.iter().map(|&j| c.upper_bounds()[j]).collect();
        let counts: Vec<usize> = upper.iter().map(|u| if *u > 0.0 { (u / step).ceil() as usize } else { 0 }).collect();
        let total = counts.iter().try_fold(1usize, |acc, k| acc.checked_mul(k + 1));
        match total {
            Some(t) if t <= max_points => {}
            _ => {
                return Err(Error::GridGuard(format!(
                    "grid over {} free coordinates at step {step} exceeds {max_points} points",
                    free.len()
                )))
            }
        }
        Ok(Self { free, basic, x_basic0, m, upper, counts })
    }

    /// Calls `visit` on every feasible grid point of `C`.
    fn for_each(&self, n: usize, mut visit: impl FnMut(&[f64])) {
        let d = self.free.len();
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; n];
        let slack = 1e-12 * (1.0 + self.x_basic0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        loop {
            for k in 0..d {
                x[self.free[k]] =
                    if self.counts[k] == 0 { 0.0 } else { self.upper[k] * idx[k] as f64 / self.counts[k] as f64 };
            }
            let mut feasible = true;
            for (i, &bj) in self.basic.iter().enumerate() {
                let v = self.x_basic0[i] - (0..d).map(|k| self.m[(i, k)] * x[self.free[k]]).sum::<f64>();
                if v < -slack {
                    feasible = false;
                    break;
                }
                x[bj] = v.max(0.0);
            }
            if feasible {
                visit(&x);
            }
            // odometer
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                if idx[k] < self.counts[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

fn face_tol(cfg: &OracleConfig, min: f64) -> f64 {
    cfg.tol * (1.0 + min.abs())
}

fn face_lower_set(h: &ScalarField, y: &[f64], vertices: &[Vec<f64>], cfg: &OracleConfig) -> LowerSetDescription {
    let values: Vec<f64> = vertices.iter().map(|v| h.evaluate(y, v)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = min + face_tol(cfg, min);
    let points: Vec<Vec<f64>> =
        vertices.iter().zip(&values).filter(|(_, &v)| v <= cut).map(|(x, _)| x.clone()).collect();
    let kind = if points.len() == 1 { LowerSetKind::SinglePoint } else { LowerSetKind::VertexFace };
    LowerSetDescription { kind, method: OracleMethod::FaceEnum, points, value: min, resolution: None }
}

fn grid_lower_set(p: &BilevelProblem, y: &[f64], cfg: &OracleConfig) -> Result<LowerSetDescription> {
    let n = p.dim_x();
    let grid = IntrinsicGrid::new(&p.c, cfg.x_step, cfg.max_grid_points)?;
    let mut min = f64::INFINITY;
    let mut cloud: Vec<(Vec<f64>, f64)> = Vec::new();
    grid.for_each(n, |x| {
        let v = p.h.evaluate(y, x);
        if v < min {
            min = v;
            let cut = min + face_tol(cfg, min);
            cloud.retain(|(_, w)| *w <= cut);
        }
        if v <= min + face_tol(cfg, min) {
            cloud.push((x.to_vec(), v));
        }
    });
    if cloud.is_empty() {
        return Err(Error::GridGuard("the grid missed C entirely; decrease x_step".into()));
    }
    // a cloud no wider than the mesh is a single minimizer seen at grid resolution
    let spread = (0..n)
        .map(|j| {
            let (lo, hi) = cloud.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(x[j]), hi.max(x[j])));
            hi - lo
        })
        .fold(0.0, f64::max);
    if spread <= 2.0 * cfg.x_step {
        let fw = FwConfig { tol: 1e-12, max_iter: 100_000, away_steps: true };
        let sol = frank_wolfe_minimize(&FieldAt { field: &p.h, y }, &p.c, &fw, Some(&cloud[0].0))?;
        let (x, value) = if sol.value <= min { (sol.x, sol.value) } else { (cloud[0].0.clone(), min) };
        return Ok(LowerSetDescription {
            kind: LowerSetKind::SinglePoint,
            method: OracleMethod::Grid,
            points: vec![x],
            value,
            resolution: Some(cfg.x_step),
        });
    }
    Ok(LowerSetDescription {
        kind: LowerSetKind::GridCloud,
        method: OracleMethod::Grid,
        points: cloud.into_iter().map(|(x, _)| x).collect(),
        value: min,
        resolution: Some(cfg.x_step),
    })
}

/// Describes `S(y) = argmin {h(y, z) : z ∈ C}`: by the optimal face's
/// vertices when `h(y, ·)` is linear, otherwise by a grid on the intrinsic
/// coordinates of `C` (at most [`MAX_GRID_DIM`] of them).
pub fn exact_lower_set(p: &BilevelProblem, y: &[f64], cfg: &OracleConfig) -> Result<LowerSetDescription> {
    cfg.validate()?;
    if y.len() != p.dim_y() {
        return Err(Error::Dimension(format!("y has length {}, K has dimension {}", y.len(), p.dim_y())));
    }
    if p.h.structure() == Structure::LinearInX {
        if let Ok(vertices) = enumerate_vertices(&p.c) {
            return Ok(face_lower_set(&p.h, y, vertices, cfg));
        }
    }
    grid_lower_set(p, y, cfg)
}

/// `λ ↦ f(y, Vλ)²` on the unit simplex.
struct FaceSquare<'a> {
    f: &'a ScalarField,
    y: &'a [f64],
    vertices: &'a [Vec<f64>],
}

impl FaceSquare<'_> {
    fn lift(&self, lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.vertices[0].len()];
        for (l, v) in lambda.iter().zip(self.vertices) {
            if *l != 0.0 {
                x.iter_mut().zip(v).for_each(|(xj, vj)| *xj += l * vj);
            }
        }
        x
    }
}

impl Objective for FaceSquare<'_> {
    fn value(&self, lambda: &[f64]) -> f64 {
        let v = self.f.evaluate(self.y, &self.lift(lambda));
        v * v
    }

    fn gradient(&self, lambda: &[f64], out: &mut [f64]) {
        let x = self.lift(lambda);
        let v = self.f.evaluate(self.y, &x);
        let g = self.f.gradient_x(self.y, &x);
        for (o, vert) in out.iter_mut().zip(self.vertices) {
            *o = 2.0 * v * vert.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn is_quadratic(&self) -> bool {
        self.f.structure() == Structure::LinearInX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PessimisticSelection {
    pub x: Vec<f64>,
    /// `f(y, x)`.
    pub value: f64,
}

/// Minimizes `f²(y, ·)` over a description of `S(y)`.
pub fn select_from_lower_set(p: &BilevelProblem, y: &[f64], lower: &LowerSetDescription) -> Result<PessimisticSelection> {
    let x = match lower.kind {
        LowerSetKind::SinglePoint => lower.points[0].clone(),
        LowerSetKind::GridCloud => {
            let sq = |x: &[f64]| p.f.evaluate(y, x).powi(2);
            let mut best = 0;
            let mut best_v = sq(&lower.points[0]);
            for (i, x) in lower.points.iter().enumerate().skip(1) {
                let v = sq(x);
                if v < best_v {
                    best = i;
                    best_v = v;
                }
            }
            lower.points[best].clone()
        }
        LowerSetKind::VertexFace => {
            let k = lower.points.len();
            let simplex = Polytope::new(vec![vec![1.0; k]], vec![1.0], k)?;
            let obj = FaceSquare { f: &p.f, y, vertices: &lower.points };
            let fw = FwConfig { tol: 1e-12, max_iter: 100_000, away_steps: true };
            // f² need not be convex on the face: start from every vertex
            let mut best: Option<(Vec<f64>, f64)> = None;
            for i in 0..k {
                let mut e = vec![0.0; k];
                e[i] = 1.0;
                let sol = frank_wolfe_minimize(&obj, &simplex, &fw, Some(&e))?;
                if best.as_ref().is_none_or(|(_, v)| sol.value < *v) {
                    best = Some((sol.x, sol.value));
                }
            }
            obj.lift(&best.expect("face has at least one vertex").0)
        }
    };
    Ok(PessimisticSelection { value: p.f.evaluate(y, &x), x })
}

/// The pessimistic response `S̃(y)` and the leader value `f(y, S̃(y))`.
pub fn pessimistic_select(p: &BilevelProblem, y: &[f64], cfg: &OracleConfig) -> Result<PessimisticSelection> {
    let lower = exact_lower_set(p, y, cfg)?;
    select_from_lower_set(p, y, &lower)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub problem: String,
    pub y_star: Vec<f64>,
    pub x_star: Vec<f64>,
    /// `f(y*, x*)`.
    pub beta_star: f64,
    /// `h(y*, x*)`.
    pub alpha_star: f64,
    pub method: OracleMethod,
    pub lower_kind: LowerSetKind,
    /// Leader grid spacing.
    pub resolution: f64,
    /// Follower grid spacing, when a grid was used.
    pub x_resolution: Option<f64>,
    /// Number of leader points evaluated (grid plus polish).
    pub evaluations: usize,
}

impl OracleSolution {
    pub fn to_json(&self) -> Result<String> {
        report::to_json(ORACLE_SCHEMA, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        report::from_json(ORACLE_SCHEMA, text)
    }
}

fn leader_grid(p: &BilevelProblem, step: f64, max_points: usize) -> Result<Vec<Vec<f64>>> {
    let k = &p.k;
    let counts: Vec<usize> = k.widths().iter().map(|w| if *w > 0.0 { (w / step).ceil() as usize } else { 0 }).collect();
    let total = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(c + 1));
    if !matches!(total, Some(t) if t <= max_points) {
        return Err(Error::GridGuard(format!("leader grid at step {step} exceeds {max_points} points")));
    }
    let mut points = vec![Vec::new()];
    for (d, &c) in counts.iter().enumerate() {
        let (lo, w) = (k.lower()[d], k.upper()[d] - k.lower()[d]);
        points = points
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                (0..=c).map(move |i| {
                    let mut y = prefix.clone();
                    y.push(if c == 0 { lo } else { lo + w * i as f64 / c as f64 });
                    y
                })
            })
            .collect();
    }
    Ok(points)
}

/// Solves `max_{y ∈ K} f(y, S̃(y))` by a full leader grid followed by a
/// pattern-search polish from the best grid point. When `h` does not depend
/// on `y` the lower-level set is computed once and shared.
pub fn solve_three_level(p: &BilevelProblem, cfg: &OracleConfig) -> Result<OracleSolution> {
    cfg.validate()?;
    if p.dim_y() > 2 {
        return Err(Error::Precondition(format!("the oracle grids at most 2 leader dimensions (got {})", p.dim_y())));
    }
    let shared = if p.h.depends_on_y() { None } else { Some(exact_lower_set(p, &p.k.center(), cfg)?) };
    let select = |y: &[f64]| -> Result<(PessimisticSelection, LowerSetDescription)> {
        let lower = match &shared {
            Some(l) => l.clone(),
            None => exact_lower_set(p, y, cfg)?,
        };
        Ok((select_from_lower_set(p, y, &lower)?, lower))
    };
    let value = |y: &[f64]| -> Result<f64> {
        match &shared {
            Some(l) => Ok(select_from_lower_set(p, y, l)?.value),
            None => Ok(pessimistic_select(p, y, cfg)?.value),
        }
    };

    let ys = leader_grid(p, cfg.y_step, cfg.max_grid_points)?;
    let values: Vec<f64> = ys.par_iter().map(|y| value(y)).collect::<Result<_>>()?;
    let best = values.iter().enumerate().fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    let mut y_star = ys[best].clone();
    let mut evaluations = ys.len();

    let max_width = p.k.widths().iter().copied().fold(0.0, f64::max);
    if max_width > 0.0 {
        let initial_step = (cfg.y_step / max_width).min(0.5);
        let polish = UpperConfig {
            n_multistarts: 1,
            initial_step,
            shrink: 0.5,
            min_step: (1e-3 * cfg.y_step).min(0.5 * initial_step),
            max_evals: 2_000,
            seed: 0,
        };
        let r = pattern_search_maximize(value, &p.k, &polish, &y_star)?;
        evaluations += r.evals;
        if r.value > values[best] {
            y_star = r.y;
        }
    }

    let (sel, lower) = select(&y_star)?;
    Ok(OracleSolution {
        problem: p.name.clone(),
        beta_star: p.f.evaluate(&y_star, &sel.x),
        alpha_star: p.h.evaluate(&y_star, &sel.x),
        y_star,
        x_star: sel.x,
        method: lower.method,
        lower_kind: lower.kind,
        resolution: cfg.y_step,
        x_resolution: lower.resolution,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub epsilon: f64,
    /// `β* − v_ε`.
    pub gap: f64,
}

/// Pairs each trace row with its distance below the oracle value.
pub fn gap_table(o: &OracleSolution, t: &ContinuationTrace) -> Result<Vec<GapRow>> {
    if o.problem != t.problem {
        return Err(Error::Precondition(format!(
            "oracle is for problem '{}' but the trace is for '{}'",
            o.problem, t.problem
        )));
    }
    Ok(t.rows.iter().map(|r| GapRow { epsilon: r.epsilon, gap: o.beta_star - r.v }).collect())
}

/// `epsilon,gap` CSV.
pub fn write_gap_csv<W: std::io::Write>(rows: &[GapRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "gap"])?;
    for r in rows {
        w.write_record([format!("{:?}", r.epsilon), format!("{:?}", r.gap)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::TraceRow;
    use crate::model::{registry_get, BoxSet};
    use crate::selection::Sign;

    fn cfg() -> OracleConfig {
        OracleConfig::default()
    }

    #[test]
    fn fs_lower_set_is_whole_segment() {
        let fs = registry_get("FS").unwrap();
        for y in [0.0, 0.5, 1.0] {
            let l = exact_lower_set(&fs, &[y], &cfg()).unwrap();
            assert_eq!(l.kind, LowerSetKind::VertexFace);
            assert_eq!(l.value, 0.0);
            let mut pts = l.points.clone();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(pts, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        }
    }

    #[test]
    fn qb_lower_set_is_band() {
        let qb = registry_get("QB").unwrap();
        let l = exact_lower_set(&qb, &[0.5], &cfg()).unwrap();
        assert_eq!(l.kind, LowerSetKind::GridCloud);
        assert!(l.value <= 1e-6);
        assert_eq!(l.points.len(), 1001);
        for x in &l.points {
            assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
            assert!(qb.c.contains(x, 1e-12));
        }
    }

    #[test]
    fn strictly_convex_h_gives_single_point() {
        let fs = registry_get("FS").unwrap();
        let h = ScalarField::from_expr("(x[0] - 0.3)^2 + (x[1] - 0.7)^2", 1, 2).unwrap().with_convexity(true);
        let p = fs.with_h(h).unwrap();
        let l = exact_lower_set(&p, &[0.5], &cfg()).unwrap();
        assert_eq!(l.kind, LowerSetKind::SinglePoint);
        assert!((l.points[0][0] - 0.3).abs() < 1e-6);
        // a linear h with a unique optimal vertex is also a single point
        let p = fs.with_h(ScalarField::linear(1, vec![1.0, 0.0])).unwrap();
        let l = exact_lower_set(&p, &[0.5], &cfg()).unwrap();
        assert_eq!((l.kind, l.points.clone()), (LowerSetKind::SinglePoint, vec![vec![0.0, 1.0]]));
    }

    #[test]
    fn grid_guard_on_high_intrinsic_dimension() {
        let c = Polytope::new(vec![vec![1.0; 7]], vec![1.0], 7).unwrap();
        let h = ScalarField::from_expr("(x[0] - 0.5)^2", 1, 7).unwrap().with_convexity(true);
        let f = ScalarField::constant(1, 7, 1.0);
        let p = BilevelProblem::new("big", f, h, BoxSet::new(vec![0.0], vec![1.0]).unwrap(), c).unwrap();
        assert!(matches!(exact_lower_set(&p, &[0.5], &cfg()), Err(Error::GridGuard(_))));
    }

    #[test]
    fn pessimistic_selection_examples() {
        let fs = registry_get("FS").unwrap();
        let s = pessimistic_select(&fs, &[0.5], &cfg()).unwrap();
        assert_eq!(s.x, vec![0.0, 1.0]);
        assert_eq!(s.value, 2.0);
        let qb = registry_get("QB").unwrap();
        let s = pessimistic_select(&qb, &[0.5], &cfg()).unwrap();
        assert!((s.value - 4.0).abs() < 1e-12);
        let flat = fs.with_f(ScalarField::from_expr("3 + y[0]", 1, 2).unwrap()).unwrap();
        let s = pessimistic_select(&flat, &[0.25], &cfg()).unwrap();
        assert_eq!(s.value, 3.25);
        assert!(fs.c.contains(&s.x, 1e-12));
    }

    #[test]
    fn three_level_fs() {
        let fs = registry_get("FS").unwrap();
        let o = solve_three_level(&fs, &cfg()).unwrap();
        assert_eq!(o.y_star, vec![0.5]);
        assert_eq!(o.beta_star, 2.0);
        assert_eq!(o.alpha_star, 0.0);
        assert_eq!(o.x_star, vec![0.0, 1.0]);
        assert_eq!(o.method, OracleMethod::FaceEnum);
    }

    #[test]
    fn three_level_qb() {
        let qb = registry_get("QB").unwrap();
        let o = solve_three_level(&qb, &cfg()).unwrap();
        assert!((o.y_star[0] - 0.5).abs() < 1e-3);
        assert!((o.beta_star - 4.0).abs() < 1e-9);
        assert!(o.alpha_star.abs() < 1e-12);
        assert_eq!(o.method, OracleMethod::Grid);
        assert_eq!(o.beta_star, qb.f.evaluate(&o.y_star, &o.x_star));
    }

    #[test]
    fn collapsed_leader_box() {
        let qb = registry_get("QB").unwrap();
        let p = BilevelProblem::new("pt", qb.f.clone(), qb.h.clone(), BoxSet::new(vec![0.2], vec![0.2]).unwrap(), qb.c.clone())
            .unwrap();
        let o = solve_three_level(&p, &cfg()).unwrap();
        assert_eq!(o.y_star, vec![0.2]);
        assert_eq!(o.beta_star, pessimistic_select(&p, &[0.2], &cfg()).unwrap().value);
    }

    #[test]
    fn gap_table_closed_form() {
        let qb = registry_get("QB").unwrap();
        let o = solve_three_level(&qb, &cfg()).unwrap();
        let rows = [0.1, 0.01]
            .iter()
            .map(|&e| TraceRow {
                epsilon: e,
                y: vec![0.5],
                x: vec![0.0; 4],
                v: 4.0 / (1.0 + 4.0 * e),
                h_value: 0.0,
                fw_gap: 0.0,
                evals: 0,
                converged: true,
            })
            .collect();
        let t = ContinuationTrace { problem: "QB".into(), sign: Sign::Pessimistic, seed: 0, rows };
        let g = gap_table(&o, &t).unwrap();
        assert!((g[0].gap - 1.142857142857).abs() < 1e-9);
        assert!((g[1].gap - 0.153846153846).abs() < 1e-9);
        let other = ContinuationTrace { problem: "FS".into(), ..t };
        assert!(gap_table(&o, &other).is_err());
        let mut buf = Vec::new();
        write_gap_csv(&g, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("epsilon,gap\n0.1,"));
    }

    #[test]
    fn oracle_json_round_trip() {
        let fs = registry_get("FS").unwrap();
        let o = solve_three_level(&fs, &OracleConfig { y_step: 1e-2, ..cfg() }).unwrap();
        let text = o.to_json().unwrap();
        assert!(text.contains("\"schema\": \"oracle-v1\""));
        assert_eq!(OracleSolution::from_json(&text).unwrap(), o);
    }
}
