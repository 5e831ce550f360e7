use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{shift_objective, ScalarField, Structure};
use super::polytope::Polytope;
use super::expr::CompiledExpr;
use crate::error::{Error, Result};

/// The leader set `K`, an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!("bounds have lengths {} and {}", lower.len(), upper.len())));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidBox(format!("coordinate {i} has a non-finite bound")));
            }
            if l > u {
                return Err(Error::InvalidBox(format!("coordinate {i}: lower {l} > upper {u}")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn clip(&self, y: &mut [f64]) {
        for (v, (l, u)) in y.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// Serialized problem definition with expression-string objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub name: String,
    pub dim_y: usize,
    pub dim_x: usize,
    #[serde(rename = "A", with = "matrix_rows")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "K_lower")]
    pub k_lower: Vec<f64>,
    #[serde(rename = "K_upper")]
    pub k_upper: Vec<f64>,
    pub f: String,
    pub h: String,
    /// Declared convexity in `x` for objectives that are not at most
    /// quadratic; quadratic ones are checked via their Hessian on `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_convex_in_x: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_convex_in_x: Option<bool>,
}

/// `A` is accepted either as nested rows or as a flat row-major array
/// (whose shape is then `len / dim_x` rows); it is always written nested.
mod matrix_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Layout {
        Nested(Vec<Vec<f64>>),
        Flat(Vec<f64>),
    }

    pub fn serialize<S: Serializer>(a: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        a.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(match Layout::deserialize(d)? {
            Layout::Nested(rows) => rows,
            // reshaped against dim_x in ProblemDoc::build
            Layout::Flat(values) => vec![values],
        })
    }
}

impl ProblemDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn reshaped_a(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dim_x;
        if self.a.len() == 1 && self.b.len() != 1 && n > 0 && self.a[0].len() == n * self.b.len() {
            return Ok(self.a[0].chunks(n).map(|c| c.to_vec()).collect());
        }
        Ok(self.a.clone())
    }

    pub fn build(&self) -> Result<BilevelProblem> {
        let k = BoxSet::new(self.k_lower.clone(), self.k_upper.clone())?;
        if k.dim() != self.dim_y {
            return Err(Error::Dimension(format!("K has dimension {}, dim_y = {}", k.dim(), self.dim_y)));
        }
        let c = Polytope::new(self.reshaped_a()?, self.b.clone(), self.dim_x)?;
        let f = expr_field(&self.f, self.dim_y, self.dim_x, self.f_convex_in_x, &k)?;
        let h = expr_field(&self.h, self.dim_y, self.dim_x, self.h_convex_in_x, &k)?;
        let mut p = BilevelProblem::new(&self.name, f, h, k, c)?;
        p.doc = Some(self.clone());
        Ok(p)
    }
}

/// Smallest Hessian eigenvalue over a deterministic sample of `K`.
fn min_hessian_eigenvalue(compiled: &CompiledExpr, k: &BoxSet) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut ys = vec![k.lower().to_vec(), k.upper().to_vec(), k.center()];
    for _ in 0..32 {
        ys.push(k.lower().iter().zip(k.upper()).map(|(l, u)| l + (u - l) * rng.gen::<f64>()).collect());
    }
    let n = compiled.gradient.len();
    ys.iter()
        .map(|y| {
            let hess = compiled.hessian_at(y);
            let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (hess[i][j] + hess[j][i]));
            SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn expr_field(src: &str, dim_y: usize, dim_x: usize, declared: Option<bool>, k: &BoxSet) -> Result<ScalarField> {
    let field = ScalarField::from_expr(src, dim_y, dim_x)?;
    let convex = match (field.structure(), declared) {
        (Structure::LinearInX, _) => true,
        (Structure::QuadraticInX, _) => {
            let compiled = CompiledExpr::new(src, dim_y, dim_x)?;
            min_hessian_eigenvalue(&compiled, k) >= -1e-12
        }
        (Structure::General, d) => d.unwrap_or(false),
    };
    Ok(field.with_convexity(convex))
}

/// `max_{y ∈ K} f(y, x)` with `x ∈ argmin_{z ∈ C} h(y, z)`.
#[derive(Debug, Clone)]
pub struct BilevelProblem {
    pub name: String,
    pub f: ScalarField,
    pub h: ScalarField,
    pub k: BoxSet,
    pub c: Polytope,
    doc: Option<ProblemDoc>,
}

impl BilevelProblem {
    pub fn new(name: &str, f: ScalarField, h: ScalarField, k: BoxSet, c: Polytope) -> Result<Self> {
        let p = k.dim();
        let n = c.n();
        for (label, field) in [("f", &f), ("h", &h)] {
            if field.dim_y() != p || field.dim_x() != n {
                return Err(Error::Dimension(format!(
                    "{label} has shape ({}, {}), expected (dim K = {p}, n = {n})",
                    field.dim_y(),
                    field.dim_x()
                )));
            }
        }
        if !h.convex_in_x() {
            return Err(Error::InvalidProblem("the follower objective h must be convex in x".into()));
        }
        Ok(Self { name: name.to_string(), f, h, k, c, doc: None })
    }

    pub fn dim_y(&self) -> usize {
        self.k.dim()
    }

    pub fn dim_x(&self) -> usize {
        self.c.n()
    }

    /// The expression document this problem was built from, if any.
    pub fn doc(&self) -> Option<&ProblemDoc> {
        self.doc.as_ref()
    }

    pub fn to_json(&self) -> Result<String> {
        match &self.doc {
            Some(d) => d.to_json(),
            None => Err(Error::InvalidProblem(format!(
                "problem '{}' was built from closures and has no expression form",
                self.name
            ))),
        }
    }

    pub fn with_f(&self, f: ScalarField) -> Result<Self> {
        BilevelProblem::new(&self.name, f, self.h.clone(), self.k.clone(), self.c.clone())
    }

    pub fn with_h(&self, h: ScalarField) -> Result<Self> {
        BilevelProblem::new(&self.name, self.f.clone(), h, self.k.clone(), self.c.clone())
    }

    /// Replaces `f` by `(max{f − f(y0, x0), 0})²` after checking the anchor
    /// lies in `K × C`.
    pub fn shift_objective(&self, y0: &[f64], x0: &[f64]) -> Result<Self> {
        if !self.k.contains(y0) || !self.c.contains(x0, 1e-9) {
            return Err(Error::Precondition("shift anchor must lie in K x C".into()));
        }
        let mut shifted = self.with_f(shift_objective(&self.f, y0, x0)?)?;
        shifted.name = format!("{}-shifted", self.name);
        Ok(shifted)
    }
}
