use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::CompiledExpr;
use crate::error::{Error, Result};

/// Declared shape of a field as a function of `x` at fixed `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    LinearInX,
    QuadraticInX,
    General,
}

impl Structure {
    pub fn from_degree(degree: Option<u32>) -> Self {
        match degree {
            Some(0) | Some(1) => Structure::LinearInX,
            Some(2) => Structure::QuadraticInX,
            _ => Structure::General,
        }
    }

    pub fn is_at_most_quadratic(self) -> bool {
        self <= Structure::QuadraticInX
    }
}

type EvalFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A smooth function `(y, x) ↦ ℝ` with an analytic `x`-gradient.
///
/// Fields are cheap to clone and immutable; composition builds new closures
/// over shared parents.
#[derive(Clone)]
pub struct ScalarField {
    dim_y: usize,
    dim_x: usize,
    structure: Structure,
    convex_in_x: bool,
    depends_on_y: bool,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
    source: Option<String>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim_y", &self.dim_y)
            .field("dim_x", &self.dim_x)
            .field("structure", &self.structure)
            .field("convex_in_x", &self.convex_in_x)
            .field("depends_on_y", &self.depends_on_y)
            .field("source", &self.source)
            .finish()
    }
}

impl ScalarField {
    pub fn new<E, G>(dim_y: usize, dim_x: usize, structure: Structure, convex_in_x: bool, eval: E, grad: G) -> Self
    where
        E: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim_y,
            dim_x,
            structure,
            convex_in_x,
            depends_on_y: true,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            source: None,
        }
    }

    /// Builds a field from an expression string. Structure is inferred from
    /// the polynomial degree in `x`; convexity defaults to true only for
    /// fields that are linear in `x` and may be overridden with
    /// [`ScalarField::with_convexity`].
    pub fn from_expr(source: &str, dim_y: usize, dim_x: usize) -> Result<Self> {
        let compiled = Arc::new(CompiledExpr::new(source, dim_y, dim_x)?);
        let structure = Structure::from_degree(compiled.degree);
        let ce = Arc::clone(&compiled);
        let cg = Arc::clone(&compiled);
        let mut field = Self::new(
            dim_y,
            dim_x,
            structure,
            structure == Structure::LinearInX,
            move |y, x| ce.expr.eval(y, x),
            move |y, x, out| {
                for (o, g) in out.iter_mut().zip(&cg.gradient) {
                    *o = g.eval(y, x);
                }
            },
        );
        field.source = Some(source.to_string());
        field.depends_on_y = compiled.expr.arity().0 > 0;
        Ok(field)
    }

    /// Constant field `c`.
    pub fn constant(dim_y: usize, dim_x: usize, c: f64) -> Self {
        Self::new(dim_y, dim_x, Structure::LinearInX, true, move |_, _| c, |_, _, out| out.fill(0.0)).y_independent()
    }

    /// `x ↦ ⟨c, x⟩`, independent of `y`.
    pub fn linear(dim_y: usize, c: Vec<f64>) -> Self {
        let n = c.len();
        let cg = c.clone();
        Self::new(
            dim_y,
            n,
            Structure::LinearInX,
            true,
            move |_, x| c.iter().zip(x).map(|(a, b)| a * b).sum(),
            move |_, _, out| out.copy_from_slice(&cg),
        )
        .y_independent()
    }

    pub fn with_convexity(mut self, convex_in_x: bool) -> Self {
        self.convex_in_x = convex_in_x;
        self
    }

    fn y_independent(mut self) -> Self {
        self.depends_on_y = false;
        self
    }

    fn inherit_y_dependence(mut self, parents: &[&ScalarField]) -> Self {
        self.depends_on_y = parents.iter().any(|p| p.depends_on_y);
        self
    }

    /// False only when the field is known not to vary with `y`; fields built
    /// from closures are conservatively assumed to depend on it.
    pub fn depends_on_y(&self) -> bool {
        self.depends_on_y
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn convex_in_x(&self) -> bool {
        self.convex_in_x
    }

    /// Expression source, when the field came from the expression grammar.
    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn evaluate(&self, y: &[f64], x: &[f64]) -> f64 {
        (self.eval)(y, x)
    }

    pub fn gradient_x_into(&self, y: &[f64], x: &[f64], out: &mut [f64]) {
        (self.grad)(y, x, out)
    }

    pub fn gradient_x(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim_x];
        self.gradient_x_into(y, x, &mut g);
        g
    }

    fn check_same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.dim_y != other.dim_y || self.dim_x != other.dim_x {
            return Err(Error::Dimension(format!(
                "fields have shapes ({}, {}) and ({}, {})",
                self.dim_y, self.dim_x, other.dim_y, other.dim_x
            )));
        }
        Ok(())
    }

    /// `self + weight · other²`.
    ///
    /// Convexity is asserted only for a nonnegative weight when `other` is
    /// linear in `x`, or convex with positive values (the standing
    /// positivity assumption of a [`super::BilevelProblem`]).
    pub fn plus_weighted_square(&self, other: &ScalarField, weight: f64) -> Result<ScalarField> {
        self.check_same_shape(other)?;
        let structure = match (self.structure, other.structure) {
            (s, Structure::LinearInX) if s.is_at_most_quadratic() => Structure::QuadraticInX,
            _ => Structure::General,
        };
        let square_convex = other.structure == Structure::LinearInX || other.convex_in_x;
        let convex = self.convex_in_x && weight >= 0.0 && square_convex;
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        let n = self.dim_x;
        Ok(ScalarField::new(
            self.dim_y,
            n,
            structure,
            convex,
            move |y, x| {
                let v = b.evaluate(y, x);
                a.evaluate(y, x) + weight * v * v
            },
            move |y, x, out| {
                ga.gradient_x_into(y, x, out);
                let v = gb.evaluate(y, x);
                let mut tmp = vec![0.0; n];
                gb.gradient_x_into(y, x, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += 2.0 * weight * v * t;
                }
            },
        )
        .inherit_y_dependence(&[self, other]))
    }

    /// `self + other`.
    pub fn sum(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_shape(other)?;
        let structure = self.structure.max(other.structure);
        let convex = self.convex_in_x && other.convex_in_x;
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        let n = self.dim_x;
        Ok(ScalarField::new(
            self.dim_y,
            n,
            structure,
            convex,
            move |y, x| a.evaluate(y, x) + b.evaluate(y, x),
            move |y, x, out| {
                ga.gradient_x_into(y, x, out);
                let mut tmp = vec![0.0; n];
                gb.gradient_x_into(y, x, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += t;
                }
            },
        )
        .inherit_y_dependence(&[self, other]))
    }

    /// `s · self + offset`.
    pub fn affine(&self, s: f64, offset: f64) -> ScalarField {
        let (a, ga) = (self.clone(), self.clone());
        let convex = if s >= 0.0 { self.convex_in_x } else { self.structure == Structure::LinearInX };
        ScalarField::new(
            self.dim_y,
            self.dim_x,
            self.structure,
            convex,
            move |y, x| s * a.evaluate(y, x) + offset,
            move |y, x, out| {
                ga.gradient_x_into(y, x, out);
                out.iter_mut().for_each(|o| *o *= s);
            },
        )
        .inherit_y_dependence(&[self])
    }
}

/// `(max{f − f(y0, x0), 0})²`: nonnegative, zero at the anchor, and
/// maximized wherever `f` is.
pub fn shift_objective(f: &ScalarField, y0: &[f64], x0: &[f64]) -> Result<ScalarField> {
    if y0.len() != f.dim_y() || x0.len() != f.dim_x() {
        return Err(Error::Dimension(format!(
            "anchor has shape ({}, {}), field expects ({}, {})",
            y0.len(),
            x0.len(),
            f.dim_y(),
            f.dim_x()
        )));
    }
    let anchor = f.evaluate(y0, x0);
    let (a, ga) = (f.clone(), f.clone());
    Ok(ScalarField::new(
        f.dim_y(),
        f.dim_x(),
        Structure::General,
        // t ↦ max(t, 0)² is convex and nondecreasing
        f.convex_in_x(),
        move |y, x| {
            let t = (a.evaluate(y, x) - anchor).max(0.0);
            t * t
        },
        move |y, x, out| {
            let t = (ga.evaluate(y, x) - anchor).max(0.0);
            ga.gradient_x_into(y, x, out);
            out.iter_mut().for_each(|o| *o *= 2.0 * t);
        },
    )
    .inherit_y_dependence(&[f]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs_f() -> ScalarField {
        ScalarField::from_expr("1 + 4*y[0]*(1 - y[0]) + x[0]", 1, 2).unwrap()
    }

    #[test]
    fn shift_of_constant_is_zero() {
        let f = ScalarField::constant(1, 2, 5.0);
        let s = shift_objective(&f, &[0.3], &[0.5, 0.5]).unwrap();
        for (y, x) in [([0.0], [1.0, 0.0]), ([0.9], [0.2, 0.8])] {
            assert_eq!(s.evaluate(&y, &x), 0.0);
        }
        assert_eq!(s.structure(), Structure::General);
    }

    #[test]
    fn shift_fs_example() {
        let f = fs_f();
        assert_eq!(f.evaluate(&[0.0], &[1.0, 0.0]), 2.0);
        let s = shift_objective(&f, &[0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(s.evaluate(&[0.5], &[1.0, 0.0]), 1.0);
        // below the anchor value the shift clamps to zero
        assert_eq!(f.evaluate(&[0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(s.evaluate(&[0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(s.gradient_x(&[0.5], &[1.0, 0.0]), vec![2.0, 0.0]);
    }

    #[test]
    fn shift_dimension_mismatch() {
        assert!(shift_objective(&fs_f(), &[0.0, 1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn weighted_square_structure() {
        let h = ScalarField::from_expr("(x[0] + x[1] - 1)^2", 1, 2).unwrap().with_convexity(true);
        let f = ScalarField::from_expr("(1 + y[0])*(1 + x[0] + x[1])", 1, 2).unwrap();
        let pos = h.plus_weighted_square(&f, 0.1).unwrap();
        assert_eq!(pos.structure(), Structure::QuadraticInX);
        assert!(pos.convex_in_x());
        let negw = h.plus_weighted_square(&f, -0.1).unwrap();
        assert!(!negw.convex_in_x());
        let g = pos.gradient_x(&[1.0], &[0.5, 0.25]);
        // ∇h = 2(σ-1)(1,1), ∇(εf²) = 2ε f (1+y)(1,1)
        let expected = 2.0 * (0.75 - 1.0) + 2.0 * 0.1 * (2.0 * 1.75) * 2.0;
        assert!((g[0] - expected).abs() < 1e-12 && (g[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn y_dependence_tracking() {
        let h = ScalarField::from_expr("(x[0] + x[1] - 1)^2", 1, 2).unwrap();
        assert!(!h.depends_on_y());
        assert!(fs_f().depends_on_y());
        assert!(!ScalarField::constant(1, 2, 1.0).depends_on_y());
        assert!(!h.sum(&ScalarField::linear(1, vec![1.0, 0.0])).unwrap().depends_on_y());
        assert!(h.plus_weighted_square(&fs_f(), 0.1).unwrap().depends_on_y());
        assert!(ScalarField::new(1, 2, Structure::General, false, |_, _| 0.0, |_, _, _| {}).depends_on_y());
    }
}
