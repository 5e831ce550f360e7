//! A tiny arithmetic grammar over `y[i]` and `x[j]` with symbolic
//! differentiation in `x`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'y' '[' int ']' | 'x' '[' int ']' | '(' expr ')'
//! ```
//!
//! Exponents may depend on `y` but not on `x`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Y(usize),
    X(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, e: Expr) -> Expr {
    match constant(&e) {
        Some(0.0) => Expr::Const(1.0),
        Some(1.0) => a,
        _ => Expr::Pow(Box::new(a), Box::new(e)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { chars: src.chars().collect(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, y: &[f64], x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Y(i) => y[*i],
            Expr::X(j) => x[*j],
            Expr::Neg(a) => -a.eval(y, x),
            Expr::Add(a, b) => a.eval(y, x) + b.eval(y, x),
            Expr::Sub(a, b) => a.eval(y, x) - b.eval(y, x),
            Expr::Mul(a, b) => a.eval(y, x) * b.eval(y, x),
            Expr::Div(a, b) => a.eval(y, x) / b.eval(y, x),
            Expr::Pow(a, e) => {
                let base = a.eval(y, x);
                match **e {
                    Expr::Const(k) if k.fract() == 0.0 && k.abs() <= 64.0 => base.powi(k as i32),
                    _ => base.powf(e.eval(y, x)),
                }
            }
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Y(_) => false,
            Expr::X(_) => true,
            Expr::Neg(a) => a.depends_on_x(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on_x() || b.depends_on_x()
            }
        }
    }

    /// Largest `y` and `x` indices referenced, as counts (index + 1).
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Expr::Const(_) => (0, 0),
            Expr::Y(i) => (i + 1, 0),
            Expr::X(j) => (0, j + 1),
            Expr::Neg(a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                let (ya, xa) = a.arity();
                let (yb, xb) = b.arity();
                (ya.max(yb), xa.max(xb))
            }
        }
    }

    /// Polynomial degree in `x`, or `None` when the expression is not a
    /// polynomial in `x` (division by an `x`-dependent term, fractional or
    /// negative powers of `x`-dependent bases).
    pub fn degree_in_x(&self) -> Option<u32> {
        match self {
            Expr::Const(_) | Expr::Y(_) => Some(0),
            Expr::X(_) => Some(1),
            Expr::Neg(a) => a.degree_in_x(),
            Expr::Add(a, b) | Expr::Sub(a, b) => Some(a.degree_in_x()?.max(b.degree_in_x()?)),
            Expr::Mul(a, b) => Some(a.degree_in_x()? + b.degree_in_x()?),
            Expr::Div(a, b) => {
                if b.depends_on_x() {
                    None
                } else {
                    a.degree_in_x()
                }
            }
            Expr::Pow(a, e) => {
                let d = a.degree_in_x()?;
                if d == 0 {
                    return Some(0);
                }
                match **e {
                    Expr::Const(k) if k >= 0.0 && k.fract() == 0.0 && k <= 64.0 => Some(d * k as u32),
                    _ => None,
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to `x[j]`.
    pub fn diff_x(&self, j: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Y(_) => Expr::Const(0.0),
            Expr::X(k) => Expr::Const(if *k == j { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff_x(j)),
            Expr::Add(a, b) => add(a.diff_x(j), b.diff_x(j)),
            Expr::Sub(a, b) => sub(a.diff_x(j), b.diff_x(j)),
            Expr::Mul(a, b) => add(
                mul(a.diff_x(j), (**b).clone()),
                mul((**a).clone(), b.diff_x(j)),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.diff_x(j), (**b).clone()),
                    mul((**a).clone(), b.diff_x(j)),
                );
                div(num, pow((**b).clone(), Expr::Const(2.0)))
            }
            Expr::Pow(a, e) => {
                // exponent is x-free, enforced at construction
                let da = a.diff_x(j);
                if constant(&da) == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let lowered = match constant(e) {
                    Some(k) => pow((**a).clone(), Expr::Const(k - 1.0)),
                    None => pow((**a).clone(), sub((**e).clone(), Expr::Const(1.0))),
                };
                mul(mul((**e).clone(), lowered), da)
            }
        }
    }

    fn check_exponents(&self) -> std::result::Result<(), String> {
        match self {
            Expr::Const(_) | Expr::Y(_) | Expr::X(_) => Ok(()),
            Expr::Neg(a) => a.check_exponents(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.check_exponents()?;
                b.check_exponents()
            }
            Expr::Pow(a, e) => {
                if e.depends_on_x() {
                    return Err("exponents must not depend on x".into());
                }
                a.check_exponents()?;
                e.check_exponents()
            }
        }
    }
}

/// A parsed expression together with its symbolic `x`-gradient.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    pub source: String,
    pub expr: Expr,
    pub gradient: Vec<Expr>,
    pub degree: Option<u32>,
}

impl CompiledExpr {
    pub fn new(source: &str, dim_y: usize, dim_x: usize) -> Result<Self> {
        let expr = Expr::parse(source)?;
        expr.check_exponents().map_err(|msg| Error::Expr { pos: 0, msg })?;
        let (ny, nx) = expr.arity();
        if ny > dim_y || nx > dim_x {
            return Err(Error::Dimension(format!(
                "expression '{source}' references y[{}]/x[{}] beyond dim_y={dim_y}, dim_x={dim_x}",
                ny.saturating_sub(1),
                nx.saturating_sub(1)
            )));
        }
        let gradient = (0..dim_x).map(|j| expr.diff_x(j)).collect();
        let degree = expr.degree_in_x();
        Ok(Self { source: source.to_string(), expr, gradient, degree })
    }

    /// Constant Hessian in `x` at the given `y`; only meaningful when the
    /// expression is at most quadratic in `x`.
    pub fn hessian_at(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = self.gradient.len();
        let origin = vec![0.0; n];
        self.gradient
            .iter()
            .map(|g| (0..n).map(|k| g.diff_x(k).eval(y, &origin)).collect())
            .collect()
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> Error {
        Error::Expr { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn is_minus(c: char) -> bool {
        c == '-' || c == '\u{2212}'
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(c) if Self::is_minus(c) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some('/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(c) if Self::is_minus(c) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn index(&mut self) -> Result<usize> {
        if !self.eat('[') {
            return Err(self.err("expected '['"));
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected index"));
        }
        let idx: String = self.chars[start..self.pos].iter().collect();
        if !self.eat(']') {
            return Err(self.err("expected ']'"));
        }
        idx.parse().map_err(|_| self.err("bad index"))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some('y') => {
                self.pos += 1;
                Ok(Expr::Y(self.index()?))
            }
            Some('x') => {
                self.pos += 1;
                Ok(Expr::X(self.index()?))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.chars.len() && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos], 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos], '+' | '-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Expr { pos: start, msg: format!("bad number '{text}'") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, y: &[f64], x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(y, x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(ev("-2^2", &[], &[]), -4.0);
        assert_eq!(ev("2^3^2", &[], &[]), 512.0);
        assert_eq!(ev("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(ev("10 − 4 - 1", &[], &[]), 5.0);
        assert_eq!(ev("2^-1", &[], &[]), 0.5);
        assert_eq!(ev("1.5e2 + 1e-1", &[], &[]), 150.1);
    }

    #[test]
    fn variables() {
        let v = ev("1 + 4*y[0]*(1 - y[0]) + x[0]", &[0.5], &[1.0, 0.0]);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("x[").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("z").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn degrees() {
        let d = |s: &str| Expr::parse(s).unwrap().degree_in_x();
        assert_eq!(d("y[0]^2 + 3"), Some(0));
        assert_eq!(d("(1 + 4*y[0])*(1 + x[0] + x[1])"), Some(1));
        assert_eq!(d("(x[0] + x[1] - 1)^2"), Some(2));
        assert_eq!(d("x[0]*x[1]*x[0]"), Some(3));
        assert_eq!(d("1 / (1 + x[0])"), None);
        assert_eq!(d("x[0]^0.5"), None);
        assert_eq!(d("x[0] / y[0]"), Some(1));
    }

    #[test]
    fn exponent_in_x_rejected() {
        assert!(CompiledExpr::new("2^x[0]", 0, 1).is_err());
        assert!(CompiledExpr::new("x[0]^y[0]", 1, 1).is_ok());
    }

    #[test]
    fn arity_checked() {
        assert!(CompiledExpr::new("x[3]", 1, 2).is_err());
        assert!(CompiledExpr::new("y[1]", 1, 2).is_err());
    }

    #[test]
    fn symbolic_gradient_matches_finite_differences() {
        let src = "(x[0] + 2*x[1] - y[0])^3 / (1 + y[0]^2) + x[0]*x[1] - x[1]^y[0]";
        let c = CompiledExpr::new(src, 1, 2).unwrap();
        let y = [1.7];
        let x = [0.3, 0.8];
        for j in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (c.expr.eval(&y, &xp) - c.expr.eval(&y, &xm)) / (2.0 * h);
            let g = c.gradient[j].eval(&y, &x);
            assert!((fd - g).abs() < 1e-6 * (1.0 + g.abs()), "j={j}: {g} vs {fd}");
        }
    }

    #[test]
    fn hessian_of_quadratic() {
        let c = CompiledExpr::new("(x[0] + x[1] - 1)^2 + y[0]*x[0]*x[1]", 1, 2).unwrap();
        let hess = c.hessian_at(&[3.0]);
        assert_eq!(hess, vec![vec![2.0, 5.0], vec![5.0, 2.0]]);
    }
}
