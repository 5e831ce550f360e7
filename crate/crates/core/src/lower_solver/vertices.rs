use crate::error::{Error, Result};
use crate::model::Polytope;

/// Combinatorial guard for basis enumeration.
pub const MAX_ENUMERATION_DIM: usize = 12;
const DEDUP_TOL: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-9;

/// Solves the square system `m · z = rhs` by Gaussian elimination with
/// partial pivoting; `None` when the matrix is numerically singular.
#[allow(clippy::needless_range_loop)] // row operations read one row while writing another
pub(crate) fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..k {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut z = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| m[r][c] * z[c]).sum();
        z[r] = (rhs[r] - s) / m[r][r];
    }
    Some(z)
}

/// Indices of a maximal linearly independent subset of rows.
pub(crate) fn independent_rows(a: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (i, row) in a.iter().enumerate() {
        let mut r = row.clone();
        for b in &basis {
            let lead = b.iter().position(|v| v.abs() > 1e-12).unwrap();
            let f = r[lead] / b[lead];
            for (rv, bv) in r.iter_mut().zip(b) {
                *rv -= f * bv;
            }
        }
        let scale = 1.0 + row.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if r.iter().any(|v| v.abs() > 1e-10 * scale) {
            basis.push(r);
            keep.push(i);
        }
    }
    keep
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn enumerate(c: &Polytope) -> Vec<Vec<f64>> {
    let n = c.n();
    let rows = independent_rows(c.a());
    let r = rows.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if r == 0 {
        out.push(vec![0.0; n]);
        return out;
    }
    combinations(n, r, |cols| {
        let m: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| c.a()[i][j]).collect()).collect();
        let rhs: Vec<f64> = rows.iter().map(|&i| c.b()[i]).collect();
        let Some(z) = solve_square(m, rhs) else { return };
        if z.iter().any(|v| *v < -FEAS_TOL) {
            return;
        }
        let mut x = vec![0.0; n];
        for (&j, v) in cols.iter().zip(&z) {
            x[j] = v.max(0.0);
        }
        if c.residual(&x) > FEAS_TOL {
            return;
        }
        if !out.iter().any(|v| crate::linalg::max_abs_diff(v, &x) <= DEDUP_TOL) {
            out.push(x);
        }
    });
    out
}

/// All basic feasible solutions of `C`, deduplicated; cached on `C`.
pub fn enumerate_vertices(c: &Polytope) -> Result<&[Vec<f64>]> {
    if c.n() > MAX_ENUMERATION_DIM {
        return Err(Error::VertexGuard { n: c.n(), limit: MAX_ENUMERATION_DIM });
    }
    Ok(c.vertex_cache().get_or_init(|| enumerate(c)).as_slice())
}
