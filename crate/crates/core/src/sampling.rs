//! Deterministic sampling of `K` and `C`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lower_solver::{enumerate_vertices, lp_minimize, LpStatus};
use crate::model::{BoxSet, Polytope};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Vertices of `C`, or for large `n` a pool of LP vertices for random
/// cost vectors.
pub fn vertex_pool(c: &Polytope, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    if let Ok(v) = enumerate_vertices(c) {
        return v.to_vec();
    }
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for _ in 0..4 * c.n() {
        let cost: Vec<f64> = (0..c.n()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let s = lp_minimize(&cost, c);
        if s.status == LpStatus::Optimal && !pool.iter().any(|v| crate::linalg::max_abs_diff(v, &s.x) <= 1e-8) {
            pool.push(s.x);
        }
    }
    pool
}

/// A random convex combination of a random subset of `pool`.
pub fn convex_combination(pool: &[Vec<f64>], rng: &mut impl Rng) -> Vec<f64> {
    let n = pool[0].len();
    let k = rng.gen_range(1..=pool.len());
    let mut chosen: Vec<usize> = (0..pool.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        chosen.swap(i, j);
    }
    // exponential spacings give Dirichlet(1, …, 1) weights
    let weights: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    let mut x = vec![0.0; n];
    for (&i, w) in chosen[..k].iter().zip(&weights) {
        for (xj, vj) in x.iter_mut().zip(&pool[i]) {
            *xj += w / total * vj;
        }
    }
    x
}

/// `count` feasible points of `C`.
pub fn feasible_points(c: &Polytope, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let pool = vertex_pool(c, rng);
    (0..count).map(|_| convex_combination(&pool, rng)).collect()
}

pub fn box_point(k: &BoxSet, rng: &mut impl Rng) -> Vec<f64> {
    k.lower().iter().zip(k.upper()).map(|(l, u)| l + (u - l) * rng.gen::<f64>()).collect()
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut r = 0.0;
    let mut f = 1.0 / base as f64;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f /= base as f64;
    }
    r
}

/// Halton points in `K` with a seeded Cranley–Patterson rotation. The box
/// center is always the first point.
pub fn scrambled_halton(k: &BoxSet, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let shift: Vec<f64> = (0..k.dim()).map(|_| r.gen::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(k.center());
    }
    for i in 1..count as u64 {
        let y = (0..k.dim())
            .map(|d| {
                let u = (radical_inverse(i, PRIMES[d % PRIMES.len()]) + shift[d]).fract();
                k.lower()[d] + (k.upper()[d] - k.lower()[d]) * u
            })
            .collect();
        out.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_van_der_corput() {
        let got: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn halton_points_in_box_and_seeded() {
        let k = BoxSet::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
        let a = scrambled_halton(&k, 16, 3);
        assert_eq!(a[0], vec![0.5, 0.0]);
        assert!(a.iter().all(|y| k.contains(y)));
        assert_eq!(a, scrambled_halton(&k, 16, 3));
        assert_ne!(a, scrambled_halton(&k, 16, 4));
    }

    #[test]
    fn samples_are_feasible() {
        let c = Polytope::new(vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]], vec![1.0, 1.0], 4).unwrap();
        let mut r = rng(1);
        for x in feasible_points(&c, 200, &mut r) {
            assert!(c.contains(&x, 1e-12));
        }
        let big = Polytope::new(vec![vec![1.0; 14]], vec![1.0], 14).unwrap();
        for x in feasible_points(&big, 20, &mut r) {
            assert!(big.contains(&x, 1e-12));
        }
    }
}
