//! Independent reference implementations used by the integration tests.
//!
//! Everything here is deliberately naive: exhaustive enumeration, dense
//! linear algebra and finite differences.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Weighted isotonic (descending) regression by trying every split of
/// `0..d` into contiguous pools.
///
/// The optimum is constant on pools at the pool's weighted mean, so the
/// best feasible partition is the answer.
pub fn brute_force_pav(y: &[f64], w: &[f64]) -> Vec<f64> {
    let d = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (d - 1)) {
        // Bit j set: a pool boundary after index j.
        let mut z = vec![0.0; d];
        let mut start = 0;
        for end in 1..=d {
            if end == d || mask & (1 << (end - 1)) != 0 {
                let wsum: f64 = w[start..end].iter().sum();
                let mean = (start..end).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
                z[start..end].iter_mut().for_each(|v| *v = mean);
                start = end;
            }
        }
        if z.windows(2).any(|p| p[0] < p[1]) {
            continue;
        }
        let cost: f64 = (0..d).map(|i| w[i] * (z[i] - y[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, z));
        }
    }
    best.expect("the single pool is always feasible").1
}

/// `argmin ½ Σ w_i (z_i − y_i)²` subject to `A z ≤ b` (rows flagged in
/// `equality` hold with equality), by enumerating active sets and solving
/// each KKT system densely. Returns `None` if no candidate is feasible.
pub fn dense_qp(y: &[f64], w: &[f64], a: &[Vec<f64>], b: &[f64], equality: &[bool], tol: f64) -> Option<Vec<f64>> {
    let d = y.len();
    let m = a.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        if (0..m).any(|i| equality[i] && mask & (1 << i) == 0) {
            continue;
        }
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        let mut kkt = DMatrix::<f64>::zeros(d + k, d + k);
        let mut rhs = DVector::<f64>::zeros(d + k);
        for i in 0..d {
            kkt[(i, i)] = w[i];
            rhs[i] = w[i] * y[i];
        }
        for (r, &row) in active.iter().enumerate() {
            for j in 0..d {
                kkt[(d + r, j)] = a[row][j];
                kkt[(j, d + r)] = a[row][j];
            }
            rhs[d + r] = b[row];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let z: Vec<f64> = sol.iter().take(d).copied().collect();
        let feasible = (0..m).all(|i| {
            let v: f64 = a[i].iter().zip(&z).map(|(p, q)| p * q).sum::<f64>() - b[i];
            if equality[i] {
                v.abs() <= tol
            } else {
                v <= tol
            }
        });
        if !feasible {
            continue;
        }
        let cost: f64 = (0..d).map(|i| 0.5 * w[i] * (z[i] - y[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c - 1e-15) {
            best = Some((cost, z));
        }
    }
    best.map(|(_, z)| z)
}

/// Calls `f` with every permutation of `0..d` (Heap's algorithm).
pub fn for_each_permutation(d: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..d).collect();
    let mut c = vec![0; d];
    f(&p);
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Positions where adjacent entries are equal within `tol`.
pub fn pooling_pattern(z: &[f64], tol: f64) -> Vec<bool> {
    z.windows(2).map(|p| (p[0] - p[1]).abs() <= tol).collect()
}

pub fn random_simplex_point(rng: &mut impl Rng, d: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(floor..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}
