//! Finite parameterizations of the descending cone and the descending simplex.
//!
//! For a positive generator `v`, the upper-triangular matrix `U` with rows
//! `U(i, :) = (0, …, 0, v_i, …, v_d)` maps `ℝ₊^{d−1} × ℝ` onto the set of
//! descending vectors. With the harmonic generator `v = (1, 1/2, …, 1/d)`
//! the same construction (`T`) maps the unit simplex onto the descending
//! simplex. Neither matrix is ever materialized: `Ux` is a suffix sum of
//! `v ∘ x` and `Uᵀg` is `v ∘` prefix sums of `g`.

use crate::error::{Error, Result};

/// Tolerance for sign and simplex preconditions on cone coordinates.
pub const CONE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    /// Descending cone, coordinates in `ℝ₊^{d−1} × ℝ`.
    GeneralCone,
    /// Descending simplex, coordinates in the unit simplex.
    SimplexCone,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeBasis {
    v: Vec<f64>,
    kind: ConeKind,
}

impl ConeBasis {
    /// General cone with the all-ones generator.
    pub fn general(d: usize) -> Self {
        ConeBasis { v: vec![1.0; d], kind: ConeKind::GeneralCone }
    }

    pub fn with_generator(v: Vec<f64>) -> Result<Self> {
        if let Some(bad) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::ConeViolation(format!("generator entry {bad} is not positive")));
        }
        Ok(ConeBasis { v, kind: ConeKind::GeneralCone })
    }

    /// Harmonic generator `(1, 1/2, …, 1/d)`.
    pub fn simplex(d: usize) -> Self {
        ConeBasis { v: (1..=d).map(|i| 1.0 / i as f64).collect(), kind: ConeKind::SimplexCone }
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn generator(&self) -> &[f64] {
        &self.v
    }

    fn check_coords(&self, x: &[f64]) -> Result<()> {
        Error::check_len(self.dim(), x.len())?;
        match self.kind {
            ConeKind::GeneralCone => {
                let lead = &x[..x.len().saturating_sub(1)];
                match lead.iter().find(|&&c| c < -CONE_TOL) {
                    Some(c) => Err(Error::ConeViolation(format!("negative cone coordinate {c}"))),
                    None => Ok(()),
                }
            }
            ConeKind::SimplexCone => {
                let sum: f64 = x.iter().sum();
                if (sum - 1.0).abs() > CONE_TOL || x.iter().any(|&c| c < -CONE_TOL) {
                    Err(Error::ConeViolation("simplex-cone coordinates must lie in the simplex".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `Ux` (or `Tx`) in O(d).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_coords(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut acc = 0.0;
        for i in (0..x.len()).rev() {
            acc += self.v[i] * x[i];
            out[i] = acc;
        }
        out
    }

    /// `Uᵀg` in O(d): `(Uᵀg)_j = v_j Σ_{i ≤ j} g_i`.
    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.dim(), g.len())?;
        Ok(self.apply_transpose_unchecked(g))
    }

    pub(crate) fn apply_transpose_unchecked(&self, g: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        g.iter()
            .zip(&self.v)
            .map(|(gi, vi)| {
                acc += gi;
                vi * acc
            })
            .collect()
    }

    /// Inverse of [`ConeBasis::apply`]: `Diag(v)⁻¹ · AdjDiff(r)`.
    pub fn coords(&self, r: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.dim(), r.len())?;
        if !is_descending(r, CONE_TOL) {
            return Err(Error::ConeViolation("vector is not descending".into()));
        }
        Ok(adj_diff(r).iter().zip(&self.v).map(|(a, v)| a / v).collect())
    }
}

/// Adjacent differences of `[x; 0]`: `out_i = x_i − x_{i+1}`, `out_d = x_d`.
pub fn adj_diff(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|i| if i + 1 < d { x[i] - x[i + 1] } else { x[i] }).collect()
}

/// Suffix sums, the inverse of [`adj_diff`].
pub fn cum_sum(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut acc = 0.0;
    for i in (0..x.len()).rev() {
        acc += x[i];
        out[i] = acc;
    }
    out
}

/// `x_i ≥ x_{i+1} − tol` for every adjacent pair.
pub fn is_descending(x: &[f64], tol: f64) -> bool {
    x.windows(2).all(|w| w[0] >= w[1] - tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn adj_diff_and_cum_sum_examples() {
        assert_eq!(adj_diff(&[3.0, 2.0, 1.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(adj_diff(&[4.5]), vec![4.5]);
        assert_eq!(cum_sum(&[1.0, 1.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(cum_sum(&[0.0; 4]), vec![0.0; 4]);
        assert_eq!(*cum_sum(&[5.0, -2.0, 7.0]).last().unwrap(), 7.0);
    }

    #[test]
    fn apply_examples() {
        let u = ConeBasis::general(3);
        assert_eq!(u.apply(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 2.0, 1.0]);
        let t = ConeBasis::simplex(2);
        assert_eq!(t.apply(&[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(t.apply(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        // The last general coordinate is free.
        assert_eq!(u.apply(&[0.0, 0.0, -2.0]).unwrap(), vec![-2.0; 3]);
    }

    #[test]
    fn apply_rejects_bad_coordinates() {
        assert!(ConeBasis::general(3).apply(&[-1.0, 0.0, 0.0]).is_err());
        assert!(ConeBasis::simplex(2).apply(&[0.6, 0.6]).is_err());
        assert!(ConeBasis::general(3).apply(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn coords_examples() {
        assert_eq!(ConeBasis::general(3).coords(&[3.0, 2.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(ConeBasis::simplex(2).coords(&[0.5, 0.5]).unwrap(), vec![0.0, 1.0]);
        assert!(ConeBasis::general(2).coords(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn is_descending_examples() {
        assert!(is_descending(&[3.0, 3.0, 1.0], 0.0));
        assert!(!is_descending(&[1.0, 2.0], 0.0));
        assert!(is_descending(&[1.0, 1.0 + 1e-12], 1e-9));
    }

    #[test]
    fn transpose_matches_dense_product() {
        let basis = ConeBasis::with_generator(vec![2.0, 0.5, 1.5, 3.0]).unwrap();
        let g = [0.3, -1.0, 2.0, 0.7];
        let d = g.len();
        let v = basis.generator();
        let dense: Vec<f64> = (0..d)
            .map(|j| (0..d).map(|i| if j >= i { v[j] * g[i] } else { 0.0 }).sum())
            .collect();
        let fast = basis.apply_transpose(&g).unwrap();
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn simplex_point(raw: Vec<f64>) -> Vec<f64> {
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect()
    }

    proptest! {
        #[test]
        fn cum_sum_inverts_adj_diff(x in prop::collection::vec(-100.0f64..100.0, 1..20)) {
            let back = cum_sum(&adj_diff(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn general_roundtrip_and_descending(
            lead in prop::collection::vec(0.0f64..10.0, 0..15),
            last in -10.0f64..10.0,
        ) {
            let mut x = lead;
            x.push(last);
            let basis = ConeBasis::general(x.len());
            let r = basis.apply(&x).unwrap();
            prop_assert!(is_descending(&r, 0.0));
            let back = basis.coords(&r).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(r[0].abs())));
            }
        }

        #[test]
        fn simplex_cone_lands_in_descending_simplex(raw in prop::collection::vec(0.001f64..1.0, 1..15)) {
            let x = simplex_point(raw);
            let basis = ConeBasis::simplex(x.len());
            let r = basis.apply(&x).unwrap();
            prop_assert!(is_descending(&r, 0.0));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(r.iter().all(|&v| v >= 0.0));
            let back = basis.coords(&r).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn cone_is_closed_under_convex_combination(
            a in prop::collection::vec(0.0f64..5.0, 6),
            b in prop::collection::vec(0.0f64..5.0, 6),
            alpha in 0.0f64..1.0,
        ) {
            let basis = ConeBasis::general(6);
            let mix: Vec<f64> = a.iter().zip(&b).map(|(p, q)| alpha * p + (1.0 - alpha) * q).collect();
            prop_assert!(is_descending(&basis.apply(&mix).unwrap(), 1e-12));
        }

        #[test]
        fn descending_vectors_have_nonnegative_coordinates(mut r in prop::collection::vec(-50.0f64..50.0, 1..20)) {
            r.sort_by(|p, q| q.partial_cmp(p).unwrap());
            let x = ConeBasis::general(r.len()).coords(&r).unwrap();
            prop_assert!(x[..x.len() - 1].iter().all(|&c| c >= 0.0));
        }
    }
}
