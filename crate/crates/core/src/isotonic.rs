//! Retargeting: projecting a query's current scores onto descending targets.
//!
//! Three routes are provided:
//!
//! * [`retarget_dualmap`] for divergences whose conjugate is defined on all
//!   of ℝᵈ (KL, shifted GI). The minimizer over the descending part of
//!   dom φ is the inverse link applied to the least-squares isotonic fit of
//!   the scores, so the whole step is one weighted PAV pass.
//! * [`retarget_squared_simplex`] for the squared loss, where the targets
//!   are additionally confined to the unit simplex. Dykstra's algorithm
//!   alternates PAV and simplex projection.
//! * [`retarget_inner`], which optimizes the cone coordinates directly with
//!   entropic (exponentiated) proximal gradient steps and works for every
//!   kind.

use crate::divergence::{dot, DivergenceKind, DivergenceSpec};
use crate::error::{Error, NoConvergence, Result};
use crate::ordercone::{is_descending, ConeBasis};

/// Outcome of one retargeting step for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct RetargetResult {
    /// Descending target vector.
    pub r: Vec<f64>,
    /// Cone coordinates when the inner solver produced `r` from them.
    pub x: Option<Vec<f64>>,
    /// `D_φ(r ‖ ∇ψ(scores))` at `r`.
    pub objective: f64,
    pub iterations: usize,
}

/// Weighted least-squares projection onto the descending cone.
///
/// Returns the unique minimizer of `Σ w_i (z_i − y_i)²` over descending `z`.
/// Adjacent pools of the result have strictly decreasing values.
pub fn pav_descending(y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    Error::check_len(y.len(), weights.len())?;
    if let Some(bad) = weights.iter().find(|&&w| w.is_nan() || w <= 0.0) {
        return Err(Error::InvalidSpec(format!("PAV weight {bad} is not positive")));
    }
    Ok(pav_unchecked(y, weights))
}

struct Pool {
    mean: f64,
    weight: f64,
    len: usize,
}

fn pav_unchecked(y: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut pools: Vec<Pool> = Vec::with_capacity(y.len());
    for (&v, &w) in y.iter().zip(weights) {
        let mut cur = Pool { mean: v, weight: w, len: 1 };
        while let Some(prev) = pools.last() {
            if prev.mean > cur.mean {
                break;
            }
            let prev = pools.pop().unwrap();
            let weight = prev.weight + cur.weight;
            // Incremental form keeps the value exact when the means agree.
            let mean = prev.mean + (cur.mean - prev.mean) * (cur.weight / weight);
            cur = Pool { mean, weight, len: prev.len + cur.len };
        }
        pools.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for pool in &pools {
        out.extend(std::iter::repeat_n(pool.mean, pool.len));
    }
    out
}

/// Exact retargeting through the dual map.
///
/// Pools `scores / w` with weighted PAV and maps the result back with `∇ψ`.
/// Only defined for kinds whose constraint set is dom φ itself.
pub fn retarget_dualmap(spec: &DivergenceSpec, scores: &[f64]) -> Result<RetargetResult> {
    if spec.kind == DivergenceKind::SquaredEuclidean {
        return Err(Error::InvalidSpec(
            "dual-map retargeting needs a divergence with a bounded target set (kl or gi)".into(),
        ));
    }
    let w = spec.weights_for(scores.len())?;
    let scaled: Vec<f64> = scores.iter().zip(&w).map(|(s, w)| s / w).collect();
    let pooled = pav_unchecked(&scaled, &w);
    let theta: Vec<f64> = pooled.iter().zip(&w).map(|(z, w)| z * w).collect();
    let r = spec.backward_map(&theta)?;
    let objective = spec.divergence_to_dual(&r, scores)?;
    Ok(RetargetResult { r, x: None, objective, iterations: 1 })
}

/// Euclidean projection onto the unit simplex (sort and threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    project_simplex_weighted(y, &vec![1.0; y.len()])
}

/// Projection onto the unit simplex in the norm `Σ w_i z_i²`.
///
/// The solution is `z_i = max(0, y_i − τ / w_i)`; `τ` is found by scanning
/// the sorted breakpoints `w_i y_i`.
pub fn project_simplex_weighted(y: &[f64], w: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| (w[b] * y[b]).total_cmp(&(w[a] * y[a])));
    let (mut sum_y, mut sum_inv_w) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        sum_y += y[i];
        sum_inv_w += 1.0 / w[i];
        let candidate = (sum_y - 1.0) / sum_inv_w;
        let next_breakpoint = order.get(k + 1).map(|&j| w[j] * y[j]);
        // Active set is exactly the first k+1 indices when the threshold
        // falls between consecutive breakpoints.
        if next_breakpoint.is_none_or(|b| candidate >= b) {
            tau = candidate;
            break;
        }
    }
    let mut z: Vec<f64> = y.iter().zip(w).map(|(v, wi)| (v - tau / wi).max(0.0)).collect();
    // Remove the rounding residue of the threshold from the largest entry.
    let total: f64 = z.iter().sum();
    if let Some(&top) = order.first() {
        z[top] += 1.0 - total;
    }
    z
}

/// Stopping rule for the iterative retargeting routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetargetOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RetargetOptions {
    fn default() -> Self {
        RetargetOptions { tol: 1e-9, max_iter: 10_000 }
    }
}

/// Squared-loss retargeting onto the descending simplex.
///
/// Computes the projection of `∇ψ(scores) = scores / w` onto `Δ ∩ R↓` by
/// Dykstra's alternating projections between the descending cone (PAV) and
/// the simplex. Stops when successive iterates move less than `tol`.
pub fn retarget_squared_simplex(
    spec: &DivergenceSpec,
    scores: &[f64],
    opts: RetargetOptions,
) -> Result<RetargetResult> {
    if spec.kind != DivergenceKind::SquaredEuclidean {
        return Err(Error::InvalidSpec("simplex retargeting is defined for the squared loss".into()));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let d = scores.len();
    let w = spec.weights_for(d)?;
    let y: Vec<f64> = scores.iter().zip(&w).map(|(s, w)| s / w).collect();

    let mut x = y.clone();
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let shifted: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let a = pav_unchecked(&shifted, &w);
        for i in 0..d {
            p[i] = shifted[i] - a[i];
        }
        let shifted: Vec<f64> = a.iter().zip(&q).map(|(a, b)| a + b).collect();
        let b = project_simplex_weighted(&shifted, &w);
        for i in 0..d {
            q[i] = shifted[i] - b[i];
        }
        let moved = x.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        x = b;
        if moved < opts.tol {
            converged = true;
            break;
        }
    }
    // Final cone/simplex pass removes the O(tol) order residue. For unit
    // weights simplex projection preserves order, so the result is exactly
    // descending.
    let polished = project_simplex_weighted(&pav_unchecked(&x, &w), &w);
    let r = if is_descending(&polished, 0.0) { polished } else { x };
    let objective = spec.divergence_to_dual(&r, scores)?;
    let result = RetargetResult { r, x: None, objective, iterations };
    if converged {
        Ok(result)
    } else {
        Err(Error::no_convergence(NoConvergence::Retarget(result)))
    }
}

/// Step-size control for [`retarget_inner`].
#[derive(Clone, Debug, PartialEq)]
pub struct InnerOptions {
    /// Relative objective decrease below which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Optional starting cone coordinates.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            tol: 1e-10,
            max_iter: 10_000,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            warm_start: None,
        }
    }
}

/// The cone parameterization used by the inner solver for a given kind.
struct InnerGeometry {
    basis: ConeBasis,
    /// Targets are `offset + basis · x`.
    offset: f64,
    /// Coordinates live on the simplex (normalized updates) or the orthant.
    on_simplex: bool,
}

impl InnerGeometry {
    fn new(spec: &DivergenceSpec, d: usize) -> Self {
        match spec.kind {
            DivergenceKind::ShiftedGI => InnerGeometry {
                basis: ConeBasis::general(d),
                offset: spec.gi_shift,
                on_simplex: false,
            },
            _ => InnerGeometry { basis: ConeBasis::simplex(d), offset: 0.0, on_simplex: true },
        }
    }

    fn targets(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.basis.apply_unchecked(x);
        r.iter_mut().for_each(|v| *v += self.offset);
        r
    }
}

/// Retargeting by entropic proximal gradient on the cone coordinates.
///
/// Minimizes `g(x) = D_φ(Mx + c ‖ ∇ψ(scores))` where `M` is the harmonic
/// simplex basis with `x ∈ Δ` (squared, KL) or the all-ones cone basis with
/// `x ≥ 0` and offset `c = 1` (shifted GI). Each step is multiplicative,
/// `x ← x ∘ exp(−η ∇g)` (renormalized on the simplex), with Armijo
/// backtracking on `g`.
pub fn retarget_inner(
    spec: &DivergenceSpec,
    scores: &[f64],
    opts: &InnerOptions,
) -> Result<RetargetResult> {
    let d = scores.len();
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let w = spec.weights_for(d)?;
    let geo = InnerGeometry::new(spec, d);

    let mut x = match &opts.warm_start {
        Some(x0) => {
            Error::check_len(d, x0.len())?;
            if x0.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::ConeViolation("warm start must be strictly positive".into()));
            }
            if geo.on_simplex {
                let z: f64 = x0.iter().sum();
                x0.iter().map(|v| v / z).collect()
            } else {
                x0.clone()
            }
        }
        None if geo.on_simplex => vec![1.0 / d as f64; d],
        None => {
            let spread = scores
                .iter()
                .zip(&w)
                .map(|(s, w)| crate::divergence::clamped_exp(s / w))
                .sum::<f64>()
                / d as f64;
            vec![spread.max(1e-3) / d as f64; d]
        }
    };

    let eval = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let r = geo.targets(x);
        let g = spec.divergence_to_dual(&r, scores)?;
        Ok((r, g))
    };

    let (mut r, mut g) = eval(&x)?;
    if geo.on_simplex && d == 1 {
        return Ok(RetargetResult { r, x: Some(x), objective: g, iterations: 0 });
    }
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad_r = target_gradient(spec, &r, scores, &w);
        let grad = geo.basis.apply_transpose_unchecked(&grad_r);
        let shift = if geo.on_simplex { grad.iter().copied().fold(f64::INFINITY, f64::min) } else { 0.0 };

        let mut eta = step;
        let mut accepted = None;
        while eta > 1e-30 {
            let mut cand: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| xi * (-(eta * (gi - shift)).min(700.0)).exp())
                .collect();
            if geo.on_simplex {
                let z: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|v| *v /= z);
            }
            if cand.iter().all(|v| v.is_finite()) {
                let (cr, cg) = eval(&cand)?;
                let delta: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
                let predicted = dot(&grad, &delta);
                if cg <= g + opts.armijo * predicted && cg <= g {
                    accepted = Some((cand, cr, cg, eta));
                    break;
                }
            }
            eta *= opts.shrink;
        }

        let Some((nx, nr, ng, eta)) = accepted else {
            // No decreasing step exists at machine precision.
            converged = true;
            break;
        };
        let decrease = g - ng;
        x = nx;
        r = nr;
        g = ng;
        step = (eta * 2.0).min(1e6);
        if decrease <= opts.tol * g.abs() || g == 0.0 {
            converged = true;
            break;
        }
    }

    let result = RetargetResult { r, x: Some(x), objective: g, iterations };
    if converged {
        Ok(result)
    } else {
        Err(Error::no_convergence(NoConvergence::Retarget(result)))
    }
}

/// `∇_r D_φ(r ‖ ∇ψ(scores)) = ∇φ(r) − scores`, with logarithms clamped so
/// boundary coordinates stay finite.
fn target_gradient(spec: &DivergenceSpec, r: &[f64], scores: &[f64], w: &[f64]) -> Vec<f64> {
    const FLOOR: f64 = 1e-300;
    r.iter()
        .zip(scores)
        .zip(w)
        .map(|((&ri, &si), &wi)| {
            let forward = match spec.kind {
                DivergenceKind::SquaredEuclidean => wi * ri,
                DivergenceKind::KLSimplex => wi * ri.max(FLOOR).ln(),
                DivergenceKind::ShiftedGI => wi * (ri - spec.gi_shift).max(FLOOR).ln(),
            };
            forward - si
        })
        .collect()
}

/// Retargeting route, selectable per training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetargetPath {
    DualMap,
    Inner,
    #[serde(rename = "simplex")]
    SquaredSimplex,
}

impl RetargetPath {
    /// Exact route for the kind.
    pub fn default_for(kind: DivergenceKind) -> Self {
        match kind {
            DivergenceKind::SquaredEuclidean => RetargetPath::SquaredSimplex,
            _ => RetargetPath::DualMap,
        }
    }

    pub fn supports(self, kind: DivergenceKind) -> bool {
        match self {
            RetargetPath::DualMap => kind != DivergenceKind::SquaredEuclidean,
            RetargetPath::SquaredSimplex => kind == DivergenceKind::SquaredEuclidean,
            RetargetPath::Inner => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RetargetPath::DualMap => "dualmap",
            RetargetPath::Inner => "inner",
            RetargetPath::SquaredSimplex => "simplex",
        }
    }
}

impl std::fmt::Display for RetargetPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RetargetPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dualmap" => Ok(RetargetPath::DualMap),
            "inner" => Ok(RetargetPath::Inner),
            "simplex" => Ok(RetargetPath::SquaredSimplex),
            other => Err(Error::InvalidConfig(format!("unknown retarget path '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn pav_examples() {
        assert_eq!(pav_descending(&[5.0, 1.0], &[1.0, 1.0]).unwrap(), vec![5.0, 1.0]);
        assert_close(&pav_descending(&[1.0, 3.0, 2.0], &[1.0; 3]).unwrap(), &[2.0; 3], 1e-15);
        assert_close(&pav_descending(&[1.0, 3.0], &[3.0, 1.0]).unwrap(), &[1.5, 1.5], 1e-15);
    }

    #[test]
    fn pav_rejects_bad_weights() {
        assert!(pav_descending(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(pav_descending(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn dualmap_examples() {
        let kl = DivergenceSpec::kl();
        assert_close(&retarget_dualmap(&kl, &[0.0, 0.0]).unwrap().r, &[0.5, 0.5], 1e-15);
        assert_close(&retarget_dualmap(&kl, &[0.0, 3f64.ln()]).unwrap().r, &[0.5, 0.5], 1e-15);
        let gi = retarget_dualmap(&DivergenceSpec::gi(), &[1.0, 0.0]).unwrap();
        assert_close(&gi.r, &[1.0 + std::f64::consts::E, 2.0], 1e-14);
        assert_eq!(gi.objective, 0.0);
        assert!(retarget_dualmap(&DivergenceSpec::squared(), &[1.0]).is_err());
    }

    #[test]
    fn simplex_projection_examples() {
        assert_close(&project_simplex(&[0.3, 0.3, 0.4]), &[0.3, 0.3, 0.4], 1e-15);
        assert_close(&project_simplex(&[2.0, 0.0]), &[1.0, 0.0], 1e-15);
        for c in [-7.0, 0.0, 0.25, 13.0] {
            assert_close(&project_simplex(&[0.5 + c, 0.5 + c]), &[0.5, 0.5], 1e-12);
        }
    }

    #[test]
    fn weighted_simplex_projection_satisfies_kkt() {
        let y = [0.9, -0.2, 0.7, 0.1];
        let w = [2.0, 1.0, 0.5, 4.0];
        let z = project_simplex_weighted(&y, &w);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // w_i (y_i − z_i) equals τ on the support and is ≤ τ off it.
        let tau: Vec<f64> = (0..4).filter(|&i| z[i] > 0.0).map(|i| w[i] * (y[i] - z[i])).collect();
        for t in &tau {
            assert!((t - tau[0]).abs() < 1e-12);
        }
        for i in (0..4).filter(|&i| z[i] == 0.0) {
            assert!(w[i] * y[i] <= tau[0] + 1e-12);
        }
    }

    #[test]
    fn squared_simplex_examples() {
        let sq = DivergenceSpec::squared();
        let opts = RetargetOptions::default();
        let fixed = [0.5, 0.3, 0.2];
        assert_close(&retarget_squared_simplex(&sq, &fixed, opts).unwrap().r, &fixed, 1e-12);
        assert_close(&retarget_squared_simplex(&sq, &[0.0, 1.0], opts).unwrap().r, &[0.5, 0.5], 1e-9);
        assert_close(
            &retarget_squared_simplex(&sq, &[10.0, 0.0, 0.0], opts).unwrap().r,
            &[1.0, 0.0, 0.0],
            1e-9,
        );
    }

    #[test]
    fn squared_simplex_matches_closed_form_for_unit_weights() {
        // With unit weights the intersection projection equals simplex
        // projection of the isotonic fit.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sq = DivergenceSpec::squared();
        for _ in 0..200 {
            let d = rng.random_range(1..12);
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = retarget_squared_simplex(&sq, &y, RetargetOptions::default()).unwrap();
            let want = project_simplex(&pav_unchecked(&y, &vec![1.0; d]));
            assert_close(&got.r, &want, 1e-7);
            assert!(is_descending(&got.r, 1e-8));
        }
    }

    #[test]
    fn squared_simplex_reports_no_convergence() {
        let sq = DivergenceSpec::squared();
        let opts = RetargetOptions { tol: 0.0, max_iter: 2 };
        match retarget_squared_simplex(&sq, &[0.1, 0.9, -0.3, 0.5], opts) {
            Err(Error::NoConvergence(p)) => assert!(matches!(*p, NoConvergence::Retarget(_))),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn inner_matches_dualmap_for_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let kl = DivergenceSpec::kl();
        for _ in 0..50 {
            let d = rng.random_range(1..=10);
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let exact = retarget_dualmap(&kl, &s).unwrap();
            let inner = retarget_inner(&kl, &s, &InnerOptions::default()).unwrap();
            assert!(inner.objective <= exact.objective + 1e-6, "{} vs {}", inner.objective, exact.objective);
            assert!(is_descending(&inner.r, 1e-12));
        }
    }

    #[test]
    fn inner_matches_dualmap_for_gi() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let gi = DivergenceSpec::gi();
        for _ in 0..30 {
            let d = rng.random_range(1..=8);
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let exact = retarget_dualmap(&gi, &s).unwrap();
            // The orthant parameterization is worse conditioned than the
            // simplex one, so it needs a tighter stopping rule.
            let opts = InnerOptions { tol: 1e-13, ..InnerOptions::default() };
            let inner = retarget_inner(&gi, &s, &opts).unwrap();
            assert!(inner.objective <= exact.objective + 1e-6, "{} vs {}", inner.objective, exact.objective);
        }
    }

    #[test]
    fn inner_matches_dykstra_for_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sq = DivergenceSpec::squared();
        for _ in 0..30 {
            let d = rng.random_range(1..=8);
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exact = retarget_squared_simplex(&sq, &s, RetargetOptions::default()).unwrap();
            let inner = retarget_inner(&sq, &s, &InnerOptions::default()).unwrap();
            assert!(inner.objective <= exact.objective + 1e-6);
        }
    }

    #[test]
    fn inner_preserves_attainable_order() {
        let kl = DivergenceSpec::kl();
        let s = [6.0, 3.0, 0.0, -3.0];
        let res = retarget_inner(&kl, &s, &InnerOptions::default()).unwrap();
        for w in res.r.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn inner_single_coordinate_is_trivial() {
        let res = retarget_inner(&DivergenceSpec::kl(), &[3.0], &InnerOptions::default()).unwrap();
        assert_eq!(res.r, vec![1.0]);
    }

    fn pools(z: &[f64]) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in z {
            match out.last_mut() {
                Some((m, n)) if *m == v => *n += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    proptest! {
        #[test]
        fn pav_characterization(
            pairs in prop::collection::vec((-10.0f64..10.0, 0.1f64..5.0), 1..30)
        ) {
            let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let z = pav_descending(&y, &w).unwrap();
            prop_assert!(is_descending(&z, 0.0));
            let ps = pools(&z);
            for pair in ps.windows(2) {
                prop_assert!(pair[0].0 > pair[1].0);
            }
            let mut start = 0;
            for (value, len) in ps {
                let (num, den) = (start..start + len).fold((0.0, 0.0), |(n, d), i| (n + w[i] * y[i], d + w[i]));
                prop_assert!((value - num / den).abs() <= 1e-9 * (1.0 + value.abs()));
                start += len;
            }
        }

        #[test]
        fn pav_idempotent_and_scale_equivariant(
            pairs in prop::collection::vec((-10.0f64..10.0, 0.1f64..5.0), 1..30),
            alpha in 0.01f64..100.0,
        ) {
            let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let z = pav_descending(&y, &w).unwrap();
            prop_assert_eq!(&pav_descending(&z, &w).unwrap(), &z);
            let scaled: Vec<f64> = y.iter().map(|v| alpha * v).collect();
            let zs = pav_descending(&scaled, &w).unwrap();
            for (a, b) in zs.iter().zip(&z) {
                prop_assert!((a - alpha * b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn simplex_projection_lands_in_simplex(y in prop::collection::vec(-20.0f64..20.0, 1..30)) {
            let z = project_simplex(&y);
            prop_assert!((z.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(z.iter().all(|&v| v >= 0.0));
        }
    }
}
