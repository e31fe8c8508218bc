//! Bregman's row-action method for `min D_φ(x ‖ y)` subject to `Ax ≤ b`.
//!
//! The iterate is carried in dual coordinates,
//! `∇φ(z) = ∇φ(y) − Aᵀλ` with `λ ≥ 0` on inequality rows. Each row update
//! Bregman-projects the current point onto the row's hyperplane, then caps
//! the multiplier change so `λ` stays nonnegative (Hildreth's rule). The
//! parallel mode computes every row correction from the same iterate and
//! applies their average.

use crate::blockperm::BlockPartition;
use crate::divergence::{dot, DivergenceKind, DivergenceSpec};
use crate::error::{Error, NoConvergence, Result};

const ROOT_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 200;

/// One constraint `⟨a, z⟩ ≤ b` (or `= b` when `equality` is set).
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub a: Vec<f64>,
    pub b: f64,
    pub equality: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    dim: usize,
    rows: Vec<Row>,
}

impl LinearSystem {
    pub fn new(dim: usize) -> Self {
        LinearSystem { dim, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn push(&mut self, a: Vec<f64>, b: f64, equality: bool) -> Result<()> {
        Error::check_len(self.dim, a.len())?;
        if a.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidConfig("constraint normal must be nonzero".into()));
        }
        self.rows.push(Row { a, b, equality });
        Ok(())
    }

    /// Adds `⟨a, z⟩ ≤ b`.
    pub fn push_le(&mut self, a: Vec<f64>, b: f64) -> Result<()> {
        self.push(a, b, false)
    }

    /// Adds `⟨a, z⟩ = b`.
    pub fn push_eq(&mut self, a: Vec<f64>, b: f64) -> Result<()> {
        self.push(a, b, true)
    }

    /// Largest constraint violation at `z`.
    pub fn residual(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let v = dot(&row.a, z) - row.b;
                if row.equality {
                    v.abs()
                } else {
                    v.max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    Sequential,
    Parallel,
}

/// Multiplier combination rule for the parallel mode. Only the averaged
/// increment is implemented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParallelCombine {
    #[default]
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub mode: UpdateMode,
    pub combine: ParallelCombine,
    pub tol: f64,
    /// Cap on full sweeps over the rows.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: UpdateMode::Sequential,
            combine: ParallelCombine::Mean,
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub z: Vec<f64>,
    /// One multiplier per row; nonnegative on inequality rows.
    pub lambda: Vec<f64>,
    /// Completed sweeps.
    pub iteration: usize,
    pub residual: f64,
}

/// Bregman projection of `z` onto the hyperplane `⟨a, p⟩ = b`.
///
/// Returns `p` and the multiplier `c` with `∇φ(p) = ∇φ(z) + c a`.
pub fn halfspace_project(
    spec: &DivergenceSpec,
    z: &[f64],
    a: &[f64],
    b: f64,
) -> Result<(Vec<f64>, f64)> {
    Error::check_len(z.len(), a.len())?;
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidConfig("constraint normal must be nonzero".into()));
    }
    let theta = spec.forward_map(z)?;
    let c = hyperplane_multiplier(spec, &theta, a, b)?;
    if c == 0.0 {
        return Ok((z.to_vec(), 0.0));
    }
    let p = spec.backward_map(&shifted(&theta, a, c))?;
    Ok((p, c))
}

fn shifted(theta: &[f64], a: &[f64], c: f64) -> Vec<f64> {
    theta.iter().zip(a).map(|(t, ai)| t + c * ai).collect()
}

/// Solves `⟨a, ∇ψ(θ + c a)⟩ = b` for `c`. The left side is nondecreasing in
/// `c`, so bracketing plus bisection always succeeds when a root exists.
fn hyperplane_multiplier(spec: &DivergenceSpec, theta: &[f64], a: &[f64], b: f64) -> Result<f64> {
    let h = |c: f64| -> Result<f64> { Ok(dot(a, &spec.backward_map(&shifted(theta, a, c))?) - b) };
    let h0 = h(0.0)?;
    let tol = ROOT_TOL * (1.0 + b.abs());
    if h0.abs() <= tol {
        return Ok(0.0);
    }
    if spec.kind == DivergenceKind::SquaredEuclidean {
        let norm: f64 = a.iter().enumerate().map(|(i, v)| v * v / spec.weight(i)).sum();
        return Ok(-h0 / norm);
    }

    let norm_sq = dot(a, a);
    let mut step = 1.0 / norm_sq.sqrt();
    let (mut lo, mut hi) = if h0 > 0.0 { (-step, 0.0) } else { (0.0, step) };
    let mut doublings = 0;
    loop {
        let probe = if h0 > 0.0 { lo } else { hi };
        let v = h(probe)?;
        if (h0 > 0.0 && v <= 0.0) || (h0 < 0.0 && v >= 0.0) {
            break;
        }
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::BracketFailure);
        }
        if h0 > 0.0 {
            hi = lo;
            step *= 2.0;
            lo = -step;
        } else {
            lo = hi;
            step *= 2.0;
            hi = step;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = h(mid)?;
        if v.abs() <= tol {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1e-300) {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Approximates `argmin D_φ(x ‖ y)` subject to every row of `sys`.
pub fn bregman_solve(
    spec: &DivergenceSpec,
    y: &[f64],
    sys: &LinearSystem,
    opts: SolverOptions,
) -> Result<SolverState> {
    Error::check_len(sys.dim(), y.len())?;
    let mut theta = spec.forward_map(y)?;
    let m = sys.len();
    let mut lambda = vec![0.0; m];
    let mut z = y.to_vec();
    let mut state = SolverState { residual: sys.residual(&z), z: z.clone(), lambda: lambda.clone(), iteration: 0 };
    if m == 0 {
        return Ok(state);
    }

    for sweep in 1..=opts.max_iter {
        let mut max_step: f64 = 0.0;
        match opts.mode {
            UpdateMode::Sequential => {
                for (i, row) in sys.rows().iter().enumerate() {
                    let Some(c) = row_correction(spec, &theta, row, lambda[i])? else {
                        continue;
                    };
                    lambda[i] -= c;
                    for (t, ai) in theta.iter_mut().zip(&row.a) {
                        *t += c * ai;
                    }
                    max_step = max_step.max(c.abs());
                }
            }
            UpdateMode::Parallel => {
                let mut corrections = vec![0.0; m];
                for (i, row) in sys.rows().iter().enumerate() {
                    if let Some(c) = row_correction(spec, &theta, row, lambda[i])? {
                        corrections[i] = c;
                    }
                }
                let scale = match opts.combine {
                    ParallelCombine::Mean => 1.0 / m as f64,
                };
                for (i, row) in sys.rows().iter().enumerate() {
                    let c = scale * corrections[i];
                    if c == 0.0 {
                        continue;
                    }
                    lambda[i] -= c;
                    for (t, ai) in theta.iter_mut().zip(&row.a) {
                        *t += c * ai;
                    }
                    max_step = max_step.max(corrections[i].abs());
                }
            }
        }
        z = spec.backward_map(&theta)?;
        let residual = sys.residual(&z);
        state = SolverState { z: z.clone(), lambda: lambda.clone(), iteration: sweep, residual };
        if residual <= opts.tol && max_step <= opts.tol {
            return Ok(state);
        }
    }
    Err(Error::no_convergence(NoConvergence::Solver(state)))
}

/// Multiplier change for one row, or `None` when the row is inactive.
///
/// With `∇φ(z) = ∇φ(y) − Aᵀλ`, projecting onto the hyperplane moves the
/// dual point by `c a` and the multiplier by `−c`. Inequality rows take
/// `min(c, λ_i)` so the multiplier never goes negative.
fn row_correction(spec: &DivergenceSpec, theta: &[f64], row: &Row, lambda: f64) -> Result<Option<f64>> {
    if !row.equality && lambda == 0.0 {
        let z = spec.backward_map(theta)?;
        if dot(&row.a, &z) <= row.b {
            return Ok(None);
        }
    }
    let c = hyperplane_multiplier(spec, theta, &row.a, row.b)?;
    let c = if row.equality { c } else { c.min(lambda) };
    Ok((c != 0.0).then_some(c))
}

/// The descending cone as `r_{j+1} − r_j ≤ 0`, one row per adjacent pair.
pub fn order_constraints(d: usize) -> LinearSystem {
    let mut sys = LinearSystem::new(d);
    for j in 0..d.saturating_sub(1) {
        let mut a = vec![0.0; d];
        a[j] = -1.0;
        a[j + 1] = 1.0;
        sys.rows.push(Row { a, b: 0.0, equality: false });
    }
    sys
}

/// Block order with one auxiliary separator per pair of adjacent blocks.
///
/// Variables are the `d` document targets (indexed like the partition)
/// followed by `k − 1` separators. Separator `j` sits between block `j` and
/// block `j + 1`: every member of block `j` is at least `margin` above it and
/// every member of block `j + 1` at least `margin` below. This needs
/// `|P_j| + |P_{j+1}|` rows per boundary instead of `|P_j|·|P_{j+1}|`.
pub fn block_order_constraints(blocks: &BlockPartition, margin: f64) -> Result<LinearSystem> {
    if margin.is_nan() || margin < 0.0 {
        return Err(Error::InvalidConfig("margin must be nonnegative".into()));
    }
    let d = blocks.len();
    let k = blocks.num_blocks();
    let dim = d + k.saturating_sub(1);
    let mut sys = LinearSystem::new(dim);
    for j in 0..k.saturating_sub(1) {
        let sep = d + j;
        for &m in &blocks.blocks()[j] {
            let mut a = vec![0.0; dim];
            a[sep] = 1.0;
            a[m] = -1.0;
            sys.rows.push(Row { a, b: -margin, equality: false });
        }
        for &m in &blocks.blocks()[j + 1] {
            let mut a = vec![0.0; dim];
            a[m] = 1.0;
            a[sep] = -1.0;
            sys.rows.push(Row { a, b: -margin, equality: false });
        }
    }
    Ok(sys)
}
