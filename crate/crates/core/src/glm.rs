//! The canonical-link linear model and its ridge-regularized fit.
//!
//! For targets `r_i` and features `A_i` the fitted objective is
//!
//! ```text
//! Σ_i s_i · D_φ(r_i ‖ ∇ψ(A_i w + β_i 1)) + (C/2) ‖w‖²
//! ```
//!
//! with `s_i = 1/d_i` when query-length normalization is on and `1`
//! otherwise. The per-query offsets `β_i` are fitted jointly with `w` (as an
//! implicit all-ones feature column) and are discarded after training: they
//! shift every score of a query equally and so never change a ranking.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::divergence::{dot, DivergenceSpec};
use crate::error::{Error, NoConvergence, Result};

/// One query's contribution to the fit.
#[derive(Clone, Copy, Debug)]
pub struct QueryProblem<'a> {
    pub features: ArrayView2<'a, f64>,
    pub targets: &'a [f64],
}

/// Everything that defines the objective apart from the parameters.
#[derive(Clone, Copy, Debug)]
pub struct GlmProblem<'a> {
    pub queries: &'a [QueryProblem<'a>],
    pub spec: &'a DivergenceSpec,
    pub c: f64,
    pub normalized: bool,
}

impl<'a> GlmProblem<'a> {
    pub fn new(queries: &'a [QueryProblem<'a>], spec: &'a DivergenceSpec, c: f64, normalized: bool) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("regularization C must be nonnegative, got {c}")));
        }
        let n = queries.first().map_or(0, |q| q.features.ncols());
        for q in queries {
            Error::check_len(n, q.features.ncols())?;
            Error::check_len(q.features.nrows(), q.targets.len())?;
        }
        Ok(GlmProblem { queries, spec, c, normalized })
    }

    pub fn num_features(&self) -> usize {
        self.queries.first().map_or(0, |q| q.features.ncols())
    }

    fn scale(&self, q: &QueryProblem<'_>) -> f64 {
        if self.normalized {
            1.0 / q.targets.len() as f64
        } else {
            1.0
        }
    }

    fn check_params(&self, w: &[f64], beta: &[f64]) -> Result<()> {
        Error::check_len(self.num_features(), w.len())?;
        Error::check_len(self.queries.len(), beta.len())
    }

    /// Value of the objective at `(w, β)`.
    pub fn objective(&self, w: &[f64], beta: &[f64]) -> Result<f64> {
        self.check_params(w, beta)?;
        let mut total = 0.5 * self.c * dot(w, w);
        for (q, &b) in self.queries.iter().zip(beta) {
            let theta = linear_scores(q.features, w, b);
            total += self.scale(q) * self.spec.divergence_to_dual(q.targets, &theta)?;
        }
        Ok(total)
    }

    /// The same objective written in dual coordinates,
    /// `Σ s_i D_ψ(A_i w + β_i ‖ ∇φ(r_i))`. Requires interior targets.
    pub fn dual_objective(&self, w: &[f64], beta: &[f64]) -> Result<f64> {
        self.check_params(w, beta)?;
        let mut total = 0.5 * self.c * dot(w, w);
        for (q, &b) in self.queries.iter().zip(beta) {
            let theta = linear_scores(q.features, w, b);
            let anchor = self.spec.forward_map(q.targets)?;
            total += self.scale(q) * self.spec.dual_divergence(&theta, &anchor)?;
        }
        Ok(total)
    }

    /// Objective value and gradient with respect to `w` and each `β_i`.
    pub fn value_and_gradient(&self, w: &[f64], beta: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        self.check_params(w, beta)?;
        let mut value = 0.5 * self.c * dot(w, w);
        let mut grad_w: Vec<f64> = w.iter().map(|v| self.c * v).collect();
        let mut grad_beta = Vec::with_capacity(beta.len());
        for (q, &b) in self.queries.iter().zip(beta) {
            let scale = self.scale(q);
            let theta = linear_scores(q.features, w, b);
            value += scale * self.spec.divergence_to_dual(q.targets, &theta)?;
            let fitted = self.spec.backward_map(&theta)?;
            let resid: Vec<f64> = fitted.iter().zip(q.targets).map(|(f, r)| scale * (f - r)).collect();
            for (row, res) in q.features.rows().into_iter().zip(&resid) {
                for (g, a) in grad_w.iter_mut().zip(row) {
                    *g += res * a;
                }
            }
            grad_beta.push(resid.iter().sum());
        }
        Ok((value, grad_w, grad_beta))
    }

    pub fn gradient(&self, w: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, gw, gb) = self.value_and_gradient(w, beta)?;
        Ok((gw, gb))
    }
}

/// `A w + b 1`.
pub fn linear_scores(features: ArrayView2<'_, f64>, w: &[f64], offset: f64) -> Vec<f64> {
    let wv = ArrayView1::from(w);
    features.dot(&wv).iter().map(|v| v + offset).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Stop when the relative objective decrease of a step falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Fit the per-query offsets; when false they stay at their initial value.
    pub fit_offsets: bool,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-8, max_iter: 500, fit_offsets: true, memory: 10 }
    }
}

/// Result of [`fit`]; `grad_norm` certifies stationarity.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub w: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Minimizes the objective from `(w0, β0)` with limited-memory BFGS
/// directions and Armijo backtracking. Every accepted step decreases the
/// objective.
pub fn fit(problem: &GlmProblem<'_>, w0: &[f64], beta0: &[f64], opts: &FitOptions) -> Result<FitOutcome> {
    problem.check_params(w0, beta0)?;
    let n = w0.len();
    let nq = beta0.len();

    let split = |p: &[f64]| -> (Vec<f64>, Vec<f64>) {
        if opts.fit_offsets {
            (p[..n].to_vec(), p[n..].to_vec())
        } else {
            (p.to_vec(), beta0.to_vec())
        }
    };
    let eval = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (w, b) = split(p);
        let (v, mut gw, gb) = problem.value_and_gradient(&w, &b)?;
        if opts.fit_offsets {
            gw.extend(gb);
        }
        Ok((v, gw))
    };

    let mut p: Vec<f64> = w0.to_vec();
    if opts.fit_offsets {
        p.extend_from_slice(beta0);
    }
    let (mut f, mut g) = eval(&p)?;
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let dim = p.len();
    let _ = nq;

    while iterations < opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= 1e-14 * (1.0 + f.abs()) || dim == 0 {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir = lbfgs_direction(&g, &history);
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut alpha = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = p.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect();
            let (fc, gc) = eval(&cand)?;
            if fc.is_finite() && fc <= f + 1e-4 * alpha * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((np, nf, ng)) = accepted else {
            // No representable decrease along a descent direction.
            converged = true;
            break;
        };

        let s: Vec<f64> = np.iter().zip(&p).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == opts.memory.max(1) {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        let decrease = f - nf;
        p = np;
        f = nf;
        g = ng;
        if decrease <= opts.tol * f.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let (w, beta) = split(&p);
    let outcome = FitOutcome { w, beta, objective: f, grad_norm: norm(&g), iterations };
    if converged {
        Ok(outcome)
    } else {
        Err(Error::no_convergence(NoConvergence::Fit(outcome)))
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn lbfgs_direction(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-feature range of the training features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureNorm {
    pub fn from_matrices<'a>(n: usize, matrices: impl IntoIterator<Item = &'a Array2<f64>>) -> Self {
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for m in matrices {
            for row in m.rows() {
                for (j, &v) in row.iter().enumerate() {
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
        }
        for j in 0..n {
            if min[j] > max[j] {
                min[j] = 0.0;
                max[j] = 0.0;
            }
        }
        FeatureNorm { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }
}

/// A trained linear scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub divergence: DivergenceSpec,
    pub w: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub feature_norm: FeatureNorm,
    #[serde(rename = "normalized_flag")]
    pub normalized: bool,
    /// `mr` or `baseline=simplified`.
    #[serde(default = "default_trainer")]
    pub trainer: String,
    #[serde(skip)]
    pub trained_offsets: Option<Vec<f64>>,
}

fn default_trainer() -> String {
    "mr".to_string()
}

impl Model {
    pub fn num_features(&self) -> usize {
        self.w.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        model.divergence.validate()?;
        Error::check_len(model.w.len(), model.feature_norm.min.len())?;
        Error::check_len(model.w.len(), model.feature_norm.max.len())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Scores `A w`; documents rank by descending score. No offset is applied.
pub fn predict(model: &Model, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Error::check_len(model.w.len(), features.ncols())?;
    Ok(linear_scores(features, &model.w, 0.0))
}
