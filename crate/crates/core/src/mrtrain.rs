//! Monotone-retargeting trainer, the fixed-target baseline and the
//! regularization sweep.
//!
//! Each query is laid out in positions (see [`crate::blockperm`]) and keeps
//! a descending target vector `r_i`, a within-block permutation `P_i` of its
//! rows and an offset `β_i`. One outer iteration runs
//!
//! 1. retarget: `r_i ← argmin_{r descending} D_φ(r ‖ ∇ψ(P_i A_i w + β_i))`,
//! 2. permute: `P_i ← block_sort(r_i, scores)`,
//! 3. refit: `(w, β) ← fit(...)`, warm-started,
//!
//! and none of the three can increase the objective.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::blockperm::{block_sort, BlockPermutation};
use crate::divergence::{DivergenceKind, DivergenceSpec};
use crate::error::{Error, NoConvergence, Result};
use crate::glm::{self, FeatureNorm, FitOptions, GlmProblem, Model, QueryProblem, MODEL_FORMAT_VERSION};
use crate::isotonic::{
    retarget_dualmap, retarget_inner, retarget_squared_simplex, InnerOptions, RetargetOptions, RetargetPath,
    RetargetResult,
};
use crate::letordata::Dataset;
use crate::ordercone::ConeBasis;
use crate::rankmetrics::{evaluate, MetricReport, RankedQuery, DEFAULT_REL_THRESHOLD};

/// Regularization grid used by the sweep when none is given.
pub const DEFAULT_C_GRID: [f64; 6] = [1e-50, 1e-20, 1e-10, 1e-5, 1.0, 10.0];

/// Inner-solver budget per query and outer iteration. The solver is warm
/// started and guarded, so a partial solve still makes progress.
pub const MR_INNER_MAX_ITER: usize = 100;

pub const BASELINE_LABEL: &str = "baseline=simplified";
pub const MR_LABEL: &str = "mr";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub divergence: DivergenceSpec,
    pub c: f64,
    /// Scale each query's loss by `1/d_i`.
    pub normalized: bool,
    pub retarget_path: RetargetPath,
    /// Relative objective decrease that ends the outer loop.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub fit: FitOptions,
    pub retarget: RetargetOptions,
    pub inner: InnerOptions,
    /// Seed for anything randomized around training (synthetic data in the
    /// CLI). The trainer itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::new(DivergenceSpec::kl())
    }
}

impl TrainConfig {
    pub fn new(divergence: DivergenceSpec) -> Self {
        let retarget_path = RetargetPath::default_for(divergence.kind);
        TrainConfig {
            divergence,
            c: 1e-5,
            normalized: false,
            retarget_path,
            outer_tol: 1e-6,
            max_outer: 200,
            fit: FitOptions::default(),
            retarget: RetargetOptions::default(),
            inner: InnerOptions { max_iter: MR_INNER_MAX_ITER, ..InnerOptions::default() },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.divergence.validate()?;
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be nonnegative, got {}", self.c)));
        }
        for (name, v) in [
            ("outer_tol", self.outer_tol),
            ("fit tol", self.fit.tol),
            ("retarget tol", self.retarget.tol),
            ("inner tol", self.inner.tol),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
        }
        if !self.retarget_path.supports(self.divergence.kind) {
            return Err(Error::InvalidConfig(format!(
                "retarget path '{}' does not apply to the {} divergence",
                self.retarget_path, self.divergence.kind
            )));
        }
        Ok(())
    }
}

/// One outer iteration. Objectives are totals after each sub-step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub retarget_obj: f64,
    #[serde(skip)]
    pub permute_obj: f64,
    pub perm_changes: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    /// Objective after the initial fit, before the first outer iteration.
    pub initial_objective: f64,
    pub iterations: Vec<TraceRow>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// Objective after every sub-step, starting with the initial fit.
    pub fn substep_objectives(&self) -> Vec<f64> {
        let mut out = vec![self.initial_objective];
        for r in &self.iterations {
            out.extend([r.retarget_obj, r.permute_obj, r.objective]);
        }
        out
    }

    /// `iter,objective,retarget_obj,perm_changes,seconds`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.iterations.is_empty() {
            w.write_record(["iter", "objective", "retarget_obj", "perm_changes", "seconds"])?;
        }
        for row in &self.iterations {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gain-normalized targets `(2^g − 1) / Σ (2^g − 1)` for grades listed in
/// layout order; uniform when every grade is zero.
pub fn gain_targets(grades: &[u32]) -> Vec<f64> {
    let gains: Vec<f64> = grades.iter().map(|&g| 2f64.powi(g as i32) - 1.0).collect();
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / grades.len() as f64; grades.len()]
    }
}

/// Gain targets placed in the target set of the divergence.
fn initial_targets(spec: &DivergenceSpec, grades: &[u32]) -> Vec<f64> {
    let t = gain_targets(grades);
    match spec.kind {
        DivergenceKind::ShiftedGI => t.iter().map(|v| spec.gi_shift + v).collect(),
        _ => t,
    }
}

/// Smallest warm-start coordinate handed to the inner solver.
const WARM_FLOOR: f64 = 1e-12;

/// Mutable training state; exposed so callers can drive single sub-steps.
pub struct MrState<'a> {
    config: &'a TrainConfig,
    data: &'a Dataset,
    /// Rows at positions under the current permutation.
    features: Vec<Array2<f64>>,
    perms: Vec<BlockPermutation>,
    targets: Vec<Vec<f64>>,
    coords: Vec<Option<Vec<f64>>>,
    w: Vec<f64>,
    beta: Vec<f64>,
}

impl<'a> MrState<'a> {
    /// Grade-derived targets, identity permutations and `w = 0`, `β = 0`.
    pub fn new(config: &'a TrainConfig, data: &'a Dataset) -> Result<Self> {
        config.validate()?;
        if data.queries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(data.queries.len());
        let mut targets = Vec::with_capacity(data.queries.len());
        for q in &data.queries {
            let layout = q.blocks.layout();
            features.push(q.features.select(ndarray::Axis(0), &layout));
            let grades: Vec<u32> = layout.iter().map(|&i| q.grades[i]).collect();
            targets.push(initial_targets(&config.divergence, &grades));
        }
        let perms = features.iter().map(|f| BlockPermutation::identity(f.nrows())).collect();
        let coords = vec![None; data.queries.len()];
        Ok(MrState {
            config,
            data,
            features,
            perms,
            targets,
            coords,
            w: vec![0.0; data.feature_dim],
            beta: vec![0.0; data.queries.len()],
        })
    }

    /// Replaces `(w, β)`, e.g. to continue from an earlier model.
    pub fn set_parameters(&mut self, w: &[f64], beta: &[f64]) -> Result<()> {
        Error::check_len(self.w.len(), w.len())?;
        Error::check_len(self.beta.len(), beta.len())?;
        self.w = w.to_vec();
        self.beta = beta.to_vec();
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn offsets(&self) -> &[f64] {
        &self.beta
    }

    /// Targets by position.
    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn permutations(&self) -> &[BlockPermutation] {
        &self.perms
    }

    fn problem_queries(&self) -> Vec<QueryProblem<'_>> {
        self.features
            .iter()
            .zip(&self.targets)
            .map(|(f, r)| QueryProblem { features: f.view(), targets: r })
            .collect()
    }

    pub fn objective(&self) -> Result<f64> {
        let qs = self.problem_queries();
        let problem = GlmProblem::new(&qs, &self.config.divergence, self.config.c, self.config.normalized)?;
        problem.objective(&self.w, &self.beta)
    }

    fn scores(&self, q: usize) -> Vec<f64> {
        glm::linear_scores(self.features[q].view(), &self.w, self.beta[q])
    }

    fn query_loss(&self, r: &[f64], scores: &[f64]) -> Result<f64> {
        self.config.divergence.divergence_to_dual(r, scores)
    }

    /// Update (a). A candidate is kept only if it does not raise the
    /// query's loss, which matters for the approximate inner path.
    pub fn retarget(&mut self) -> Result<f64> {
        for q in 0..self.features.len() {
            let scores = self.scores(q);
            let current = self.query_loss(&self.targets[q], &scores)?;
            let candidate = self.retarget_query(q, &scores)?;
            if candidate.objective <= current {
                self.targets[q] = candidate.r;
                if candidate.x.is_some() {
                    self.coords[q] = candidate.x;
                }
            }
        }
        self.objective()
    }

    fn retarget_query(&self, q: usize, scores: &[f64]) -> Result<RetargetResult> {
        let spec = &self.config.divergence;
        let outcome = match self.config.retarget_path {
            RetargetPath::DualMap => retarget_dualmap(spec, scores),
            RetargetPath::SquaredSimplex => retarget_squared_simplex(spec, scores, self.config.retarget),
            RetargetPath::Inner => {
                let opts = InnerOptions { warm_start: Some(self.warm_start(q)?), ..self.config.inner.clone() };
                retarget_inner(spec, scores, &opts)
            }
        };
        match outcome {
            Err(Error::NoConvergence(partial)) => match *partial {
                NoConvergence::Retarget(r) => Ok(r),
                other => Err(Error::NoConvergence(Box::new(other))),
            },
            other => other,
        }
    }

    fn warm_start(&self, q: usize) -> Result<Vec<f64>> {
        let raw = match &self.coords[q] {
            Some(x) => x.clone(),
            None => {
                let r = &self.targets[q];
                let d = r.len();
                if self.config.divergence.kind == DivergenceKind::ShiftedGI {
                    let shifted: Vec<f64> = r.iter().map(|v| v - self.config.divergence.gi_shift).collect();
                    ConeBasis::general(d).coords(&shifted)?
                } else {
                    ConeBasis::simplex(d).coords(r)?
                }
            }
        };
        Ok(raw.into_iter().map(|v| v.max(WARM_FLOOR)).collect())
    }

    /// Update (b). Returns the number of rows that moved and the objective.
    pub fn permute(&mut self) -> Result<(usize, f64)> {
        let uniform = self.config.divergence.weights.as_ref().is_none_or(|w| w.iter().all(|&v| v == w[0]));
        let mut changes = 0;
        for q in 0..self.features.len() {
            let scores = self.scores(q);
            let step = block_sort(&self.targets[q], &scores, &self.data.queries[q].blocks)?;
            if step.is_identity() {
                continue;
            }
            // Sorting is optimal for uniform weights; with positional
            // weights it can lose, and then the old layout stays.
            let accept = uniform || {
                let before = self.query_loss(&self.targets[q], &scores)?;
                let after = self.query_loss(&self.targets[q], &step.apply(&scores)?)?;
                after <= before
            };
            if accept {
                let moved = step.apply_rows(&self.features[q])?;
                changes += step.changes_from(&BlockPermutation::identity(step.len()));
                let composed = step.apply(self.perms[q].as_slice())?;
                self.perms[q] = BlockPermutation::new(composed, &self.data.queries[q].blocks)?;
                self.features[q] = moved;
            }
        }
        Ok((changes, self.objective()?))
    }

    /// Update (c), warm-started from the current `(w, β)`.
    pub fn refit(&mut self) -> Result<f64> {
        let before = self.objective()?;
        let outcome = {
            let qs = self.problem_queries();
            let problem = GlmProblem::new(&qs, &self.config.divergence, self.config.c, self.config.normalized)?;
            match glm::fit(&problem, &self.w, &self.beta, &self.config.fit) {
                Ok(o) => o,
                Err(Error::NoConvergence(partial)) => match *partial {
                    NoConvergence::Fit(o) => o,
                    other => return Err(Error::NoConvergence(Box::new(other))),
                },
                Err(e) => return Err(e),
            }
        };
        if outcome.objective <= before {
            self.w = outcome.w;
            self.beta = outcome.beta;
            Ok(outcome.objective)
        } else {
            Ok(before)
        }
    }

    /// One outer iteration (a), (b), (c).
    pub fn step(&mut self, iter: usize) -> Result<TraceRow> {
        let start = Instant::now();
        let retarget_obj = self.retarget()?;
        let (perm_changes, permute_obj) = self.permute()?;
        let objective = self.refit()?;
        Ok(TraceRow { iter, objective, retarget_obj, permute_obj, perm_changes, seconds: start.elapsed().as_secs_f64() })
    }

    pub fn into_model(self, trainer: &str) -> Model {
        Model {
            format_version: MODEL_FORMAT_VERSION,
            divergence: self.config.divergence.clone(),
            w: self.w,
            c: self.config.c,
            feature_norm: FeatureNorm::from_matrices(
                self.data.feature_dim,
                self.data.queries.iter().map(|q| &q.features),
            ),
            normalized: self.config.normalized,
            trainer: trainer.to_string(),
            trained_offsets: Some(self.beta),
        }
    }
}

fn relative_decrease_small(prev: f64, next: f64, tol: f64) -> bool {
    prev - next <= tol * prev.abs()
}

/// Monotone retargeting. On hitting `max_outer` the error carries the
/// model and trace of the last iterate, which is also the best one.
pub fn train_mr(config: &TrainConfig, data: &Dataset) -> Result<(Model, TrainTrace)> {
    let mut state = MrState::new(config, data)?;
    let initial_objective = state.refit()?;
    let mut trace = TrainTrace { initial_objective, iterations: Vec::new(), converged: false };
    let mut prev = initial_objective;
    for iter in 1..=config.max_outer {
        let row = state.step(iter)?;
        let next = row.objective;
        trace.iterations.push(row);
        if relative_decrease_small(prev, next, config.outer_tol) {
            trace.converged = true;
            break;
        }
        prev = next;
    }
    let model = state.into_model(MR_LABEL);
    if trace.converged {
        Ok((model, trace))
    } else {
        Err(Error::no_convergence(NoConvergence::Train { model, trace }))
    }
}

/// Single fit to the fixed gain-normalized targets.
pub fn train_baseline(config: &TrainConfig, data: &Dataset) -> Result<(Model, TrainTrace)> {
    let mut state = MrState::new(config, data)?;
    let start = Instant::now();
    let before = state.objective()?;
    let objective = state.refit()?;
    let row = TraceRow {
        iter: 1,
        objective,
        retarget_obj: before,
        permute_obj: before,
        perm_changes: 0,
        seconds: start.elapsed().as_secs_f64(),
    };
    let trace = TrainTrace { initial_objective: before, iterations: vec![row], converged: true };
    Ok((state.into_model(BASELINE_LABEL), trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trainer {
    Mr,
    Baseline,
}

impl Trainer {
    /// Trains and accepts a run that hit its outer iteration cap; the flag
    /// reports whether it converged.
    pub fn train_lenient(self, config: &TrainConfig, data: &Dataset) -> Result<(Model, TrainTrace)> {
        let result = match self {
            Trainer::Mr => train_mr(config, data),
            Trainer::Baseline => train_baseline(config, data),
        };
        match result {
            Err(Error::NoConvergence(partial)) => match *partial {
                NoConvergence::Train { model, trace } => Ok((model, trace)),
                other => Err(Error::NoConvergence(Box::new(other))),
            },
            other => other,
        }
    }
}

/// Scores a dataset with a model and averages the metrics. Datasets with
/// fewer features than the model are zero-padded.
pub fn evaluate_model(model: &Model, data: &Dataset, cutoffs: &[usize]) -> Result<MetricReport> {
    let padded;
    let data = if data.feature_dim < model.num_features() {
        padded = data.pad_features(model.num_features())?;
        &padded
    } else {
        data
    };
    let scores: Vec<Vec<f64>> =
        data.queries.iter().map(|q| glm::predict(model, q.features.view())).collect::<Result<_>>()?;
    let ranked: Vec<RankedQuery<'_>> = data
        .queries
        .iter()
        .zip(&scores)
        .map(|(q, s)| RankedQuery::new(&q.grades, s, data.gmax))
        .collect();
    Ok(evaluate(&ranked, cutoffs, DEFAULT_REL_THRESHOLD))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "C")]
    pub c: f64,
    pub vali_map: f64,
    pub objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub best: usize,
    pub model: Model,
    pub trace: TrainTrace,
}

impl SweepOutcome {
    /// `C,vali_map,objective,outer_iterations,converged`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Highest validation MAP; among equal values the smallest C.
pub fn select_best(rows: &[SweepRow]) -> Option<usize> {
    (0..rows.len()).reduce(|best, i| {
        let (a, b) = (&rows[best], &rows[i]);
        if b.vali_map > a.vali_map || (b.vali_map == a.vali_map && b.c < a.c) {
            i
        } else {
            best
        }
    })
}

/// Trains one model per grid value (concurrently) and keeps the one with
/// the best validation MAP.
pub fn sweep(
    config: &TrainConfig,
    grid: &[f64],
    trainer: Trainer,
    train: &Dataset,
    vali: &Dataset,
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("the C grid is empty".into()));
    }
    let runs: Vec<(Model, TrainTrace, f64)> = grid
        .par_iter()
        .map(|&c| {
            let cfg = TrainConfig { c, ..config.clone() };
            let (model, trace) = trainer.train_lenient(&cfg, train)?;
            let map = evaluate_model(&model, vali, &[])?.map;
            Ok((model, trace, map))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .zip(&runs)
        .map(|(&c, (_, trace, map))| SweepRow {
            c,
            vali_map: *map,
            objective: trace.final_objective(),
            outer_iterations: trace.iterations.len(),
            converged: trace.converged,
        })
        .collect();
    let best = select_best(&rows).expect("nonempty grid");
    let (model, trace, _) = runs.into_iter().nth(best).expect("index in range");
    Ok(SweepOutcome { rows, best, model, trace })
}
