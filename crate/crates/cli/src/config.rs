//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! are applied after the file, so they win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use monorank::isotonic::RetargetPath;
use monorank::letordata::SynthConfig;
use monorank::mrtrain::DEFAULT_C_GRID;
use monorank::{DivergenceKind, DivergenceSpec, TrainConfig, Trainer};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub trainer: Trainer,
    /// Explicit retarget path; otherwise the exact path for the divergence.
    pub retarget: Option<RetargetPath>,
    pub train_path: Option<PathBuf>,
    pub vali_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub cutoffs: Vec<usize>,
    pub grid: Vec<f64>,
    /// Min-max scale every feature within each query on load.
    pub query_norm: bool,
    /// Treat hitting `max_outer` as a failure.
    pub require_convergence: bool,
    /// Used by `train` when no training file is given.
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            trainer: Trainer::Mr,
            retarget: None,
            train_path: None,
            vali_path: None,
            test_path: None,
            out_dir: PathBuf::from("."),
            cutoffs: (1..=10).collect(),
            grid: DEFAULT_C_GRID.to_vec(),
            query_norm: false,
            require_convergence: false,
            synth: SynthConfig::default(),
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "divergence",
    "weights",
    "gi_shift",
    "C",
    "normalized",
    "retarget",
    "outer_tol",
    "max_outer",
    "fit_tol",
    "fit_max_iter",
    "fit_offsets",
    "fit_memory",
    "retarget_tol",
    "retarget_max_iter",
    "inner_tol",
    "inner_max_iter",
    "inner_initial_step",
    "inner_shrink",
    "inner_armijo",
    "seed",
    "trainer",
    "train",
    "vali",
    "test",
    "out_dir",
    "cutoffs",
    "grid",
    "query_norm",
    "require_convergence",
    "synth_queries",
    "synth_docs",
    "synth_features",
    "synth_levels",
    "synth_noise",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("bad value '{value}' for {key}: {e}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

impl RunConfig {
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), n + 1);
            };
            self.set(key.trim(), value.trim()).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "divergence" => {
                let kind: DivergenceKind = parse(key, value)?;
                t.divergence = DivergenceSpec { kind, ..t.divergence.clone() };
            }
            "weights" => {
                let w: Vec<f64> = parse_list(key, value)?;
                t.divergence.weights = (!w.is_empty()).then_some(w);
            }
            "gi_shift" => t.divergence.gi_shift = parse(key, value)?,
            "C" | "c" => t.c = parse(key, value)?,
            "normalized" => t.normalized = parse(key, value)?,
            "retarget" => self.retarget = Some(parse(key, value)?),
            "outer_tol" => t.outer_tol = parse(key, value)?,
            "max_outer" => t.max_outer = parse(key, value)?,
            "fit_tol" => t.fit.tol = parse(key, value)?,
            "fit_max_iter" => t.fit.max_iter = parse(key, value)?,
            "fit_offsets" => t.fit.fit_offsets = parse(key, value)?,
            "fit_memory" => t.fit.memory = parse(key, value)?,
            "retarget_tol" => t.retarget.tol = parse(key, value)?,
            "retarget_max_iter" => t.retarget.max_iter = parse(key, value)?,
            "inner_tol" => t.inner.tol = parse(key, value)?,
            "inner_max_iter" => t.inner.max_iter = parse(key, value)?,
            "inner_initial_step" => t.inner.initial_step = parse(key, value)?,
            "inner_shrink" => t.inner.shrink = parse(key, value)?,
            "inner_armijo" => t.inner.armijo = parse(key, value)?,
            "seed" => {
                t.seed = parse(key, value)?;
                self.synth.seed = t.seed;
            }
            "trainer" => {
                self.trainer = match value {
                    "mr" => Trainer::Mr,
                    "baseline" => Trainer::Baseline,
                    other => bail!("unknown trainer '{other}' (expected mr or baseline)"),
                }
            }
            "train" => self.train_path = Some(PathBuf::from(value)),
            "vali" => self.vali_path = Some(PathBuf::from(value)),
            "test" => self.test_path = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "cutoffs" => self.cutoffs = parse_list(key, value)?,
            "grid" => self.grid = parse_list(key, value)?,
            "query_norm" => self.query_norm = parse(key, value)?,
            "require_convergence" => self.require_convergence = parse(key, value)?,
            "synth_queries" => self.synth.n_queries = parse(key, value)?,
            "synth_docs" => self.synth.docs_per_query = parse(key, value)?,
            "synth_features" => self.synth.n_features = parse(key, value)?,
            "synth_levels" => self.synth.grade_levels = parse(key, value)?,
            "synth_noise" => self.synth.noise_sd = parse(key, value)?,
            other => bail!("unknown config key '{other}'; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// The training configuration with the retarget path resolved.
    pub fn resolved(&self) -> Result<TrainConfig> {
        let mut t = self.train.clone();
        t.retarget_path = self.retarget.unwrap_or_else(|| RetargetPath::default_for(t.divergence.kind));
        t.validate()?;
        if self.cutoffs.contains(&0) {
            bail!("metric cutoffs must be at least 1");
        }
        Ok(t)
    }
}
