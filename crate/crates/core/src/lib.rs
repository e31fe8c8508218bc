//! Learning to rank by monotone retargeting.
//!
//! A linear scorer is fitted to per-query target vectors under a Bregman
//! divergence, and the targets themselves are re-chosen, subject only to
//! respecting the training grades' order, in alternation with the fit.
//!
//! Module map:
//!
//! * [`divergence`]: the squared, KL (simplex) and shifted generalized
//!   I-divergences with their dual maps.
//! * [`ordercone`]: coordinates for the descending cone and simplex.
//! * [`isotonic`]: PAV and the retargeting solvers.
//! * [`projector`]: a Bregman row-action solver for linear inequalities.
//! * [`blockperm`]: tied-grade blocks and within-block permutations.
//! * [`glm`]: the regularized canonical-link model fit.
//! * [`mrtrain`]: the alternating trainer, baseline and C sweep.
//! * [`rankmetrics`]: NDCG, ERR, MAP, precision.
//! * [`letordata`]: LETOR files and synthetic data.

pub mod blockperm;
pub mod divergence;
pub mod error;
pub mod glm;
pub mod isotonic;
pub mod letordata;
pub mod mrtrain;
pub mod ordercone;
pub mod projector;
pub mod rankmetrics;

pub use blockperm::{block_sort, BlockPartition, BlockPermutation};
pub use divergence::{DivergenceKind, DivergenceSpec};
pub use error::{Error, NoConvergence, Result};
pub use glm::{predict, FeatureNorm, FitOptions, FitOutcome, Model};
pub use isotonic::{pav_descending, RetargetPath, RetargetResult};
pub use letordata::{parse_letor, Dataset, QuerySet, SynthConfig};
pub use mrtrain::{train_baseline, train_mr, TrainConfig, TrainTrace, Trainer};
pub use ordercone::{ConeBasis, ConeKind};
pub use projector::{bregman_solve, LinearSystem, SolverOptions, SolverState, UpdateMode};
pub use rankmetrics::{MetricReport, RankedQuery};
