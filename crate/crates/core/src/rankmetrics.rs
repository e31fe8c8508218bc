//! Graded-relevance ranking metrics.
//!
//! Conventions: gain `2^g − 1`, discount `1 / log2(position + 1)`, a
//! document is relevant when its grade is at least the threshold (1 by
//! default). Documents are ranked by descending score; equal scores keep
//! input order.

use std::io::Write;

/// Default binarization threshold for MAP and P@N.
pub const DEFAULT_REL_THRESHOLD: u32 = 1;

#[derive(Clone, Copy, Debug)]
pub struct RankedQuery<'a> {
    /// Grades in original document order.
    pub grades: &'a [u32],
    pub scores: &'a [f64],
    pub gmax: u32,
}

impl<'a> RankedQuery<'a> {
    /// # Panics
    /// If `grades` and `scores` differ in length.
    pub fn new(grades: &'a [u32], scores: &'a [f64], gmax: u32) -> Self {
        assert_eq!(grades.len(), scores.len(), "grades and scores must have equal length");
        RankedQuery { grades, scores, gmax }
    }

    /// Grades listed in ranked order.
    pub fn ranked_grades(&self) -> Vec<u32> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx.into_iter().map(|i| self.grades[i]).collect()
    }
}

/// A per-query value with a flag for degenerate queries that aggregates
/// should skip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryMetric {
    pub value: f64,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gain {
    /// `2^g − 1`.
    #[default]
    Exponential,
    /// `g`.
    Linear,
}

impl Gain {
    pub fn apply(self, g: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(g as i32) - 1.0,
            Gain::Linear => g as f64,
        }
    }
}

fn dcg(grades: impl IntoIterator<Item = u32>, n: usize, gain: Gain) -> f64 {
    grades
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(pos, g)| gain.apply(g) / ((pos + 2) as f64).log2())
        .sum()
}

/// NDCG at cutoff `n`; `n = usize::MAX` gives the full-list value.
pub fn ndcg_at_with(q: &RankedQuery<'_>, n: usize, gain: Gain) -> QueryMetric {
    let mut ideal: Vec<u32> = q.grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(ideal, n, gain);
    if best <= 0.0 {
        return QueryMetric { value: 0.0, flagged: true };
    }
    QueryMetric { value: dcg(q.ranked_grades(), n, gain) / best, flagged: false }
}

pub fn ndcg_at(q: &RankedQuery<'_>, n: usize) -> QueryMetric {
    ndcg_at_with(q, n, Gain::Exponential)
}

pub fn ndcg(q: &RankedQuery<'_>) -> QueryMetric {
    ndcg_at(q, usize::MAX)
}

/// Expected reciprocal rank over the full list with
/// `R(g) = (2^g − 1) / 2^gmax`.
pub fn err(q: &RankedQuery<'_>) -> f64 {
    let denom = 2f64.powi(q.gmax.max(1) as i32);
    let mut survive = 1.0;
    let mut total = 0.0;
    for (pos, g) in q.ranked_grades().into_iter().enumerate() {
        let r = (2f64.powi(g as i32) - 1.0) / denom;
        total += survive * r / (pos + 1) as f64;
        survive *= 1.0 - r;
    }
    total
}

pub fn average_precision(q: &RankedQuery<'_>, rel_threshold: u32) -> QueryMetric {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, g) in q.ranked_grades().into_iter().enumerate() {
        if g >= rel_threshold {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        QueryMetric { value: 0.0, flagged: true }
    } else {
        QueryMetric { value: sum / hits as f64, flagged: false }
    }
}

/// Fraction of the top `n` that is relevant; the denominator is always `n`.
pub fn precision_at(q: &RankedQuery<'_>, n: usize, rel_threshold: u32) -> f64 {
    assert!(n >= 1, "precision cutoff must be at least 1");
    let hits = q.ranked_grades().into_iter().take(n).filter(|&g| g >= rel_threshold).count();
    hits as f64 / n as f64
}

/// Dataset-level averages.
///
/// NDCG and MAP skip flagged queries; ERR and P@N average over all queries.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub cutoffs: Vec<usize>,
    pub ndcg: Vec<f64>,
    pub precision: Vec<f64>,
    pub ndcg_full: f64,
    pub err: f64,
    pub map: f64,
    pub num_queries: usize,
    pub flagged_ndcg: usize,
    pub flagged_map: usize,
}

pub fn evaluate(queries: &[RankedQuery<'_>], cutoffs: &[usize], rel_threshold: u32) -> MetricReport {
    let mean_unflagged = |vals: &[QueryMetric]| -> (f64, usize) {
        let kept: Vec<f64> = vals.iter().filter(|m| !m.flagged).map(|m| m.value).collect();
        let flagged = vals.len() - kept.len();
        let mean = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
        (mean, flagged)
    };
    let mean = |vals: &[f64]| if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };

    let mut flagged_ndcg = 0;
    let ndcg_cut: Vec<f64> = cutoffs
        .iter()
        .map(|&n| {
            let vals: Vec<QueryMetric> = queries.iter().map(|q| ndcg_at(q, n)).collect();
            let (m, f) = mean_unflagged(&vals);
            flagged_ndcg = f;
            m
        })
        .collect();
    let full: Vec<QueryMetric> = queries.iter().map(ndcg).collect();
    let (ndcg_full, f) = mean_unflagged(&full);
    flagged_ndcg = flagged_ndcg.max(f);
    let precision = cutoffs
        .iter()
        .map(|&n| mean(&queries.iter().map(|q| precision_at(q, n, rel_threshold)).collect::<Vec<_>>()))
        .collect();
    let aps: Vec<QueryMetric> = queries.iter().map(|q| average_precision(q, rel_threshold)).collect();
    let (map, flagged_map) = mean_unflagged(&aps);
    let err_mean = mean(&queries.iter().map(err).collect::<Vec<_>>());

    MetricReport {
        cutoffs: cutoffs.to_vec(),
        ndcg: ndcg_cut,
        precision,
        ndcg_full,
        err: err_mean,
        map,
        num_queries: queries.len(),
        flagged_ndcg,
        flagged_map,
    }
}

impl MetricReport {
    /// `metric,cutoff,value` rows: NDCG and P per cutoff, then ERR and MAP
    /// with an empty cutoff.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "cutoff", "value"])?;
        for (n, v) in self.cutoffs.iter().zip(&self.ndcg) {
            w.write_record(["ndcg", &n.to_string(), &v.to_string()])?;
        }
        for (n, v) in self.cutoffs.iter().zip(&self.precision) {
            w.write_record(["precision", &n.to_string(), &v.to_string()])?;
        }
        w.write_record(["err", "", &self.err.to_string()])?;
        w.write_record(["map", "", &self.map.to_string()])?;
        w.flush()?;
        Ok(())
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.ndcg[i])
    }

    pub fn precision_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.precision[i])
    }
}
