//! LETOR text data, query-level normalization and synthetic data.
//!
//! One document per line: `<grade> qid:<id> <k>:<v> ... [#comment]`.
//! Feature indices are 1-based; indices that do not appear are zero.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blockperm::BlockPartition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySet {
    pub qid: String,
    /// `d × n` feature matrix, one row per document.
    pub features: Array2<f64>,
    pub grades: Vec<u32>,
    pub blocks: BlockPartition,
    pub doc_ids: Option<Vec<String>>,
}

impl QuerySet {
    pub fn new(qid: impl Into<String>, features: Array2<f64>, grades: Vec<u32>) -> Result<Self> {
        Error::check_len(features.nrows(), grades.len())?;
        let blocks = BlockPartition::from_grades(&grades)?;
        Ok(QuerySet { qid: qid.into(), features, grades, blocks, doc_ids: None })
    }

    pub fn with_doc_ids(mut self, ids: Vec<String>) -> Result<Self> {
        Error::check_len(self.grades.len(), ids.len())?;
        self.doc_ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub queries: Vec<QuerySet>,
    pub feature_dim: usize,
    pub gmax: u32,
}

impl Dataset {
    pub fn new(queries: Vec<QuerySet>) -> Result<Self> {
        let first = queries.first().ok_or(Error::EmptyDataset)?;
        let feature_dim = first.features.ncols();
        for q in &queries {
            Error::check_len(feature_dim, q.features.ncols())?;
        }
        let gmax = queries.iter().flat_map(|q| q.grades.iter().copied()).max().unwrap_or(0);
        Ok(Dataset { queries, feature_dim, gmax })
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn num_documents(&self) -> usize {
        self.queries.iter().map(QuerySet::len).sum()
    }

    /// First `n` queries and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        let n = n.min(self.queries.len());
        let head = Dataset::new(self.queries[..n].to_vec())?;
        let tail = Dataset::new(self.queries[n..].to_vec())?;
        Ok((head, tail))
    }

    /// Zero-pads every feature matrix to `n` columns. Fails if any query
    /// already has more.
    pub fn pad_features(&self, n: usize) -> Result<Dataset> {
        if n < self.feature_dim {
            return Err(Error::DimensionMismatch { expected: n, found: self.feature_dim });
        }
        let queries = self
            .queries
            .iter()
            .map(|q| {
                let mut f = Array2::zeros((q.len(), n));
                f.slice_mut(ndarray::s![.., ..self.feature_dim]).assign(&q.features);
                QuerySet { features: f, ..q.clone() }
            })
            .collect();
        Ok(Dataset { queries, feature_dim: n, gmax: self.gmax })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        parse_letor(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_letor(self, &mut out)?;
        out.flush()?;
        Ok(())
    }
}

struct RawDoc {
    grade: u32,
    features: Vec<(usize, f64)>,
    comment: Option<String>,
}

/// Reads a LETOR file. Documents are grouped by qid in order of first
/// appearance; the feature dimension is the largest index seen.
pub fn parse_letor(reader: impl BufRead) -> Result<Dataset> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RawDoc>> = HashMap::new();
    let mut dim = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let (body, comment) = match line.split_once('#') {
            Some((b, c)) => (b, Some(c.trim().to_string())),
            None => (line.as_str(), None),
        };
        let mut tokens = body.split_whitespace();
        let Some(grade_tok) = tokens.next() else {
            continue;
        };
        let perr = |message: String| Error::Parse { line: lineno, message };
        let grade: u32 = grade_tok.parse().map_err(|_| perr(format!("malformed grade '{grade_tok}'")))?;
        let qid = match tokens.next().and_then(|t| t.strip_prefix("qid:")) {
            Some(q) if !q.is_empty() => q.to_string(),
            _ => return Err(perr("missing qid:<id> token".into())),
        };
        let mut features = Vec::new();
        for tok in tokens {
            let (k, v) = tok.split_once(':').ok_or_else(|| perr(format!("malformed feature '{tok}'")))?;
            let k: usize = k.parse().map_err(|_| perr(format!("malformed feature index '{k}'")))?;
            if k == 0 {
                return Err(perr("feature indices start at 1".into()));
            }
            let v: f64 = v.parse().map_err(|_| perr(format!("malformed feature value '{v}'")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite feature value '{v}'")));
            }
            dim = dim.max(k);
            features.push((k - 1, v));
        }
        let comment = comment.filter(|c| !c.is_empty());
        groups
            .entry(qid.clone())
            .or_insert_with(|| {
                order.push(qid);
                Vec::new()
            })
            .push(RawDoc { grade, features, comment });
    }

    if order.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut queries = Vec::with_capacity(order.len());
    for qid in order {
        let docs = groups.remove(&qid).expect("grouped qid");
        let mut features = Array2::zeros((docs.len(), dim));
        for (row, doc) in docs.iter().enumerate() {
            for &(k, v) in &doc.features {
                features[[row, k]] = v;
            }
        }
        let grades = docs.iter().map(|d| d.grade).collect();
        let mut q = QuerySet::new(qid, features, grades)?;
        if docs.iter().any(|d| d.comment.is_some()) {
            q.doc_ids = Some(docs.into_iter().map(|d| d.comment.unwrap_or_default()).collect());
        }
        queries.push(q);
    }
    Dataset::new(queries)
}

pub fn parse_letor_str(text: &str) -> Result<Dataset> {
    parse_letor(text.as_bytes())
}

/// Writes every feature explicitly, with shortest round-trip float text.
pub fn write_letor(ds: &Dataset, mut out: impl Write) -> Result<()> {
    for q in &ds.queries {
        for (i, row) in q.features.rows().into_iter().enumerate() {
            write!(out, "{} qid:{}", q.grades[i], q.qid)?;
            for (k, v) in row.iter().enumerate() {
                write!(out, " {}:{}", k + 1, v)?;
            }
            match q.doc_ids.as_ref().map(|ids| ids[i].as_str()) {
                Some(id) if !id.is_empty() => writeln!(out, " #{id}")?,
                _ => writeln!(out)?,
            }
        }
    }
    Ok(())
}

/// Per-query, per-feature range used by [`normalize_query_level`].
#[derive(Clone, Debug, PartialEq)]
pub struct QueryNormStats {
    pub qid: String,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Min-max scales every feature column of every query to `[0, 1]`.
/// Constant columns become zero.
pub fn normalize_query_level(ds: &Dataset) -> (Dataset, Vec<QueryNormStats>) {
    let mut stats = Vec::with_capacity(ds.queries.len());
    let queries = ds
        .queries
        .iter()
        .map(|q| {
            let mut f = q.features.clone();
            let mut min = Vec::with_capacity(ds.feature_dim);
            let mut max = Vec::with_capacity(ds.feature_dim);
            for mut col in f.columns_mut() {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                col.mapv_inplace(|v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 });
                min.push(lo);
                max.push(hi);
            }
            stats.push(QueryNormStats { qid: q.qid.clone(), min, max });
            QuerySet { features: f, ..q.clone() }
        })
        .collect();
    (Dataset { queries, feature_dim: ds.feature_dim, gmax: ds.gmax }, stats)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_queries: usize,
    pub docs_per_query: usize,
    pub n_features: usize,
    pub grade_levels: u32,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_queries: 200,
            docs_per_query: 20,
            n_features: 10,
            grade_levels: 3,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// Random queries with a planted linear scorer.
///
/// Features are uniform on `[0, 1]`, `w*` is standard normal, and each
/// query's grades are the quantile buckets of `A w* + noise`. A query whose
/// noisy scores contain an exact tie is redrawn. Returns the dataset and
/// `w*`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Dataset, Vec<f64>)> {
    if cfg.n_queries == 0 || cfg.docs_per_query == 0 || cfg.n_features == 0 || cfg.grade_levels == 0 {
        return Err(Error::InvalidConfig("synthetic data needs positive counts".into()));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_sd must be nonnegative, got {}", cfg.noise_sd)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w: Vec<f64> = (0..cfg.n_features).map(|_| rng.sample(StandardNormal)).collect();
    let d = cfg.docs_per_query;
    let levels = cfg.grade_levels as usize;

    let mut queries = Vec::with_capacity(cfg.n_queries);
    for qi in 0..cfg.n_queries {
        let (features, scores) = loop {
            let features = Array2::from_shape_fn((d, cfg.n_features), |_| rng.random::<f64>());
            let scores: Vec<f64> = features
                .rows()
                .into_iter()
                .map(|row| {
                    let clean: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                    let noise: f64 = if cfg.noise_sd > 0.0 { rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                    clean + cfg.noise_sd * noise
                })
                .collect();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|p| p[0] < p[1]) {
                break (features, scores);
            }
        };
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut grades = vec![0u32; d];
        for (rank, &doc) in order.iter().enumerate() {
            grades[doc] = (rank * levels / d) as u32;
        }
        queries.push(QuerySet::new(format!("{}", qi + 1), features, grades)?);
    }
    let mut ds = Dataset::new(queries)?;
    ds.gmax = cfg.grade_levels - 1;
    Ok((ds, w))
}
