//! Weighted identically separable (WIS) Bregman divergences.
//!
//! Every divergence here is generated by a potential of the form
//! `φ(x) = Σ_i w_i f(x_i)` for one scalar convex `f`:
//!
//! | kind | `f(t)` | dom φ | `∇φ` | `∇ψ = (∇φ)⁻¹` |
//! |------|--------|-------|------|----------------|
//! | squared | `t²/2` | ℝᵈ | `w x` | `s / w` |
//! | KL | `t log t` | unit simplex | `c log x` | `softmax(s / c)` |
//! | shifted GI | `(t−1) log(t−1) − t` | `x ≥ 1` | `w log(x − 1)` | `1 + exp(s / w)` |
//!
//! ψ is the Legendre conjugate. All three conjugates have domain ℝᵈ, so any
//! real score vector is a valid dual point.
//!
//! The KL potential on the simplex only has a closed-form conjugate when
//! the weights are all equal (`c` above), so per-coordinate weights are
//! rejected for that kind. Its forward map drops the additive `+c` (a gauge
//! constant that softmax cancels).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ x = 1` for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Offset above the GI boundary used before taking logarithms.
pub const GI_BOUNDARY_CLAMP: f64 = 1e-12;
/// Largest exponent passed to `exp`.
const MAX_EXP: f64 = 709.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceKind {
    #[serde(rename = "squared")]
    SquaredEuclidean,
    #[serde(rename = "kl")]
    KLSimplex,
    #[serde(rename = "gi")]
    ShiftedGI,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 3] = [
        DivergenceKind::SquaredEuclidean,
        DivergenceKind::KLSimplex,
        DivergenceKind::ShiftedGI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceKind::SquaredEuclidean => "squared",
            DivergenceKind::KLSimplex => "kl",
            DivergenceKind::ShiftedGI => "gi",
        }
    }
}

impl std::fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" | "sq" => Ok(DivergenceKind::SquaredEuclidean),
            "kl" => Ok(DivergenceKind::KLSimplex),
            "gi" | "idiv" | "i-div" => Ok(DivergenceKind::ShiftedGI),
            other => Err(Error::InvalidSpec(format!("unknown divergence '{other}'"))),
        }
    }
}

/// A member of the WIS family together with its weights.
///
/// `weights == None` means unit weights. Explicit weights are positional:
/// coordinate `i` of any vector uses `weights[i]`, so the vector must be at
/// least as long as the longest input it is applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub weights: Option<Vec<f64>>,
    pub gi_shift: f64,
}

impl DivergenceSpec {
    pub fn new(kind: DivergenceKind) -> Self {
        DivergenceSpec { kind, weights: None, gi_shift: 1.0 }
    }

    pub fn squared() -> Self {
        Self::new(DivergenceKind::SquaredEuclidean)
    }

    pub fn kl() -> Self {
        Self::new(DivergenceKind::KLSimplex)
    }

    pub fn gi() -> Self {
        Self::new(DivergenceKind::ShiftedGI)
    }

    pub fn with_weights(kind: DivergenceKind, weights: Vec<f64>) -> Result<Self> {
        let spec = DivergenceSpec { kind, weights: Some(weights), gi_shift: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gi_shift.is_finite()) {
            return Err(Error::InvalidSpec("gi_shift must be finite".into()));
        }
        if let Some(w) = &self.weights {
            if w.is_empty() {
                return Err(Error::InvalidSpec("weight vector is empty".into()));
            }
            if let Some(bad) = w.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidSpec(format!("weights must be positive, got {bad}")));
            }
            if self.kind == DivergenceKind::KLSimplex && w.iter().any(|&v| v != w[0]) {
                return Err(Error::InvalidSpec(
                    "the KL simplex divergence only supports uniform weights".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.weights.is_none()
    }

    /// Weight of coordinate `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            None => 1.0,
            Some(w) => w[i],
        }
    }

    /// Weights for a vector of length `d`.
    pub fn weights_for(&self, d: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0; d]),
            Some(w) if w.len() >= d => Ok(w[..d].to_vec()),
            Some(w) => Err(Error::DimensionMismatch { expected: d, found: w.len() }),
        }
    }

    fn check_weights(&self, d: usize) -> Result<()> {
        match &self.weights {
            Some(w) if w.len() < d => Err(Error::DimensionMismatch { expected: d, found: w.len() }),
            _ => Ok(()),
        }
    }

    /// The scale `c` of the KL potential `c Σ x log x`.
    fn kl_scale(&self) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[0])
    }

    /// Checks `x ∈ dom φ` (closed domain).
    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.check_weights(x.len())?;
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::DomainViolation(format!("non-finite entry {bad}")));
        }
        match self.kind {
            DivergenceKind::SquaredEuclidean => Ok(()),
            DivergenceKind::KLSimplex => check_simplex(x, false),
            DivergenceKind::ShiftedGI => {
                match x.iter().find(|&&v| v < self.gi_shift) {
                    Some(bad) => Err(Error::DomainViolation(format!(
                        "entry {bad} below the GI shift {}",
                        self.gi_shift
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Checks `y ∈ int(dom φ)`.
    pub fn check_interior(&self, y: &[f64]) -> Result<()> {
        self.check_weights(y.len())?;
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::DomainViolation(format!("non-finite entry {bad}")));
        }
        match self.kind {
            DivergenceKind::SquaredEuclidean => Ok(()),
            DivergenceKind::KLSimplex => check_simplex(y, true),
            DivergenceKind::ShiftedGI => match y.iter().find(|&&v| v <= self.gi_shift) {
                Some(bad) => Err(Error::DomainViolation(format!(
                    "entry {bad} not strictly above the GI shift {}",
                    self.gi_shift
                ))),
                None => Ok(()),
            },
        }
    }

    /// `φ(x) = Σ w_i f(x_i)`, with `0 log 0 = 0`.
    pub fn phi(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self.kind {
            DivergenceKind::SquaredEuclidean => {
                x.iter().enumerate().map(|(i, &v)| 0.5 * self.weight(i) * v * v).sum()
            }
            DivergenceKind::KLSimplex => self.kl_scale() * x.iter().map(|&v| xlogx(v)).sum::<f64>(),
            DivergenceKind::ShiftedGI => x
                .iter()
                .enumerate()
                .map(|(i, &v)| self.weight(i) * (xlogx(v - self.gi_shift) - v))
                .sum(),
        })
    }

    /// The Legendre conjugate `ψ(s) = sup_x ⟨s, x⟩ − φ(x)`.
    pub fn psi(&self, s: &[f64]) -> Result<f64> {
        self.check_weights(s.len())?;
        Ok(match self.kind {
            DivergenceKind::SquaredEuclidean => s
                .iter()
                .enumerate()
                .map(|(i, &v)| 0.5 * v * v / self.weight(i))
                .sum(),
            DivergenceKind::KLSimplex => {
                let c = self.kl_scale();
                let u: Vec<f64> = s.iter().map(|v| v / c).collect();
                c * log_sum_exp(&u)
            }
            DivergenceKind::ShiftedGI => {
                let g = self.gi_shift;
                s.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let w = self.weight(i);
                        v * g + w * g + w * clamped_exp(v / w)
                    })
                    .sum()
            }
        })
    }

    /// `∇φ(x)`, mapping an interior primal point to dual coordinates.
    pub fn forward_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_interior(x)?;
        Ok(match self.kind {
            DivergenceKind::SquaredEuclidean => {
                x.iter().enumerate().map(|(i, &v)| self.weight(i) * v).collect()
            }
            DivergenceKind::KLSimplex => {
                let c = self.kl_scale();
                x.iter().map(|&v| c * v.ln()).collect()
            }
            DivergenceKind::ShiftedGI => x
                .iter()
                .enumerate()
                .map(|(i, &v)| self.weight(i) * self.gi_log(v))
                .collect(),
        })
    }

    /// `∇ψ(s) = (∇φ)⁻¹(s)`; the output always lies in dom φ.
    pub fn backward_map(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_weights(s.len())?;
        Ok(match self.kind {
            DivergenceKind::SquaredEuclidean => {
                s.iter().enumerate().map(|(i, &v)| v / self.weight(i)).collect()
            }
            DivergenceKind::KLSimplex => {
                let c = self.kl_scale();
                let u: Vec<f64> = s.iter().map(|v| v / c).collect();
                softmax(&u)
            }
            DivergenceKind::ShiftedGI => s
                .iter()
                .enumerate()
                .map(|(i, &v)| self.gi_shift + clamped_exp(v / self.weight(i)))
                .collect(),
        })
    }

    /// `D_φ(x ‖ y)` from the closed forms, for `x ∈ dom φ`, `y ∈ int(dom φ)`.
    pub fn divergence(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Error::check_len(x.len(), y.len())?;
        self.check_domain(x)?;
        self.check_interior(y)?;
        let d = match self.kind {
            DivergenceKind::SquaredEuclidean => x
                .iter()
                .zip(y)
                .enumerate()
                .map(|(i, (&a, &b))| 0.5 * self.weight(i) * (a - b) * (a - b))
                .sum(),
            DivergenceKind::KLSimplex => {
                let c = self.kl_scale();
                c * x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| if a <= 0.0 { 0.0 } else { a * (a / b).ln() })
                    .sum::<f64>()
            }
            DivergenceKind::ShiftedGI => {
                let g = self.gi_shift;
                x.iter()
                    .zip(y)
                    .enumerate()
                    .map(|(i, (&a, &b))| {
                        let (p, q) = (a - g, (b - g).max(GI_BOUNDARY_CLAMP));
                        let log_term = if p <= 0.0 { 0.0 } else { p * (p / q).ln() };
                        self.weight(i) * (log_term - a + b)
                    })
                    .sum()
            }
        };
        Ok(d.max(0.0))
    }

    /// `D_φ(x ‖ ∇ψ(θ))` evaluated without leaving dual coordinates for `θ`.
    ///
    /// Equal to the Fenchel-Young gap `φ(x) + ψ(θ) − ⟨x, θ⟩`, but arranged so
    /// large `|θ|` does not round-trip through `exp` and `log`.
    pub fn divergence_to_dual(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        Error::check_len(x.len(), theta.len())?;
        self.check_domain(x)?;
        let d = match self.kind {
            DivergenceKind::SquaredEuclidean => x
                .iter()
                .zip(theta)
                .enumerate()
                .map(|(i, (&a, &t))| {
                    let w = self.weight(i);
                    let diff = a - t / w;
                    0.5 * w * diff * diff
                })
                .sum(),
            DivergenceKind::KLSimplex => {
                let c = self.kl_scale();
                let u: Vec<f64> = theta.iter().map(|t| t / c).collect();
                let lse = log_sum_exp(&u);
                c * x
                    .iter()
                    .zip(&u)
                    .map(|(&a, &ui)| if a <= 0.0 { 0.0 } else { a * (a.ln() - ui + lse) })
                    .sum::<f64>()
            }
            DivergenceKind::ShiftedGI => {
                let g = self.gi_shift;
                x.iter()
                    .zip(theta)
                    .enumerate()
                    .map(|(i, (&a, &t))| {
                        let w = self.weight(i);
                        let u = t / w;
                        let p = a - g;
                        let log_term = if p <= 0.0 { 0.0 } else { p * (p.ln() - u) };
                        w * (log_term - p + clamped_exp(u))
                    })
                    .sum()
            }
        };
        Ok(d.max(0.0))
    }

    /// `D_ψ(a ‖ b) = ψ(a) − ψ(b) − ⟨∇ψ(b), a − b⟩` on dual points.
    pub fn dual_divergence(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Error::check_len(a.len(), b.len())?;
        let grad = self.backward_map(b)?;
        let inner: f64 = grad.iter().zip(a.iter().zip(b)).map(|(g, (x, y))| g * (x - y)).sum();
        Ok(self.psi(a)? - self.psi(b)? - inner)
    }

    /// Fenchel-Young gap `φ(x) + ψ(s) − ⟨x, s⟩`.
    pub fn fenchel_young_gap(&self, x: &[f64], s: &[f64]) -> Result<f64> {
        Error::check_len(x.len(), s.len())?;
        Ok(self.phi(x)? + self.psi(s)? - dot(x, s))
    }

    fn gi_log(&self, v: f64) -> f64 {
        (v - self.gi_shift).max(GI_BOUNDARY_CLAMP).ln()
    }
}

fn check_simplex(x: &[f64], strict: bool) -> Result<()> {
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::DomainViolation(format!("entries sum to {sum}, not 1")));
    }
    let bad = if strict {
        x.iter().find(|&&v| v <= 0.0)
    } else {
        x.iter().find(|&&v| v < 0.0)
    };
    match bad {
        Some(v) => Err(Error::DomainViolation(format!("simplex entry {v} out of range"))),
        None => Ok(()),
    }
}

#[inline]
fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

#[inline]
pub(crate) fn clamped_exp(t: f64) -> f64 {
    t.min(MAX_EXP).exp()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted `log Σ exp(u_i)`.
pub fn log_sum_exp(u: &[f64]) -> f64 {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + u.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Max-shifted softmax.
pub fn softmax(u: &[f64]) -> Vec<f64> {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = u.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}
