//! The network as an element of the signature RKHS.
//!
//! In the continuous-time limit the readout of a feedforward network is
//! `ξ_α(X) = ⟨α, S(X̄)⟩` with `α_0 = ψ h_0` and
//! `α_k^{(i_1..i_k)} = ψ Proj(F^{i_1} ⋆ ⋯ ⋆ F^{i_k}(H̄_0)) / k!`,
//! `Proj` keeping the first `e` coordinates.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::math;
use crate::ode::CdeField;
use crate::path::{PathConfig, PiecewiseLinearPath};
use crate::rnn::RnnParams;
use crate::signature::{signature, Signature};
use crate::taylor::all_words;
use crate::tensor::{DenseTensor, GradedTensorSeq};
use crate::{Error, Result};

/// One truncated coefficient sequence per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSeries {
    channels: Vec<GradedTensorSeq>,
}

impl AlphaSeries {
    pub fn from_channels(channels: Vec<GradedTensorSeq>) -> Result<Self> {
        let first = channels.first().ok_or(Error::InvalidArgument("need at least one channel"))?;
        let (dim, depth) = (first.dim(), first.depth());
        if channels.iter().any(|c| c.dim() != dim || c.depth() != depth) {
            return Err(Error::ShapeMismatch("channels must share dimension and depth"));
        }
        Ok(AlphaSeries { channels })
    }

    pub fn channels(&self) -> &[GradedTensorSeq] {
        &self.channels
    }

    pub fn depth(&self) -> usize {
        self.channels[0].depth()
    }

    /// Alphabet size `d̄`.
    pub fn dim(&self) -> usize {
        self.channels[0].dim()
    }

    /// `(Σ_ℓ ‖α_ℓ‖²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        math::sqrt(self.channels.iter().map(|c| c.norm() * c.norm()).sum())
    }

    /// Channel-wise `⟨α_ℓ, S⟩` against a factorial-normalised signature.
    pub fn pair(&self, sig: &Signature) -> Result<Vec<f64>> {
        if sig.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: sig.dim() });
        }
        if sig.depth() < self.depth() {
            return Err(Error::OrderExhausted { needed: self.depth(), available: sig.depth() });
        }
        self.channels.iter().map(|c| c.inner(sig.seq())).collect()
    }
}

/// The coefficients of the network's RKHS representative, truncated at `depth`.
pub fn alpha_series(params: &RnnParams, config: PathConfig, depth: usize) -> Result<AlphaSeries> {
    let field = CdeField::new(params, config);
    let (e, d) = (params.hidden_size(), params.input_size());
    let dbar = d + 1;
    let start = [&params.h0[..], &alloc::vec![0.0; d][..]].concat();
    let words = all_words(&field, &start, depth)?;
    let p = params.output_size();
    let psi0 = params.psi.matvec(&params.h0);
    let mut channels: Vec<Vec<DenseTensor>> =
        (0..p).map(|l| alloc::vec![DenseTensor::scalar(dbar, psi0[l])]).collect();
    for k in 1..=depth {
        let inv = 1.0 / math::factorial(k);
        let mut data: Vec<Vec<f64>> = (0..p).map(|_| Vec::with_capacity(words.level(k).len())).collect();
        for value in words.level(k) {
            let z = params.psi.matvec(&value[..e]);
            for l in 0..p {
                data[l].push(inv * z[l]);
            }
        }
        for (l, values) in data.into_iter().enumerate() {
            channels[l].push(DenseTensor::from_vec(dbar, k, values)?);
        }
    }
    let channels = channels.into_iter().map(|levels| GradedTensorSeq::new(dbar, levels)).collect::<Result<_>>()?;
    AlphaSeries::from_channels(channels)
}

/// `ξ_α(X)` for a path in the input space, or the stopped version
/// `⟨α, S_{[0, j/T]}(X̄)⟩` when `stop = Some((j, T))`.
pub fn rkhs_predict(
    alpha: &AlphaSeries,
    path: &PiecewiseLinearPath,
    config: PathConfig,
    stop: Option<(usize, usize)>,
) -> Result<Vec<f64>> {
    if path.dim() + 1 != alpha.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim() - 1, found: path.dim() });
    }
    let aug = path.time_augment(config);
    let aug = match stop {
        Some((j, steps)) => aug.stop_at(j, steps)?,
        None => aug,
    };
    alpha.pair(&signature(&aug, alpha.depth(), 0.0, 1.0)?)
}

/// `‖ξ_α‖_ℋ = ‖α‖_𝒯` truncated at `depth`.
pub fn rkhs_norm(params: &RnnParams, config: PathConfig, depth: usize) -> Result<f64> {
    Ok(alpha_series(params, config, depth)?.norm())
}

/// `base + λ ‖ξ_α‖²_ℋ`.
pub fn penalized_loss(base: f64, params: &RnnParams, config: PathConfig, lambda: f64, depth: usize) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("λ must be non-negative"));
    }
    if lambda == 0.0 {
        return Ok(base);
    }
    let norm = rkhs_norm(params, config, depth)?;
    Ok(base + lambda * norm * norm)
}

/// `(‖ξ(X) - ξ(X')‖, ‖ξ‖_ℋ ‖S(X̄) - S(X̄')‖_𝒯)`.
pub fn stability_gap(
    params: &RnnParams,
    config: PathConfig,
    depth: usize,
    x: &PiecewiseLinearPath,
    x_prime: &PiecewiseLinearPath,
) -> Result<(f64, f64)> {
    let alpha = alpha_series(params, config, depth)?;
    let sx = signature(&x.time_augment(config), depth, 0.0, 1.0)?;
    let sy = signature(&x_prime.time_augment(config), depth, 0.0, 1.0)?;
    let a = alpha.pair(&sx)?;
    let b = alpha.pair(&sy)?;
    let gap = math::norm(&a.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>());
    let bound = alpha.norm() * sx.seq().sub(sy.seq())?.norm();
    Ok((gap, bound))
}

/// Named constants and terms of a generalisation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    entries: Vec<(&'static str, f64)>,
}

impl BoundReport {
    fn push(&mut self, name: &'static str, value: f64) {
        self.entries.push((name, value));
    }

    pub fn entries(&self) -> &[(&'static str, f64)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }

    /// Right-hand side of the bound.
    pub fn total(&self) -> f64 {
        self.get("total").expect("every report carries its total")
    }

    /// One `name=value` line per entry.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v:.17e}");
        }
        out
    }
}

/// How the parameter class of a binary-classification bound is described.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinaryClass {
    /// Logistic feedforward networks with `‖W‖_F ≤ K_W`, `‖b‖ ≤ K_b`,
    /// `‖ψ‖ ≤ K_ψ`: `B = √2 K_ψ (1-L) / (1 - L - 32 d K_W)`, `K_f ≤ K_W`
    /// and `‖f‖_∞ = 1`.
    Logistic { k_w: f64, k_b: f64, k_psi: f64, d: usize },
    /// Any class, given `B`, `sup ‖ψ‖`, `sup K_f` and `sup ‖f‖_∞` directly.
    Raw { b: f64, k_psi: f64, k_f: f64, f_sup: f64 },
}

/// Sample size, confidence and loss of a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSetting {
    pub l: f64,
    pub n: usize,
    pub delta: f64,
    pub steps: usize,
    pub empirical_risk: f64,
}

impl BoundSetting {
    fn check(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l < 1.0) {
            return Err(Error::InvalidArgument("L must lie in (0, 1)"));
        }
        if self.n == 0 || self.steps == 0 {
            return Err(Error::InvalidArgument("n and T must be positive"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument("δ must lie in (0, 1]"));
        }
        if !(self.empirical_risk >= 0.0) {
            return Err(Error::InvalidArgument("empirical risk must be non-negative"));
        }
        Ok(())
    }
}

fn non_negative(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("class constants must be finite and non-negative"));
    }
    Ok(())
}

/// Binary classification bound:
/// `R̂ + c_2/T + 8 B K_ℓ / ((1-L)√n) + (2 B K_ℓ / (1-L)) √(log(1/δ) / 2n)`
/// with `c_2 = K_ℓ sup ‖ψ‖ K_f e^{K_f} (L + ‖f‖_∞ e^{K_f})`.
pub fn bound_binary(class: BinaryClass, k_loss: f64, setting: BoundSetting) -> Result<BoundReport> {
    setting.check()?;
    let l = setting.l;
    let (b, k_psi, k_f, f_sup) = match class {
        BinaryClass::Logistic { k_w, k_b, k_psi, d } => {
            non_negative(&[k_w, k_b, k_psi])?;
            let radius = (1.0 - l) / (32.0 * d as f64);
            if k_w >= radius {
                return Err(Error::RadiusCondition { norm: k_w, radius });
            }
            let b = math::sqrt(2.0) * k_psi * (1.0 - l) / (1.0 - l - 32.0 * d as f64 * k_w);
            (b, k_psi, k_w, 1.0)
        }
        BinaryClass::Raw { b, k_psi, k_f, f_sup } => {
            non_negative(&[b, k_psi, k_f, f_sup])?;
            (b, k_psi, k_f, f_sup)
        }
    };
    non_negative(&[k_loss])?;
    let n = setting.n as f64;
    let growth = math::exp(k_f);
    let c2 = k_loss * k_psi * k_f * growth * (l + f_sup * growth);
    let discretisation = c2 / setting.steps as f64;
    let complexity = 8.0 * b * k_loss / ((1.0 - l) * math::sqrt(n));
    let confidence = 2.0 * b * k_loss / (1.0 - l) * math::sqrt(math::ln(1.0 / setting.delta) / (2.0 * n));
    let mut r = BoundReport { entries: Vec::new() };
    r.push("B", b);
    r.push("c2", c2);
    r.push("K_loss", k_loss);
    r.push("K_f", k_f);
    r.push("L", l);
    r.push("n", n);
    r.push("delta", setting.delta);
    r.push("T", setting.steps as f64);
    r.push("empirical_risk", setting.empirical_risk);
    r.push("term_discretisation", discretisation);
    r.push("term_complexity", complexity);
    r.push("term_confidence", confidence);
    r.push("total", setting.empirical_risk + discretisation + complexity + confidence);
    Ok(r)
}

/// Constants of the sequence-to-sequence bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialClass {
    /// Output dimension `p`.
    pub p: usize,
    /// Bound on every target `‖y_j‖`.
    pub k_y: f64,
    /// Bound on every channel `‖ξ_{α_ℓ}‖_ℋ`.
    pub b: f64,
    /// `sup_θ (c_{1,θ} + ‖ψ‖ ‖f_θ‖_∞)`.
    pub theta_sup: f64,
}

/// Sequence-to-sequence bound:
/// `R̂ + c_3/T + 4 p c_4 B (1-L)^{-1} / √n + √(2 c_5 log(1/δ) / n)`.
pub fn bound_sequential(class: SequentialClass, setting: BoundSetting) -> Result<BoundReport> {
    setting.check()?;
    non_negative(&[class.k_y, class.b, class.theta_sup])?;
    if class.p == 0 {
        return Err(Error::InvalidArgument("p must be positive"));
    }
    let l = setting.l;
    let p = class.p as f64;
    let n = setting.n as f64;
    let bl = class.b / (1.0 - l);
    let c3 = class.theta_sup + 2.0 * math::sqrt(p) * bl + 2.0 * class.k_y;
    let c4 = bl + class.k_y;
    let c5 = 4.0 * p * bl * c4 + class.k_y * class.k_y;
    let discretisation = c3 / setting.steps as f64;
    let complexity = 4.0 * p * c4 * bl / math::sqrt(n);
    let confidence = math::sqrt(2.0 * c5 * math::ln(1.0 / setting.delta) / n);
    let mut r = BoundReport { entries: Vec::new() };
    r.push("B", class.b);
    r.push("K_y", class.k_y);
    r.push("p", p);
    r.push("c3", c3);
    r.push("c4", c4);
    r.push("c5", c5);
    r.push("L", l);
    r.push("n", n);
    r.push("delta", setting.delta);
    r.push("T", setting.steps as f64);
    r.push("empirical_risk", setting.empirical_risk);
    r.push("term_discretisation", discretisation);
    r.push("term_complexity", complexity);
    r.push("term_confidence", confidence);
    r.push("total", setting.empirical_risk + discretisation + complexity + confidence);
    Ok(r)
}
