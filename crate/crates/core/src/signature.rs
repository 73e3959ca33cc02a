//! Truncated path signatures.
//!
//! Level `k` of the factorial-normalised signature is `k!` times the usual
//! iterated integral, so a linear path with increment `b` has level `k` equal
//! to `b^{⊗k}`. Internally everything is accumulated in the standard
//! convention, where concatenation is the plain truncated tensor product.

use alloc::vec::Vec;

use crate::math;
use crate::path::{check_interval, PathConfig, PiecewiseLinearPath};
use crate::tensor::{DenseTensor, GradedTensorSeq};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Level `k` is the plain iterated integral over the simplex.
    Standard,
    /// Level `k` is `k!` times the iterated integral.
    FactorialNormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    seq: GradedTensorSeq,
    convention: Convention,
}

impl Signature {
    /// Wraps a sequence whose level 0 must equal 1.
    pub fn new(seq: GradedTensorSeq, convention: Convention) -> Result<Self> {
        if seq.level(0).data()[0] != 1.0 {
            return Err(Error::InvalidArgument("signature level 0 must equal 1"));
        }
        Ok(Signature { seq, convention })
    }

    /// Signature of a constant path: `(1, 0, 0, ...)`.
    pub fn trivial(dim: usize, depth: usize, convention: Convention) -> Self {
        Signature { seq: GradedTensorSeq::unit(dim, depth), convention }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn seq(&self) -> &GradedTensorSeq {
        &self.seq
    }

    pub fn into_seq(self) -> GradedTensorSeq {
        self.seq
    }

    pub fn depth(&self) -> usize {
        self.seq.depth()
    }

    pub fn dim(&self) -> usize {
        self.seq.dim()
    }

    pub fn level(&self, k: usize) -> &DenseTensor {
        self.seq.level(k)
    }

    /// Coefficient of the word `(i_1, ..., i_k)`, letters in `1..=dim`.
    pub fn coefficient(&self, word: &[usize]) -> Result<f64> {
        if word.len() > self.depth() {
            return Err(Error::OrderExhausted { needed: word.len(), available: self.depth() });
        }
        let mut index = Vec::with_capacity(word.len());
        for &letter in word {
            if letter == 0 || letter > self.dim() {
                return Err(Error::LetterOutOfRange { letter, alphabet: self.dim() });
            }
            index.push(letter - 1);
        }
        Ok(self.seq.level(word.len()).get(&index))
    }

    /// The same signature expressed in another convention.
    pub fn to_convention(&self, target: Convention) -> Signature {
        if target == self.convention {
            return self.clone();
        }
        let mut seq = self.seq.clone();
        for k in 2..=seq.depth() {
            let f = math::factorial(k);
            let factor = if target == Convention::FactorialNormalized { f } else { 1.0 / f };
            seq.level_mut(k).scale(factor);
        }
        Signature { seq, convention: target }
    }

    /// Chen's identity: the signature of the concatenated path, in the
    /// convention of `self`.
    pub fn concat(&self, other: &Signature) -> Result<Signature> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let depth = self.depth().min(other.depth());
        let a = self.to_convention(Convention::Standard);
        let b = other.to_convention(Convention::Standard);
        let mut levels = Vec::with_capacity(depth + 1);
        for k in 0..=depth {
            let mut level = DenseTensor::zeros(self.dim(), k);
            for j in 0..=k {
                let prod = crate::tensor::tensor_product(a.level(j), b.level(k - j))?;
                level.add_scaled(&prod, 1.0)?;
            }
            levels.push(level);
        }
        let seq = GradedTensorSeq::new(self.dim(), levels)?;
        Ok(Signature { seq, convention: Convention::Standard }.to_convention(self.convention))
    }

    pub fn norm(&self) -> f64 {
        self.seq.norm()
    }
}

/// `scale · a ⊗ v` for a vector `v`.
fn push_vector(a: &DenseTensor, v: &[f64], scale: f64) -> DenseTensor {
    let d = v.len();
    let mut data = Vec::with_capacity(a.data().len() * d);
    for &x in a.data() {
        let xs = x * scale;
        data.extend(v.iter().map(|vi| xs * vi));
    }
    DenseTensor::from_vec(d, a.order() + 1, data).expect("length is d^(k+1)")
}

/// Multiplies `levels` (standard convention) on the right by the signature of
/// one linear piece with increment `delta`.
fn chen_step(levels: &mut [DenseTensor], delta: &[f64]) {
    let depth = levels.len() - 1;
    for k in (1..=depth).rev() {
        // ((S_0 ⊗ δ/k + S_1) ⊗ δ/(k-1) + ... ) ⊗ δ/1 + S_k
        let mut acc = push_vector(&levels[0], delta, 1.0 / k as f64);
        for i in 1..k {
            acc.add_scaled(&levels[i], 1.0).expect("same shape");
            acc = push_vector(&acc, delta, 1.0 / (k - i) as f64);
        }
        levels[k].add_scaled(&acc, 1.0).expect("same shape");
    }
}

/// Signature of a single linear piece with increment `delta`.
pub fn segment_signature(delta: &[f64], depth: usize) -> Signature {
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(DenseTensor::scalar(delta.len(), 1.0));
    for k in 1..=depth {
        let next = push_vector(&levels[k - 1], delta, 1.0);
        levels.push(next);
    }
    let seq = GradedTensorSeq::new(delta.len(), levels).expect("levels are consistent");
    Signature { seq, convention: Convention::FactorialNormalized }
}

/// Factorial-normalised signature of `path` on `[s, t]`, truncated at `depth`.
pub fn signature(path: &PiecewiseLinearPath, depth: usize, s: f64, t: f64) -> Result<Signature> {
    check_interval(s, t)?;
    let dim = path.dim();
    let mut levels: Vec<DenseTensor> = GradedTensorSeq::unit(dim, depth).levels().to_vec();
    for seg in path.segments(s, t)? {
        chen_step(&mut levels, &seg.delta);
    }
    let seq = GradedTensorSeq::new(dim, levels)?;
    Ok(Signature { seq, convention: Convention::Standard }.to_convention(Convention::FactorialNormalized))
}

/// Signatures on `[0, t_i]` for every breakpoint `t_i` of `path` (the first
/// being the trivial signature at `t = 0`).
pub fn running_signatures(path: &PiecewiseLinearPath, depth: usize) -> Vec<Signature> {
    let dim = path.dim();
    let mut levels: Vec<DenseTensor> = GradedTensorSeq::unit(dim, depth).levels().to_vec();
    let mut out = Vec::with_capacity(path.len());
    out.push(Signature::trivial(dim, depth, Convention::FactorialNormalized));
    for seg in path.segments(0.0, 1.0).expect("full interval is valid") {
        chen_step(&mut levels, &seg.delta);
        let seq = GradedTensorSeq::new(dim, levels.clone()).expect("levels are consistent");
        out.push(Signature { seq, convention: Convention::Standard }.to_convention(Convention::FactorialNormalized));
    }
    out
}

/// `‖S‖_𝒯` over the stored levels.
pub fn sig_norm(sig: &Signature) -> f64 {
    sig.norm()
}

/// The truncated signature kernel `⟨S(X̄), S(Ȳ)⟩`, time-augmenting both paths.
pub fn sig_kernel(x: &PiecewiseLinearPath, y: &PiecewiseLinearPath, depth: usize, config: PathConfig) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let sx = signature(&x.time_augment(config), depth, 0.0, 1.0)?;
    let sy = signature(&y.time_augment(config), depth, 0.0, 1.0)?;
    sx.seq().inner(sy.seq())
}
