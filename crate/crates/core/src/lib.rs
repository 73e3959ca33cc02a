//! Recurrent networks seen through their continuous-time limit.
//!
//! A residual recurrent network `h_{j+1} = h_j + f(h_j, x_{j+1}) / T` is the
//! explicit Euler scheme of the ODE `dH = f(H, X) dt`. Rewriting that ODE as a
//! controlled differential equation driven by the time-augmented input path,
//! its solution becomes a linear functional of the path signature, with
//! coefficients given by iterated star products of the CDE vector fields.
//! This crate implements every piece of that chain:
//!
//! * [`tensor`]: dense graded tensors, tensor dot products and the inner
//!   product of truncated tensor sequences.
//! * [`path`]: piecewise-linear paths, total variation, normalisation,
//!   time augmentation and stopped paths.
//! * [`signature`]: truncated signatures (factorial-normalised convention)
//!   and the signature kernel.
//! * [`rnn`]: feedforward, GRU and LSTM residual cells with exact
//!   reverse-mode gradients for the feedforward cell.
//! * [`ode`]: an adaptive Dormand–Prince integrator, the ODE and CDE
//!   reference solutions and the Euler-gap diagnostic.
//! * [`taylor`]: derivative towers, star products and the step-N Taylor
//!   expansion with its analytic error bounds.
//! * [`rkhs`]: the signature-space coefficients of a network, its RKHS norm,
//!   the stability gap and generalisation-bound calculators.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature to get
//! `std::error::Error` on [`Error`].

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod ode;
pub mod path;
pub mod rkhs;
pub mod rnn;
pub mod signature;
pub mod taylor;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use path::{PathConfig, PiecewiseLinearPath};
pub use rnn::{Activation, RnnParams};
pub use signature::Signature;
pub use tensor::{DenseTensor, GradedTensorSeq};

pub(crate) mod math {
    //! `f64` helpers that work without `std`.

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }

    #[inline]
    pub fn powi(x: f64, n: i32) -> f64 {
        libm::pow(x, n as f64)
    }

    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }

    pub fn factorial(n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, k| acc * k as f64)
    }

    pub fn norm(v: &[f64]) -> f64 {
        sqrt(v.iter().map(|x| x * x).sum())
    }
}
