//! File formats, training, experiments and verification suites built on
//! [`rnnsig_core`].

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use rnnsig_core as core;
