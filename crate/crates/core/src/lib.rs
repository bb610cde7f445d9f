//! Unfolded robust PCA for FMCW radar interference mitigation.
//!
//! The crate is `no_std` (with `alloc`) and carries the numerical parts:
//! beat-signal synthesis ([`signal`], [`scenario`]), spectra ([`spectrum`]),
//! a small reverse-mode differentiation tape ([`autodiff`]), the unfolded
//! network ([`rpca`]), the zeroing baseline ([`baseline`]), evaluation
//! metrics ([`metrics`]) and the optimizer pieces of training ([`train`]).
//! File formats, drivers and the CLI live in the `urpca` crate.

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;

pub mod autodiff;
pub mod baseline;
pub mod error;
pub mod metrics;
pub mod rpca;
pub mod scenario;
pub mod signal;
pub mod spectrum;
pub mod train;

pub use error::{Error, Result};
