//! Files, drivers and the command-line tool around [`urpca_core`].
//!
//! * [`dataset`]: split files, manifests and deterministic generation.
//! * [`checkpoint`]: the model file format.
//! * [`training`]: the epoch loop with validation and best-model selection.
//! * [`evaluate`]: metrics over a split, timing and report files.
//! * [`pipeline`]: directory-level train/evaluate/sweep workflows.
//! * [`spectrum_io`]: text signals/spectra and the comparison plot.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod parallel;
pub mod pipeline;
pub mod spectrum_io;
pub mod training;

pub use error::{Error, Result};
pub use urpca_core as core;
