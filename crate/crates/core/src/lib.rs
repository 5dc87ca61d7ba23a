//! Measuring the distributional diversity of labeled image corpora and
//! curating training subsets that mix "similar" and "diverse" images.
//!
//! The pipeline: [`corpus`] manifests (or [`synth`] rendered corpora) →
//! [`gist`] descriptors → [`diversity`] statistics and [`partition`]ed
//! mixtures → [`classifier`] training → [`experiment`] sweeps and reports.

pub mod classifier;
pub mod corpus;
pub mod diversity;
pub mod error;
pub mod experiment;
pub mod gist;
pub mod linalg;
pub mod parallel;
pub mod partition;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
