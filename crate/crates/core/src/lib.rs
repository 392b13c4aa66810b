//! Incremental open-set recognition for RF emitter spectrograms.
//!
//! The pipeline embeds normalized spectrograms with a small encoder trained on
//! a center/separation/cross-entropy loss, gates each embedding with per-class
//! Mahalanobis thresholds, clusters the rejected samples into candidate new
//! classes, and folds those classes back into the model with a bounded replay
//! memory.
//!
//! Module map:
//! - [`signal`]: synthetic bursts, raw I/Q ingestion, STFT spectrograms.
//! - [`embedding`]: encoder, composite loss, Adam training, checkpoints.
//! - [`openset`]: class statistics and the three-sigma Mahalanobis gate.
//! - [`discovery`]: clustering of unknowns with validity-scored model selection.
//! - [`incremental`]: the streaming session with replay-based updates.
//! - [`evaluation`]: accuracy, confusion matrices, 2-D projections.
//! - [`config`] and [`pipeline`]: the file-driven commands behind the CLI.

pub mod config;
pub mod discovery;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod incremental;
pub mod linalg;
pub mod openset;
pub mod pipeline;
pub mod seed;
pub mod signal;

pub use error::{Error, ErrorKind, Result};
