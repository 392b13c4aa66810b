//! Per-class Gaussian statistics over embeddings and the Mahalanobis
//! open-set gate.
//!
//! Each known class keeps a mean, a shrunk covariance and a rejection
//! threshold `tau = mean + 3 * std` of its own training distances. A test
//! embedding goes to the nearest class when its distance is below that
//! class's threshold and is rejected as unknown otherwise.

mod gate;
mod stats;

pub use gate::{decide, OpenSetDecision, Prediction};
pub use stats::{
    calibrate_threshold, fit_class_stats, mahalanobis, ClassSamples, ClassStatistics,
    DEGENERATE_COVARIANCE, TAU_FLOOR,
};
