//! Session scoring, confusion matrices and 2-D projections.

mod projection;
mod score;

pub use projection::{project_2d, Projection};
pub use score::{
    cluster_purity, format_percent, score_session, ClusteringSummary, ConfusionMatrix, EvalReport,
    UNKNOWN,
};
