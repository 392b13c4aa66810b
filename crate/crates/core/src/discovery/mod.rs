//! Novel-class discovery over rejected embeddings.
//!
//! The buffer of unknown embeddings is standardized (and reduced with PCA
//! when wide), clustered for every `k` in `2..=k_max` by each registered
//! clustering strategy, and scored with the composite validity index
//!
//! ```text
//! Q(k) = 0.4 S + 0.3 CH / 1000 + 0.2 / (1 + DB) + 0.1 V
//! ```
//!
//! The elbow of the K-Means inertia curve is preferred over the best-scoring
//! `k` whenever its score is within `elbow_tolerance` of the best. Clusters
//! are then kept only if their purity and size pass the configured bounds.

mod clusterer;
mod config;
mod elbow;
mod filter;
mod gmm;
mod kmeans;
mod preprocess;
mod report;
mod validity;

pub use clusterer::{ClusterFit, Clusterer, ClustererRegistry, GmmClusterer, KMeansClusterer};
pub use config::{DiscoveryConfig, PurityMode};
pub use elbow::{detect_elbow, select_k, Elbow, Selection, SelectionRule};
pub use filter::{
    filter_clusters, majority_label, AcceptedCluster, ClusterVerdict, Majority, PurityKind,
};
pub use gmm::{gmm_fit, GmmFit};
pub use kmeans::{kmeans_fit, KMeansFit};
pub use preprocess::{preprocess, Preprocessed};
pub use report::{discover, discover_with, ClusterReport};
pub use validity::{
    calinski_harabasz, composite_score, davies_bouldin, pairwise_distances, silhouette_samples,
    validity_scores, ValidityScores,
};
