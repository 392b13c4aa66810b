use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityMode {
    /// Purity against ground-truth labels (evaluation runs).
    Truth,
    /// Label-free stand-in: mean max-responsibility for GMM, mean
    /// `(silhouette + 1) / 2` for K-Means.
    Proxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoveryConfig {
    pub k_max: usize,
    /// PCA is applied when the embedding width exceeds this; the reduced
    /// width is `min(pca_threshold_dim, d)`.
    pub pca_threshold_dim: usize,
    pub elbow_tolerance: f64,
    pub tau_p: f64,
    pub s_min: usize,
    pub s_max: usize,
    pub seed: u64,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub kmeans_restarts: usize,
    /// Clustering strategies to evaluate, by registry name; earlier entries
    /// win ties.
    pub models: Vec<String>,
    /// Below this best score no cluster is accepted (k* = 0).
    pub q_min: f64,
    /// Below this many buffered samples no clustering is attempted.
    pub min_samples: usize,
    pub purity_mode: PurityMode,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            k_max: 12,
            pca_threshold_dim: 64,
            elbow_tolerance: 0.9,
            tau_p: 0.7,
            s_min: 10,
            s_max: 100_000,
            seed: 0,
            em_max_iters: 200,
            em_tol: 1e-6,
            kmeans_restarts: 8,
            models: vec!["kmeans".into(), "gmm".into()],
            q_min: 0.05,
            min_samples: 4,
            purity_mode: PurityMode::Proxy,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("discovery: {m}")));
        if self.k_max < 2 {
            return err(format!("k_max must be >= 2, got {}", self.k_max));
        }
        if !(self.tau_p > 0.0 && self.tau_p <= 1.0) {
            return err(format!("tau_p {} not in (0, 1]", self.tau_p));
        }
        if self.s_min == 0 || self.s_min > self.s_max {
            return err(format!(
                "need 0 < s_min <= s_max, got {}..{}",
                self.s_min, self.s_max
            ));
        }
        if !(self.elbow_tolerance > 0.0 && self.elbow_tolerance <= 1.0) {
            return err(format!(
                "elbow_tolerance {} not in (0, 1]",
                self.elbow_tolerance
            ));
        }
        if self.pca_threshold_dim == 0 {
            return err("pca_threshold_dim must be positive".into());
        }
        if self.kmeans_restarts == 0 || self.em_max_iters == 0 {
            return err("kmeans_restarts and em_max_iters must be positive".into());
        }
        if !(self.em_tol >= 0.0) {
            return err(format!("em_tol {} must be >= 0", self.em_tol));
        }
        if self.models.is_empty() {
            return err("at least one clustering model is required".into());
        }
        Ok(())
    }
}
