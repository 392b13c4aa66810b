use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use super::config::DiscoveryConfig;
use super::gmm::gmm_fit;
use super::kmeans::kmeans_fit;
use crate::error::{Error, Result};

/// Result of one clustering strategy at one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    /// Within-cluster sum of squares against `centers`.
    pub inertia: f64,
    /// Per-sample membership confidence, when the model has one.
    pub confidence: Option<Vec<f64>>,
    /// Monitored objective per iteration (EM only).
    pub objective_history: Vec<f64>,
}

pub trait Clusterer: Send + Sync {
    fn name(&self) -> &str;
    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        k: usize,
        cfg: &DiscoveryConfig,
        seed: u64,
    ) -> Result<ClusterFit>;
}

pub struct KMeansClusterer;

impl Clusterer for KMeansClusterer {
    fn name(&self) -> &str {
        "kmeans"
    }

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        k: usize,
        cfg: &DiscoveryConfig,
        seed: u64,
    ) -> Result<ClusterFit> {
        let fit = kmeans_fit(x, k, cfg.kmeans_restarts, seed)?;
        Ok(ClusterFit {
            labels: fit.labels,
            centers: fit.centroids,
            inertia: fit.inertia,
            confidence: None,
            objective_history: Vec::new(),
        })
    }
}

pub struct GmmClusterer;

impl Clusterer for GmmClusterer {
    fn name(&self) -> &str {
        "gmm"
    }

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        k: usize,
        cfg: &DiscoveryConfig,
        seed: u64,
    ) -> Result<ClusterFit> {
        let fit = gmm_fit(
            x,
            k,
            cfg.em_max_iters,
            cfg.em_tol,
            cfg.kmeans_restarts,
            seed,
        )?;
        let inertia = x
            .rows()
            .into_iter()
            .zip(&fit.labels)
            .map(|(r, &l)| (&r - &fit.means.row(l)).mapv(|v| v * v).sum())
            .sum();
        let confidence = fit
            .responsibilities
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect();
        Ok(ClusterFit {
            labels: fit.labels,
            centers: fit.means,
            inertia,
            confidence: Some(confidence),
            objective_history: fit.objective_history,
        })
    }
}

/// Named clustering strategies in registration order.
#[derive(Clone)]
pub struct ClustererRegistry {
    entries: Vec<Arc<dyn Clusterer>>,
}

impl ClustererRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Adds or replaces a strategy under its own name.
    pub fn register(&mut self, clusterer: Arc<dyn Clusterer>) {
        match self
            .entries
            .iter_mut()
            .find(|c| c.name() == clusterer.name())
        {
            Some(slot) => *slot = clusterer,
            None => self.entries.push(clusterer),
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Clusterer>> {
        self.entries
            .iter()
            .find(|c| c.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "clusterer",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|c| c.name()).collect()
    }
}

impl Default for ClustererRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(KMeansClusterer));
        r.register(Arc::new(GmmClusterer));
        r
    }
}
