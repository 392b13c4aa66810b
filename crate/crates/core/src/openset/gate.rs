use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::{mahalanobis, ClassStatistics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Known(usize),
    Unknown,
}

impl Prediction {
    pub fn class(self) -> Option<usize> {
        match self {
            Prediction::Known(c) => Some(c),
            Prediction::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSetDecision {
    pub predicted: Prediction,
    /// Nearest class by Mahalanobis distance, whether accepted or not.
    pub nearest: usize,
    /// Distances in the order of the statistics set.
    pub distances: Vec<f64>,
    pub accepted: bool,
}

/// Assigns `z` to the nearest class when within that class's threshold.
/// Equal distances resolve to the lowest class index.
pub fn decide(z: ArrayView1<'_, f64>, all_stats: &[ClassStatistics]) -> Result<OpenSetDecision> {
    if all_stats.is_empty() {
        return Err(Error::EmptyInput("no class statistics fitted"));
    }
    let distances = all_stats
        .iter()
        .map(|s| mahalanobis(z, s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = distances.iter().position(|d| !d.is_finite()) {
        return Err(Error::NonFinite(format!(
            "distance to class `{}`",
            all_stats[i].class_id
        )));
    }
    let mut best = 0;
    for (i, d) in distances.iter().enumerate().skip(1) {
        let (bd, bs) = (distances[best], &all_stats[best]);
        if *d < bd || (*d == bd && all_stats[i].class_index < bs.class_index) {
            best = i;
        }
    }
    let nearest = all_stats[best].class_index;
    let accepted = distances[best] < all_stats[best].tau;
    Ok(OpenSetDecision {
        predicted: if accepted {
            Prediction::Known(nearest)
        } else {
            Prediction::Unknown
        },
        nearest,
        distances,
        accepted,
    })
}
