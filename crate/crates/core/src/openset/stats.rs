use nalgebra::{Cholesky, DVector, Dyn};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{population_covariance, to_array2, to_dmatrix};

/// Covariance used for a class whose embeddings have zero spread.
pub const DEGENERATE_COVARIANCE: f64 = 1e-6;
/// Threshold assigned to a zero-spread class.
pub const TAU_FLOOR: f64 = 1e-3;

/// Embeddings of one class, rows are samples.
#[derive(Debug, Clone)]
pub struct ClassSamples<'a> {
    pub class_index: usize,
    pub class_id: String,
    pub embeddings: ArrayView2<'a, f64>,
}

/// Gaussian model of one class with its rejection threshold.
#[derive(Debug, Clone, Serialize)]
pub struct ClassStatistics {
    pub class_index: usize,
    pub class_id: String,
    pub mu: Array1<f64>,
    pub sigma: Array2<f64>,
    /// Cached precision matrix.
    pub sigma_inv: Array2<f64>,
    pub tau: f64,
    pub n_samples: usize,
    #[serde(skip)]
    factor: Cholesky<f64, Dyn>,
}

impl PartialEq for ClassStatistics {
    fn eq(&self, other: &Self) -> bool {
        self.class_index == other.class_index
            && self.class_id == other.class_id
            && self.mu == other.mu
            && self.sigma == other.sigma
            && self.tau == other.tau
            && self.n_samples == other.n_samples
    }
}

impl ClassStatistics {
    /// Builds statistics from stored moments, factorizing `sigma` once.
    pub fn from_parts(
        class_index: usize,
        class_id: impl Into<String>,
        mu: Array1<f64>,
        sigma: Array2<f64>,
        tau: f64,
        n_samples: usize,
    ) -> Result<Self> {
        let class_id = class_id.into();
        let d = mu.len();
        if sigma.dim() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: sigma.nrows(),
            });
        }
        let factor = Cholesky::new(to_dmatrix(sigma.view())).ok_or_else(|| {
            Error::NotPositiveDefinite(format!("covariance of class `{class_id}`"))
        })?;
        let sigma_inv = to_array2(&factor.inverse());
        if sigma_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("precision of class `{class_id}`")));
        }
        Ok(Self {
            class_index,
            class_id,
            mu,
            sigma,
            sigma_inv,
            tau,
            n_samples,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Squared Mahalanobis distance through the cached Cholesky factor.
    pub fn squared_distance(&self, z: ArrayView1<'_, f64>) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let diff = DVector::from_iterator(z.len(), z.iter().zip(&self.mu).map(|(a, b)| a - b));
        let y = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&diff)
            .ok_or_else(|| Error::NotPositiveDefinite(self.class_id.clone()))?;
        Ok(y.norm_squared())
    }
}

/// `sqrt((z - mu)^T Sigma^-1 (z - mu))`.
pub fn mahalanobis(z: ArrayView1<'_, f64>, stats: &ClassStatistics) -> Result<f64> {
    Ok(stats.squared_distance(z)?.max(0.0).sqrt())
}

/// Three-sigma threshold: mean plus three population standard deviations.
pub fn calibrate_threshold(distances: &[f64]) -> Result<f64> {
    if distances.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "threshold calibration needs at least 2 distances, got {}",
            distances.len()
        )));
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / n;
    Ok(mean + 3.0 * var.sqrt())
}

/// Fits mean, shrunk covariance and threshold for every class.
///
/// `Sigma = (1 - shrinkage) * S + shrinkage * (trace(S) / D) * I` with `S`
/// the population covariance. A class with zero spread gets
/// `Sigma = DEGENERATE_COVARIANCE * I` and `tau = TAU_FLOOR`.
pub fn fit_class_stats(
    classes: &[ClassSamples<'_>],
    shrinkage: f64,
) -> Result<Vec<ClassStatistics>> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage {shrinkage} not in [0, 1]"
        )));
    }
    classes.iter().map(|c| fit_one(c, shrinkage)).collect()
}

fn fit_one(class: &ClassSamples<'_>, shrinkage: f64) -> Result<ClassStatistics> {
    let n = class.embeddings.nrows();
    if n < 2 {
        return Err(Error::UnderSampled {
            class: class.class_id.clone(),
            n,
        });
    }
    if class.embeddings.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "embeddings of class `{}`",
            class.class_id
        )));
    }
    let d = class.embeddings.ncols();
    let (mu, cov) = population_covariance(class.embeddings);
    let trace = cov.diag().sum();
    if trace <= 0.0 {
        let sigma = Array2::eye(d) * DEGENERATE_COVARIANCE;
        return ClassStatistics::from_parts(
            class.class_index,
            class.class_id.clone(),
            mu,
            sigma,
            TAU_FLOOR,
            n,
        );
    }
    let mut sigma = cov * (1.0 - shrinkage);
    let iso = shrinkage * trace / d as f64;
    for i in 0..d {
        sigma[(i, i)] += iso;
    }
    // Symmetrize away rounding asymmetry from the outer products.
    let sigma = (&sigma + &sigma.t()) * 0.5;
    let mut stats =
        ClassStatistics::from_parts(class.class_index, class.class_id.clone(), mu, sigma, 0.0, n)?;
    let distances = class
        .embeddings
        .rows()
        .into_iter()
        .map(|z| mahalanobis(z, &stats))
        .collect::<Result<Vec<_>>>()?;
    stats.tau = calibrate_threshold(&distances)?.max(TAU_FLOOR);
    Ok(stats)
}
