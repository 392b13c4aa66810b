//! Dense helpers shared by the statistics, discovery and evaluation stages.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub fn to_dmatrix(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

pub fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn column_mean(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()))
}

/// Covariance with the population (divide by n) convention.
pub fn population_covariance(x: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows().max(1) as f64;
    let mean = column_mean(x);
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n;
    (mean, cov)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in
/// non-increasing order; columns of the returned matrix are the eigenvectors.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Principal components of a data matrix (rows are samples).
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `n_components × d`, one unit-norm loading vector per row.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

impl Pca {
    pub fn fit(x: ArrayView2<'_, f64>, n_components: usize) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::EmptyInput("PCA needs at least two samples"));
        }
        let d = x.ncols();
        let m = n_components.min(d);
        let (mean, cov) = population_covariance(x);
        let total: f64 = cov.diag().sum();
        let (values, vectors) = sorted_symmetric_eigen(to_dmatrix(cov.view()));
        let components = Array2::from_shape_fn((m, d), |(c, j)| vectors[(j, c)]);
        let explained_variance = Array1::from_iter(values.iter().take(m).copied());
        let explained_variance_ratio = if total > 0.0 {
            explained_variance.mapv(|v| v / total)
        } else {
            Array1::zeros(m)
        };
        Ok(Self {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
        })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean).dot(&self.components.t())
    }

    pub fn inverse_transform(&self, scores: ArrayView2<'_, f64>) -> Array2<f64> {
        scores.dot(&self.components) + &self.mean
    }
}
