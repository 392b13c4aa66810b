use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_mean, squared_distance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityScores {
    pub k: usize,
    pub model: String,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
    pub explained_variance: f64,
    pub composite: f64,
    pub inertia: f64,
}

pub fn composite_score(silhouette: f64, ch: f64, db: f64, explained_variance: f64) -> f64 {
    0.4 * silhouette + 0.3 * ch / 1000.0 + 0.2 / (1.0 + db) + 0.1 * explained_variance
}

/// Euclidean distance matrix.
pub fn pairwise_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(&rows[i], &rows[j]).sqrt();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

fn check_labels(labels: &[usize], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let non_empty = cluster_sizes(labels, k).iter().filter(|&&s| s > 0).count();
    if non_empty < 2 {
        return Err(Error::InvalidArgument(format!(
            "validity indices need two non-empty clusters, got {non_empty}"
        )));
    }
    Ok(k)
}

/// Per-sample silhouette from a precomputed distance matrix. Members of
/// singleton clusters score 0.
pub fn silhouette_samples(dist: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Vec<f64>> {
    let n = dist.nrows();
    let k = check_labels(labels, n)?;
    let sizes = cluster_sizes(labels, k);
    let mut sums = vec![0.0; k];
    Ok((0..n)
        .map(|i| {
            sums.fill(0.0);
            for j in 0..n {
                sums[labels[j]] += dist[(i, j)];
            }
            let own = labels[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect())
}

fn hard_means(x: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> (Vec<usize>, Array2<f64>) {
    let sizes = cluster_sizes(labels, k);
    let mut means = Array2::zeros((k, x.ncols()));
    for (row, &l) in x.rows().into_iter().zip(labels) {
        let mut m = means.row_mut(l);
        m += &row;
    }
    for (mut m, &s) in means.rows_mut().into_iter().zip(&sizes) {
        if s > 0 {
            m /= s as f64;
        }
    }
    (sizes, means)
}

/// Between/within dispersion ratio. A partition with zero within-cluster
/// dispersion scores 1.
pub fn calinski_harabasz(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let n = x.nrows();
    let k = check_labels(labels, n)?;
    let (sizes, means) = hard_means(x, labels, k);
    let global = column_mean(x);
    let mut between = 0.0;
    for (m, &s) in means.rows().into_iter().zip(&sizes) {
        if s > 0 {
            between += s as f64 * (&m - &global).mapv(|v| v * v).sum();
        }
    }
    let within: f64 = x
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &l)| (&r - &means.row(l)).mapv(|v| v * v).sum())
        .sum();
    let used = sizes.iter().filter(|&&s| s > 0).count() as f64;
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n as f64 - used) / (within * (used - 1.0)))
}

/// Mean over clusters of the worst scatter-to-separation ratio. Coincident
/// centroids contribute 0.
pub fn davies_bouldin(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let k = check_labels(labels, x.nrows())?;
    let (sizes, means) = hard_means(x, labels, k);
    let mut scatter = vec![0.0; k];
    for (r, &l) in x.rows().into_iter().zip(labels) {
        scatter[l] += (&r - &means.row(l)).mapv(|v| v * v).sum().sqrt();
    }
    let used: Vec<usize> = (0..k).filter(|&c| sizes[c] > 0).collect();
    for &c in &used {
        scatter[c] /= sizes[c] as f64;
    }
    let total: f64 = used
        .iter()
        .map(|&i| {
            used.iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let sep = (&means.row(i) - &means.row(j)).mapv(|v| v * v).sum().sqrt();
                    if sep > 0.0 {
                        (scatter[i] + scatter[j]) / sep
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / used.len() as f64)
}

/// All four indices and the composite for one partition. `inertia` is the
/// model's within-cluster sum of squares; explained variance is
/// `1 − inertia / TSS`, clamped to `[0, 1]`.
pub fn validity_scores(
    x: ArrayView2<'_, f64>,
    dist: ArrayView2<'_, f64>,
    labels: &[usize],
    inertia: f64,
    model: &str,
) -> Result<(ValidityScores, Vec<f64>)> {
    let silhouettes = silhouette_samples(dist, labels)?;
    let silhouette = silhouettes.iter().sum::<f64>() / silhouettes.len() as f64;
    let ch = calinski_harabasz(x, labels)?;
    let db = davies_bouldin(x, labels)?;
    let mean = column_mean(x);
    let tss: f64 = (&x - &mean).mapv(|v| v * v).sum();
    let explained_variance = if tss > 0.0 {
        (1.0 - inertia / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let scores = ValidityScores {
        k,
        model: model.to_string(),
        silhouette,
        calinski_harabasz: ch,
        davies_bouldin: db,
        explained_variance,
        composite: composite_score(silhouette, ch, db, explained_variance),
        inertia,
    };
    Ok((scores, silhouettes))
}
