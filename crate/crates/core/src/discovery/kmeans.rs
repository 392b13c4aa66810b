use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::seed::rng_from_seed;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
    /// Final inertia of every restart, in restart order.
    pub restart_inertia: Vec<f64>,
}

/// Best-of-restarts Lloyd's algorithm.
///
/// Restart `r < N` seeds greedily by farthest point from the `r`-th entry of
/// a seeded permutation of the samples; later restarts use k-means++.
/// Assignment ties go to the lowest centroid index.
pub fn kmeans_fit(
    x: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KMeansFit> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("k-means needs a non-empty sample matrix"));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means with k={k} on {n} samples"
        )));
    }
    let data: Vec<f64> = x.iter().copied().collect();
    let rows: Vec<&[f64]> = data.chunks_exact(d).collect();

    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);

    let mut best: Option<KMeansFit> = None;
    let mut restart_inertia = Vec::with_capacity(restarts.max(1));
    for r in 0..restarts.max(1) {
        let init = if r < n {
            farthest_point_init(&rows, k, perm[r])
        } else {
            kmeans_plus_plus_init(&rows, k, &mut rng)
        };
        let fit = lloyd(&rows, init, d);
        restart_inertia.push(fit.inertia);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_inertia = restart_inertia;
    Ok(best)
}

fn farthest_point_init(rows: &[&[f64]], k: usize, start: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![rows[start].to_vec()];
    let mut nearest: Vec<f64> = rows
        .iter()
        .map(|r| squared_distance(r, rows[start]))
        .collect();
    while centers.len() < k {
        let mut pick = 0;
        for (i, &dist) in nearest.iter().enumerate() {
            if dist > nearest[pick] {
                pick = i;
            }
        }
        centers.push(rows[pick].to_vec());
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(r, rows[pick]));
        }
    }
    centers
}

fn kmeans_plus_plus_init(rows: &[&[f64]], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..rows.len());
    let mut centers = vec![rows[first].to_vec()];
    let mut nearest: Vec<f64> = rows
        .iter()
        .map(|r| squared_distance(r, rows[first]))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = rows.len() - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..rows.len())
        };
        centers.push(rows[pick].to_vec());
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(r, rows[pick]));
        }
    }
    centers
}

fn assign(rows: &[&[f64]], centers: &[Vec<f64>], labels: &mut [usize], dist: &mut [f64]) {
    for (i, r) in rows.iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let s = squared_distance(r, center);
            if s < best.1 {
                best = (c, s);
            }
        }
        labels[i] = best.0;
        dist[i] = best.1;
    }
}

fn lloyd(rows: &[&[f64]], mut centers: Vec<Vec<f64>>, d: usize) -> KMeansFit {
    let n = rows.len();
    let k = centers.len();
    let mut labels = vec![usize::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        assign(rows, &centers, &mut labels, &mut dist);
        // An empty cluster takes the sample farthest from its centroid.
        loop {
            let mut counts = vec![0usize; k];
            for &l in &labels {
                counts[l] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let mut far = None;
            for i in 0..n {
                if counts[labels[i]] > 1 && far.is_none_or(|f: usize| dist[i] > dist[f]) {
                    far = Some(i);
                }
            }
            let Some(far) = far else { break };
            centers[empty] = rows[far].to_vec();
            labels[far] = empty;
            dist[far] = 0.0;
        }
        history.push(dist.iter().sum());
        if labels == prev {
            break;
        }
        prev.clone_from(&labels);
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    let inertia = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| squared_distance(r, &centers[l]))
        .sum();
    let centroids = Array2::from_shape_fn((k, d), |(c, j)| centers[c][j]);
    KMeansFit {
        labels,
        centroids,
        inertia,
        inertia_history: history,
        restart_inertia: Vec::new(),
    }
}
