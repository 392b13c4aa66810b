use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use super::kmeans::kmeans_fit;
use crate::error::{Error, Result};
use crate::linalg::{population_covariance, to_array2};

/// Relative strength of the covariance prior.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    /// `N × k` posterior membership probabilities.
    pub responsibilities: Array2<f64>,
    pub means: Array2<f64>,
    pub covariances: Vec<Array2<f64>>,
    pub weights: Array1<f64>,
    /// Data log-likelihood under the final parameters.
    pub log_likelihood: f64,
    /// Penalized log-likelihood at every E-step; non-decreasing.
    pub objective_history: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_iter: usize,
}

/// Full-covariance EM initialized from K-Means.
///
/// Covariances carry a fixed ridge prior `A = r·(N/k)·I` with
/// `r = 1e-6·tr(Σ_global)/D`, so every M-step yields `Σ_j = S_j + A/N_j`
/// (`r` on the diagonal for a balanced component) and the penalized
/// likelihood `LL − ½ Σ_j tr(Σ_j⁻¹ A)` is monotone in the iterations.
/// Iteration stops once its per-sample change falls below `tol`.
pub fn gmm_fit(
    x: ArrayView2<'_, f64>,
    k: usize,
    max_iters: usize,
    tol: f64,
    restarts: usize,
    seed: u64,
) -> Result<GmmFit> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("GMM needs a non-empty sample matrix"));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "GMM with k={k} on {n} samples"
        )));
    }
    let (_, global) = population_covariance(x);
    let mut ridge = COVARIANCE_REGULARIZATION * global.diag().sum() / d as f64;
    if !(ridge > 0.0) {
        ridge = COVARIANCE_REGULARIZATION;
    }
    let prior = ridge * n as f64 / k as f64;
    let rows: Vec<DVector<f64>> = x
        .rows()
        .into_iter()
        .map(|r| DVector::from_iterator(d, r.iter().copied()))
        .collect();

    let init = kmeans_fit(x, k, restarts, seed)?;
    let mut resp = DMatrix::zeros(n, k);
    for (i, &l) in init.labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let mut params = m_step(&rows, &resp, prior)?;
    let mut history = Vec::new();
    let mut n_iter = 0;
    let ll = loop {
        let (ll, next) = e_step(&rows, &params, &mut resp);
        let objective = ll - 0.5 * prior * next;
        let done = history
            .last()
            .is_some_and(|&prev: &f64| (objective - prev).abs() / n as f64 <= tol);
        history.push(objective);
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "GMM objective at iteration {n_iter}"
            )));
        }
        if done || n_iter >= max_iters {
            break ll;
        }
        params = m_step(&rows, &resp, prior)?;
        n_iter += 1;
    };

    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            for j in 1..k {
                if resp[(i, j)] > resp[(i, best)] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(GmmFit {
        responsibilities: to_array2(&resp),
        means: Array2::from_shape_fn((k, d), |(j, c)| params.means[j][c]),
        covariances: params.covs.iter().map(to_array2).collect(),
        weights: Array1::from(params.weights.clone()),
        log_likelihood: ll,
        objective_history: history,
        labels,
        n_iter,
    })
}

struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    factors: Vec<Cholesky<f64, nalgebra::Dyn>>,
}

fn m_step(rows: &[DVector<f64>], resp: &DMatrix<f64>, prior: f64) -> Result<Params> {
    let n = rows.len();
    let d = rows[0].len();
    let k = resp.ncols();
    let mut params = Params {
        weights: Vec::with_capacity(k),
        means: Vec::with_capacity(k),
        covs: Vec::with_capacity(k),
        factors: Vec::with_capacity(k),
    };
    for j in 0..k {
        let nk = resp.column(j).sum().max(f64::MIN_POSITIVE);
        let mut mean = DVector::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            mean.axpy(resp[(i, j)], r, 1.0);
        }
        mean /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for (i, r) in rows.iter().enumerate() {
            let diff = r - &mean;
            cov.ger(resp[(i, j)], &diff, &diff, 1.0);
        }
        cov /= nk;
        for c in 0..d {
            cov[(c, c)] += prior / nk;
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let factor = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(format!("GMM component {j} covariance")))?;
        params.weights.push(nk / n as f64);
        params.means.push(mean);
        params.covs.push(cov);
        params.factors.push(factor);
    }
    Ok(params)
}

/// Fills `resp` and returns the log-likelihood together with
/// `Σ_j tr(Σ_j⁻¹)`, the trace part of the prior penalty.
fn e_step(rows: &[DVector<f64>], params: &Params, resp: &mut DMatrix<f64>) -> (f64, f64) {
    let d = rows[0].len() as f64;
    let k = params.means.len();
    let mut trace_inv = 0.0;
    let mut log_norm = Vec::with_capacity(k);
    let lowers: Vec<DMatrix<f64>> = params.factors.iter().map(|f| f.l()).collect();
    for (j, f) in params.factors.iter().enumerate() {
        let log_det = 2.0 * lowers[j].diagonal().iter().map(|v| v.ln()).sum::<f64>();
        log_norm.push(params.weights[j].max(f64::MIN_POSITIVE).ln() - 0.5 * (d * LN_2PI + log_det));
        trace_inv += f.inverse().trace();
    }
    let mut ll = 0.0;
    let mut logp = vec![0.0; k];
    for (i, r) in rows.iter().enumerate() {
        for j in 0..k {
            let diff = r - &params.means[j];
            let y = lowers[j]
                .solve_lower_triangular(&diff)
                .unwrap_or_else(|| DVector::from_element(diff.len(), f64::INFINITY));
            logp[j] = log_norm[j] - 0.5 * y.norm_squared();
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logp.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        ll += lse;
        for j in 0..k {
            resp[(i, j)] = (logp[j] - lse).exp();
        }
    }
    (ll, trace_inv)
}
