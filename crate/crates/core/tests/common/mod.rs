#![allow(dead_code)]

use ndarray::{Array1, Array2};
use owrf::discovery::DiscoveryConfig;
use owrf::embedding::{
    train_model, Activation, Checkpoint, ClassRegistry, Dataset, EncoderConfig, LossConfig,
    TrainConfig, TrainState,
};
use owrf::incremental::{fit_statistics, IncrementalConfig, SessionState, StreamSample};
use owrf::seed::rng_from_seed;
use rand_distr::{Distribution, Normal};

/// Input layout of the toy models: a 2×4 "spectrogram".
pub const DIMS: (usize, usize) = (2, 4);
pub const WIDTH: usize = DIMS.0 * DIMS.1;

/// `n` isotropic Gaussian draws around `center` with unit spread.
pub fn blob(center: &[f64], n: usize, sd: f64, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sd).unwrap();
    Array2::from_shape_fn((n, center.len()), |(_, j)| {
        center[j] + normal.sample(&mut rng)
    })
}

pub fn axis_center(axis: usize, scale: f64) -> Vec<f64> {
    let mut c = vec![0.0; WIDTH];
    c[axis] = scale;
    c
}

pub fn stack(parts: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).unwrap()
}

/// Three well separated known classes along the first three input axes.
pub fn known_data(per_class: usize, seed: u64) -> (Dataset, Vec<String>) {
    let parts: Vec<Array2<f64>> = (0..3)
        .map(|c| blob(&axis_center(c, 6.0), per_class, 0.5, seed + c as u64))
        .collect();
    let labels: Vec<usize> = (0..3)
        .flat_map(|c| std::iter::repeat_n(c, per_class))
        .collect();
    let truth = labels.iter().map(|&c| format!("k{c}")).collect();
    (Dataset::new(stack(&parts), labels).unwrap(), truth)
}

pub fn trained_checkpoint(seed: u64) -> (Checkpoint, Dataset, Vec<String>) {
    let (data, truth) = known_data(60, seed);
    let cfg = EncoderConfig {
        input_dims: DIMS,
        hidden_widths: vec![16],
        embed_dim: 4,
        activation: Activation::Relu,
        seed,
    };
    let mut state = TrainState::new(cfg, 3).unwrap();
    let train = TrainConfig {
        epochs: 30,
        learning_rate: 1e-2,
        batch_size: 30,
        loss: LossConfig::default(),
    };
    train_model(&mut state, &data, &train, seed).unwrap();
    let classes = ClassRegistry::from_labels(&["k0", "k1", "k2"]).unwrap();
    let stats = fit_statistics(&state, data.inputs.view(), &data.labels, &classes, 0.1).unwrap();
    (
        Checkpoint {
            state,
            classes,
            stats,
        },
        data,
        truth,
    )
}

pub fn session(config: IncrementalConfig, discovery: DiscoveryConfig, seed: u64) -> SessionState {
    let (ckpt, data, truth) = trained_checkpoint(seed);
    let memory = SessionState::initial_memory(&ckpt.state, &data, &truth, 3, &config).unwrap();
    SessionState::new(
        ckpt,
        memory,
        config,
        discovery,
        LossConfig::default(),
        0.1,
        seed,
    )
    .unwrap()
}

pub fn samples(x: &Array2<f64>, truth: &str) -> Vec<StreamSample> {
    x.rows()
        .into_iter()
        .map(|r| StreamSample {
            input: r.to_vec(),
            truth: Some(truth.to_string()),
        })
        .collect()
}

pub fn row(x: &[f64]) -> Array1<f64> {
    Array1::from(x.to_vec())
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = (0..n)
            .map(|i| a[(i, i)] * a[(i, i)])
            .sum::<f64>()
            .max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Population covariance computed with plain loops.
pub fn naive_covariance(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..n)
            .map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]))
            .sum::<f64>()
            / n as f64
    })
}

/// Smallest within-cluster sum of squares over every labeling of the rows
/// into `k` non-empty groups.
pub fn brute_force_inertia(x: &Array2<f64>, k: usize) -> f64 {
    let n = x.nrows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut used = vec![false; k];
        for &l in &labels {
            used[l] = true;
        }
        if used.iter().all(|&u| u) {
            let mut total = 0.0;
            for c in 0..k {
                let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                for j in 0..x.ncols() {
                    let m = idx.iter().map(|&i| x[(i, j)]).sum::<f64>() / idx.len() as f64;
                    total += idx.iter().map(|&i| (x[(i, j)] - m).powi(2)).sum::<f64>();
                }
            }
            best = best.min(total);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Small 2-D instances: N in 4..=10, k in 2..=3, a mix of blobs and uniform
/// scatter.
pub fn small_corpus() -> Vec<(Array2<f64>, usize)> {
    use rand::Rng;
    let mut rng = rng_from_seed(2024);
    let mut out = Vec::new();
    for case in 0..40 {
        let n = 4 + case % 7;
        let k = 2 + case % 2;
        let spread = if case % 3 == 0 { 10.0 } else { 2.0 };
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let anchor = (i % k) as f64 * 3.0;
            anchor + spread * (rng.random::<f64>() - 0.5)
        });
        out.push((x, k));
    }
    out
}
