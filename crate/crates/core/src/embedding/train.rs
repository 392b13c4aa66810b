use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{composite_loss, composite_loss_with_grad, LossBreakdown, LossConfig};
use super::TrainState;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::signal::Spectrogram;

/// Flattened spectrograms with internal class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: labels.len(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_spectrograms<'a>(
        items: impl IntoIterator<Item = (&'a Spectrogram, usize)>,
        input_dims: (usize, usize),
    ) -> Result<Self> {
        let width = input_dims.0 * input_dims.1;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (spec, label) in items {
            if spec.dims() != input_dims {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: spec.n_frames() * spec.n_bins(),
                });
            }
            data.extend(spec.values.iter().map(|&v| f64::from(v)));
            labels.push(label);
        }
        let inputs = Array2::from_shape_vec((labels.len(), width), data)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub breakdown: LossBreakdown,
    pub parameters: Vec<f64>,
    pub centers: Array2<f64>,
}

/// Loss over a batch without gradients.
pub fn batch_loss(
    state: &TrainState,
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let fwd = state.forward(inputs);
    composite_loss(
        fwd.embeddings.view(),
        fwd.logits.view(),
        labels,
        state.class_centers.view(),
        cfg,
    )
}

/// Loss and analytic gradient over encoder, head and centers.
pub fn loss_and_gradient(
    state: &TrainState,
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<Gradients> {
    if inputs.ncols() != state.config.input_len() {
        return Err(Error::DimensionMismatch {
            expected: state.config.input_len(),
            got: inputs.ncols(),
        });
    }
    let fwd = state.forward(inputs);
    let g = composite_loss_with_grad(
        fwd.embeddings.view(),
        fwd.logits.view(),
        labels,
        state.class_centers.view(),
        cfg,
    )?;
    let parameters = state.backward(&fwd, &g.embeddings, &g.logits);
    Ok(Gradients {
        breakdown: g.breakdown,
        parameters,
        centers: g.centers,
    })
}

/// One Adam update with bias correction.
pub fn apply_adam(state: &mut TrainState, grads: &Gradients, lr: f64) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let opt = &mut state.optimizer;
    let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (((p, m), v), &g) in state
        .parameters
        .iter_mut()
        .zip(opt.m_params.iter_mut())
        .zip(opt.v_params.iter_mut())
        .zip(&grads.parameters)
    {
        update(p, m, v, g);
    }
    for (((p, m), v), &g) in state
        .class_centers
        .iter_mut()
        .zip(opt.m_centers.iter_mut())
        .zip(opt.v_centers.iter_mut())
        .zip(grads.centers.iter())
    {
        update(p, m, v, g);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    /// Batch-size weighted mean of the per-batch losses.
    pub loss: LossBreakdown,
    pub batches: usize,
    pub step_count: u64,
}

/// Seeded shuffle split into consecutive batches.
pub fn shuffled_batches(n: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Class-balanced batches: every class is cycled up to the size of the
/// largest class and the classes are interleaved round-robin, so each batch
/// carries near-equal class proportions.
pub fn balanced_batches(labels: &[usize], batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        per_class[y].push(i);
    }
    per_class.retain(|v| !v.is_empty());
    for members in &mut per_class {
        members.shuffle(&mut rng);
    }
    let target = per_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::with_capacity(target * per_class.len());
    for r in 0..target {
        for members in &per_class {
            order.push(members[r % members.len()]);
        }
    }
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Runs one pass of Adam updates over the given batches.
pub fn train_batches(
    state: &mut TrainState,
    data: &Dataset,
    batches: &[Vec<usize>],
    cfg: &LossConfig,
    lr: f64,
) -> Result<EpochSummary> {
    if batches.iter().all(Vec::is_empty) {
        return Err(Error::EmptyInput("no training batches"));
    }
    let mut acc = [0.0; 4];
    let mut seen = 0usize;
    let mut count = 0usize;
    for (bi, batch) in batches.iter().enumerate().filter(|(_, b)| !b.is_empty()) {
        let inputs = data.inputs.select(Axis(0), batch);
        let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
        let grads = loss_and_gradient(state, inputs.view(), &labels, cfg)?;
        if let Some(term) = grads.breakdown.first_non_finite() {
            return Err(Error::NonFinite(format!("{term} at batch {bi}")));
        }
        apply_adam(state, &grads, lr);
        let w = batch.len() as f64;
        let b = grads.breakdown;
        for (a, v) in acc
            .iter_mut()
            .zip([b.total, b.center, b.separation, b.cross_entropy])
        {
            *a += w * v;
        }
        seen += batch.len();
        count += 1;
    }
    let n = seen as f64;
    Ok(EpochSummary {
        loss: LossBreakdown {
            total: acc[0] / n,
            center: acc[1] / n,
            separation: acc[2] / n,
            cross_entropy: acc[3] / n,
        },
        batches: count,
        step_count: state.step_count,
    })
}

/// One epoch over `data` in seeded shuffled order.
pub fn train_epoch(
    state: &mut TrainState,
    data: &Dataset,
    cfg: &LossConfig,
    lr: f64,
    batch_size: usize,
    shuffle_seed: u64,
) -> Result<EpochSummary> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training data is empty"));
    }
    let batches = shuffled_batches(data.len(), batch_size, shuffle_seed);
    train_batches(state, data, &batches, cfg, lr)
}

/// Per-class mean of `embeddings`; classes without samples keep `fallback`.
pub fn class_means(
    embeddings: ArrayView2<'_, f64>,
    labels: &[usize],
    fallback: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(fallback.raw_dim());
    let mut counts = vec![0usize; fallback.nrows()];
    for (row, &y) in embeddings.rows().into_iter().zip(labels) {
        sums.row_mut(y).scaled_add(1.0, &row);
        counts[y] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(c).mapv_inplace(|v| v / n as f64);
        } else {
            sums.row_mut(c).assign(&fallback.row(c));
        }
    }
    sums
}

/// Warm-up epoch with cross-entropy only, then centers set to the class means
/// of the resulting embeddings.
pub fn warmup_and_init_centers(
    state: &mut TrainState,
    data: &Dataset,
    lr: f64,
    batch_size: usize,
    shuffle_seed: u64,
) -> Result<EpochSummary> {
    let summary = train_epoch(
        state,
        data,
        &LossConfig::cross_entropy_only(),
        lr,
        batch_size,
        shuffle_seed,
    )?;
    let z = state.embed_batch(data.inputs.view())?;
    state.class_centers = class_means(z.view(), &data.labels, state.class_centers.view());
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Total epochs including the cross-entropy warm-up epoch.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 1e-4,
            batch_size: 64,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "training epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        self.loss.validate()
    }
}

/// Base training: one warm-up epoch, then `epochs - 1` composite-loss
/// epochs. Epoch `e` shuffles with `derive_seed(seed, "epoch/{e}")`.
pub fn train_model(
    state: &mut TrainState,
    data: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<EpochSummary>> {
    cfg.validate()?;
    let mut history = Vec::with_capacity(cfg.epochs);
    history.push(warmup_and_init_centers(
        state,
        data,
        cfg.learning_rate,
        cfg.batch_size,
        derive_seed(seed, "epoch/0"),
    )?);
    for e in 1..cfg.epochs {
        history.push(train_epoch(
            state,
            data,
            &cfg.loss,
            cfg.learning_rate,
            cfg.batch_size,
            derive_seed(seed, &format!("epoch/{e}")),
        )?);
    }
    Ok(history)
}
