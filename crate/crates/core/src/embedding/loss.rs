//! Composite feature loss: center compactness, center-margin separation and
//! cross-entropy, weighted by `eta1`, `eta2`, `eta3`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    /// Minimum distance between class centers before the separation hinge
    /// stops contributing.
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            eta1: 0.5,
            eta2: 0.3,
            eta3: 0.2,
            margin: 1.0,
        }
    }
}

impl LossConfig {
    pub fn cross_entropy_only() -> Self {
        Self {
            eta1: 0.0,
            eta2: 0.0,
            eta3: 1.0,
            margin: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("eta3", self.eta3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "margin must be >= 0, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub center: f64,
    pub separation: f64,
    pub cross_entropy: f64,
}

impl LossBreakdown {
    pub fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("L_cen", self.center),
            ("L_sep", self.separation),
            ("L_CE", self.cross_entropy),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// Loss value and its gradients with respect to the loss inputs.
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub breakdown: LossBreakdown,
    pub embeddings: Array2<f64>,
    pub logits: Array2<f64>,
    pub centers: Array2<f64>,
}

/// Evaluates the composite loss.
///
/// - `L_cen` is the mean over samples of `||z_i - c_{y_i}||^2`.
/// - `L_sep` is the mean over distinct class pairs present in the batch of
///   `max(0, margin - ||c_a - c_b||)^2` (zero with fewer than two classes).
/// - `L_CE` is the mean negative log-softmax of the true class.
pub fn composite_loss(
    embeddings: ArrayView2<'_, f64>,
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    centers: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    composite_loss_with_grad(embeddings, logits, labels, centers, cfg).map(|g| g.breakdown)
}

pub fn composite_loss_with_grad(
    embeddings: ArrayView2<'_, f64>,
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    centers: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<LossGradients> {
    let b = labels.len();
    if b == 0 {
        return Err(Error::EmptyInput("loss batch is empty"));
    }
    let n_classes = centers.nrows();
    if embeddings.nrows() != b || logits.nrows() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            got: embeddings.nrows().min(logits.nrows()),
        });
    }
    if logits.ncols() != n_classes {
        return Err(Error::DimensionMismatch {
            expected: n_classes,
            got: logits.ncols(),
        });
    }
    if embeddings.ncols() != centers.ncols() {
        return Err(Error::DimensionMismatch {
            expected: centers.ncols(),
            got: embeddings.ncols(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::UnknownLabel(bad.to_string()));
    }
    let bf = b as f64;

    let mut g_z = Array2::zeros(embeddings.raw_dim());
    let mut g_c = Array2::zeros(centers.raw_dim());
    let mut g_logits = Array2::zeros(logits.raw_dim());

    let mut center = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let diff = &embeddings.row(i) - &centers.row(y);
        center += diff.dot(&diff);
        let g = diff.mapv(|v| cfg.eta1 * 2.0 * v / bf);
        g_z.row_mut(i).scaled_add(1.0, &g);
        g_c.row_mut(y).scaled_add(-1.0, &g);
    }
    center /= bf;

    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let n_pairs = present.len() * present.len().saturating_sub(1) / 2;
    let mut separation = 0.0;
    if n_pairs > 0 {
        let pf = n_pairs as f64;
        for (ai, &a) in present.iter().enumerate() {
            for &c in &present[ai + 1..] {
                let diff = &centers.row(a) - &centers.row(c);
                let dist = diff.dot(&diff).sqrt();
                let gap = cfg.margin - dist;
                if gap > 0.0 {
                    separation += gap * gap;
                    // d/dc_a of gap^2 = -2 gap (c_a - c_c) / dist; zero at coincidence.
                    if dist > 0.0 {
                        let scale = cfg.eta2 * -2.0 * gap / (dist * pf);
                        g_c.row_mut(a).scaled_add(scale, &diff);
                        g_c.row_mut(c).scaled_add(-scale, &diff);
                    }
                }
            }
        }
        separation /= pf;
    }

    let mut cross_entropy = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_norm = max + sum.ln();
        cross_entropy += log_norm - row[y];
        for (k, &v) in row.iter().enumerate() {
            let p = (v - log_norm).exp();
            let target = if k == y { 1.0 } else { 0.0 };
            g_logits[(i, k)] = cfg.eta3 * (p - target) / bf;
        }
    }
    cross_entropy /= bf;

    let total = cfg.eta1 * center + cfg.eta2 * separation + cfg.eta3 * cross_entropy;
    Ok(LossGradients {
        breakdown: LossBreakdown {
            total,
            center,
            separation,
            cross_entropy,
        },
        embeddings: g_z,
        logits: g_logits,
        centers: g_c,
    })
}
