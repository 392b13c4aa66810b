use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clusterer::{ClusterFit, ClustererRegistry};
use super::config::DiscoveryConfig;
use super::elbow::{best_by_k, detect_elbow, select_k, SelectionRule};
use super::filter::{filter_clusters, AcceptedCluster, ClusterVerdict};
use super::preprocess::preprocess;
use super::validity::{pairwise_distances, validity_scores, ValidityScores};
use crate::error::{Error, ErrorKind, Result};
use crate::linalg::column_mean;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_samples: usize,
    pub input_dim: usize,
    pub reduced_dim: usize,
    pub pca_applied: bool,
    pub k_elbow: Option<usize>,
    pub elbow_flat: bool,
    pub k_score: usize,
    pub k_star: usize,
    pub rule: SelectionRule,
    pub chosen_model: Option<String>,
    pub per_k: Vec<ValidityScores>,
    /// Cluster per input sample under the chosen model; empty when `k_star = 0`.
    pub labels: Vec<usize>,
    pub clusters: Vec<ClusterVerdict>,
    pub accepted_clusters: Vec<AcceptedCluster>,
    pub notes: Vec<String>,
}

impl ClusterReport {
    fn empty(n: usize, d: usize, note: String) -> Self {
        Self {
            n_samples: n,
            input_dim: d,
            reduced_dim: d,
            pca_applied: false,
            k_elbow: None,
            elbow_flat: false,
            k_score: 0,
            k_star: 0,
            rule: SelectionRule::NoDiscovery,
            chosen_model: None,
            per_k: Vec::new(),
            labels: Vec::new(),
            clusters: Vec::new(),
            accepted_clusters: Vec::new(),
            notes: vec![note],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per (k, model) fit.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from(
            "k,model,silhouette,calinski_harabasz,davies_bouldin,explained_variance,composite,inertia\n",
        );
        for s in &self.per_k {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.k,
                s.model,
                s.silhouette,
                s.calinski_harabasz,
                s.davies_bouldin,
                s.explained_variance,
                s.composite,
                s.inertia
            );
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_scores_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.scores_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Runs discovery with the default clustering strategies.
pub fn discover(
    z: ArrayView2<'_, f64>,
    truth: Option<&[String]>,
    cfg: &DiscoveryConfig,
) -> Result<ClusterReport> {
    discover_with(&ClustererRegistry::default(), z, truth, cfg)
}

struct Candidate {
    model_rank: usize,
    fit: ClusterFit,
    scores: ValidityScores,
    silhouettes: Vec<f64>,
}

pub fn discover_with(
    registry: &ClustererRegistry,
    z: ArrayView2<'_, f64>,
    truth: Option<&[String]>,
    cfg: &DiscoveryConfig,
) -> Result<ClusterReport> {
    cfg.validate()?;
    let (n, d) = z.dim();
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
    }
    let models = cfg
        .models
        .iter()
        .map(|m| registry.get(m))
        .collect::<Result<Vec<_>>>()?;
    if n < cfg.min_samples.max(3) {
        return Ok(ClusterReport::empty(
            n,
            d,
            format!("{n} samples are too few to cluster"),
        ));
    }
    let pre = preprocess(z, cfg.pca_threshold_dim)?;
    let x = pre.data.view();
    let k_hi = cfg.k_max.min(n - 1);
    let dist = pairwise_distances(x);

    let per_k_fits: Vec<Result<(Vec<Candidate>, Vec<String>)>> = (2..=k_hi)
        .into_par_iter()
        .map(|k| {
            let mut found = Vec::new();
            let mut notes = Vec::new();
            for (rank, model) in models.iter().enumerate() {
                let seed = derive_seed(cfg.seed, &format!("{}/k={k}", model.name()));
                let scored = model.fit(x, k, cfg, seed).and_then(|fit| {
                    let (scores, silhouettes) =
                        validity_scores(x, dist.view(), &fit.labels, fit.inertia, model.name())?;
                    Ok(Candidate {
                        model_rank: rank,
                        fit,
                        scores: ValidityScores { k, ..scores },
                        silhouettes,
                    })
                });
                match scored {
                    Ok(c) if c.scores.composite.is_finite() => found.push(c),
                    Ok(_) => notes.push(format!(
                        "{} k={k}: non-finite composite, skipped",
                        model.name()
                    )),
                    Err(e)
                        if matches!(e, Error::InvalidArgument(_))
                            || e.kind() == ErrorKind::Numerical =>
                    {
                        notes.push(format!("{} k={k}: {e}, skipped", model.name()));
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((found, notes))
        })
        .collect();

    let mut candidates = Vec::new();
    let mut notes = Vec::new();
    for r in per_k_fits {
        let (c, n) = r?;
        candidates.extend(c);
        notes.extend(n);
    }
    let per_k: Vec<ValidityScores> = candidates.iter().map(|c| c.scores.clone()).collect();
    let mut report = ClusterReport {
        reduced_dim: x.ncols(),
        pca_applied: pre.pca.is_some(),
        per_k: per_k.clone(),
        notes: Vec::new(),
        ..ClusterReport::empty(n, d, String::new())
    };
    report.notes = notes;

    let best = best_by_k(&per_k);
    if best.is_empty() {
        report.notes.push("no candidate k could be scored".into());
        return Ok(report);
    }
    if best.iter().all(|&(_, q)| q < cfg.q_min) {
        report
            .notes
            .push(format!("every composite score is below {}", cfg.q_min));
        return Ok(report);
    }

    // Elbow on the first configured model's inertia, with k = 1 as the
    // total sum of squares.
    let tss = (&x - &column_mean(x)).mapv(|v| v * v).sum();
    let mut ks = vec![1];
    let mut inertia = vec![tss];
    for c in candidates.iter().filter(|c| c.model_rank == 0) {
        ks.push(c.scores.k);
        inertia.push(c.fit.inertia);
    }
    let elbow = match detect_elbow(&ks, &inertia) {
        Ok(e) => {
            if e.flat {
                report.notes.push("inertia curve has no elbow".into());
            }
            report.elbow_flat = e.flat;
            Some(e.k)
        }
        Err(e) => {
            report.notes.push(format!("elbow unavailable: {e}"));
            None
        }
    };
    let selection = select_k(&per_k, elbow, cfg.elbow_tolerance)?;
    report.k_elbow = selection.k_elbow;
    report.k_score = selection.k_score;
    report.k_star = selection.k_star;
    report.rule = selection.rule;

    let chosen = candidates
        .iter()
        .filter(|c| c.scores.k == selection.k_star)
        .fold(None, |best: Option<&Candidate>, c| match best {
            Some(b) if b.scores.composite >= c.scores.composite => Some(b),
            _ => Some(c),
        })
        .expect("k_star comes from a scored candidate");
    let proxy: Vec<f64> = match &chosen.fit.confidence {
        Some(conf) => conf.clone(),
        None => chosen.silhouettes.iter().map(|s| (s + 1.0) / 2.0).collect(),
    };
    let (verdicts, accepted) = filter_clusters(&chosen.fit.labels, truth, &proxy, cfg)?;
    report.chosen_model = Some(chosen.scores.model.clone());
    report.labels = chosen.fit.labels.clone();
    report.clusters = verdicts;
    report.accepted_clusters = accepted;
    Ok(report)
}
