use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{DiscoveryConfig, PurityMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityKind {
    Truth,
    Proxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVerdict {
    pub cluster: usize,
    pub size: usize,
    pub purity: f64,
    pub purity_kind: PurityKind,
    pub majority_truth: Option<String>,
    pub accepted: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedCluster {
    pub cluster: usize,
    pub members: Vec<usize>,
    pub purity: f64,
    pub purity_kind: PurityKind,
    pub majority_truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Majority {
    /// `None` when two or more labels share the top count.
    pub label: Option<String>,
    pub count: usize,
}

/// Most frequent label of a non-empty sequence.
pub fn majority_label<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<Majority> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let count = counts.values().copied().max()?;
    let mut top = counts
        .iter()
        .filter(|(_, &c)| c == count)
        .map(|(l, _)| l.to_string());
    let label = top.next().filter(|_| top.next().is_none());
    Some(Majority { label, count })
}

/// Applies the purity and size bounds to every cluster of a partition.
///
/// Truth purity (the majority fraction) is used when `cfg.purity_mode` asks
/// for it and `truth` is available; otherwise purity is the cluster mean of
/// `proxy_scores`. The majority truth label is recorded whenever `truth` is
/// given.
pub fn filter_clusters(
    labels: &[usize],
    truth: Option<&[String]>,
    proxy_scores: &[f64],
    cfg: &DiscoveryConfig,
) -> Result<(Vec<ClusterVerdict>, Vec<AcceptedCluster>)> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("cluster filter needs labels"));
    }
    if proxy_scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: proxy_scores.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: t.len(),
            });
        }
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let use_truth = cfg.purity_mode == PurityMode::Truth && truth.is_some();
    let mut verdicts = Vec::new();
    let mut accepted = Vec::new();
    for (cluster, idx) in members.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let majority = truth.and_then(|t| majority_label(idx.iter().map(|&i| t[i].as_str())));
        let (purity, purity_kind) = match (&majority, use_truth) {
            (Some(m), true) => (m.count as f64 / idx.len() as f64, PurityKind::Truth),
            _ => (
                idx.iter().map(|&i| proxy_scores[i]).sum::<f64>() / idx.len() as f64,
                PurityKind::Proxy,
            ),
        };
        let size = idx.len();
        let reason = if size < cfg.s_min || size > cfg.s_max {
            Some(format!(
                "size {size} outside [{}, {}]",
                cfg.s_min, cfg.s_max
            ))
        } else if purity < cfg.tau_p {
            Some(format!("purity {purity:.4} below {}", cfg.tau_p))
        } else {
            None
        };
        let majority_truth = majority.and_then(|m| m.label);
        if reason.is_none() {
            accepted.push(AcceptedCluster {
                cluster,
                members: idx,
                purity,
                purity_kind,
                majority_truth: majority_truth.clone(),
            });
        }
        verdicts.push(ClusterVerdict {
            cluster,
            size,
            purity,
            purity_kind,
            majority_truth,
            accepted: reason.is_none(),
            reason,
        });
    }
    Ok((verdicts, accepted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: PurityMode, s_min: usize, tau_p: f64) -> DiscoveryConfig {
        DiscoveryConfig {
            purity_mode: mode,
            s_min,
            tau_p,
            ..DiscoveryConfig::default()
        }
    }

    #[test]
    fn impure_cluster_is_rejected() {
        let truth: Vec<String> = ["A", "A", "B"].iter().map(|s| s.to_string()).collect();
        let (v, acc) = filter_clusters(
            &[0, 0, 0],
            Some(&truth),
            &[1.0; 3],
            &cfg(PurityMode::Truth, 1, 0.7),
        )
        .unwrap();
        assert!((v[0].purity - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(v[0].purity_kind, PurityKind::Truth);
        assert!(acc.is_empty());
        assert_eq!(v[0].majority_truth.as_deref(), Some("A"));
    }

    #[test]
    fn small_cluster_is_rejected_regardless_of_purity() {
        let (v, acc) =
            filter_clusters(&[0, 0, 0], None, &[1.0; 3], &cfg(PurityMode::Proxy, 5, 0.1)).unwrap();
        assert!(!v[0].accepted && acc.is_empty());
    }

    #[test]
    fn confident_gmm_members_pass_proxy() {
        let scores = [0.995, 0.999, 0.991, 1.0, 0.993, 0.2, 0.3, 0.25, 0.9, 0.1];
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let (v, acc) =
            filter_clusters(&labels, None, &scores, &cfg(PurityMode::Proxy, 5, 0.9)).unwrap();
        assert!(v[0].purity >= 0.99 && v[0].accepted);
        assert_eq!(acc.len(), 1);
        assert_eq!(acc[0].members, vec![0, 1, 2, 3, 4]);
        assert_eq!(v[1].purity_kind, PurityKind::Proxy);
        assert!(!v[1].accepted);
    }

    #[test]
    fn tied_majority_has_no_label() {
        let m = majority_label(["b", "a", "b", "a"]).unwrap();
        assert_eq!((m.label, m.count), (None, 2));
        let m = majority_label(["b", "a", "b"]).unwrap();
        assert_eq!((m.label.as_deref(), m.count), (Some("b"), 2));
        assert_eq!(majority_label(Vec::<&str>::new()), None);
    }
}
