use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discovery::{majority_label, ClusterReport};
use crate::embedding::ClassRegistry;
use crate::error::{Error, Result};

/// Column label for rejected samples.
pub const UNKNOWN: &str = "UNKNOWN";

/// Counts with truth labels as rows. Columns are the row labels (predictions
/// mapped to the truth label they stand for), then discovered classes with
/// no matching truth, then [`UNKNOWN`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.rows.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn unknown_column(&self) -> Vec<u64> {
        let c = self.columns.len() - 1;
        self.counts.iter().map(|r| r[c]).collect()
    }

    /// Row-normalized fractions; empty rows stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| {
                let t: u64 = r.iter().sum();
                r.iter()
                    .map(|&v| if t > 0 { v as f64 / t as f64 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, row) in self.rows.iter().zip(&self.counts) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k_star: usize,
    pub chosen_model: Option<String>,
    pub accepted_clusters: usize,
    /// Truth purity of the whole partition, when labels were available.
    pub purity: Option<f64>,
}

impl ClusteringSummary {
    pub fn from_report(report: &ClusterReport, truth: Option<&[String]>) -> Self {
        Self {
            k_star: report.k_star,
            chosen_model: report.chosen_model.clone(),
            accepted_clusters: report.accepted_clusters.len(),
            purity: truth
                .filter(|_| !report.labels.is_empty())
                .and_then(|t| cluster_purity(&report.labels, t).ok()),
        }
    }
}

/// Percentages are in `[0, 100]`; an accuracy over an empty group is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub n_old: usize,
    pub n_new: usize,
    pub acc_old: Option<f64>,
    pub acc_new: Option<f64>,
    pub overall_accuracy: f64,
    pub rejection_rate_known: Option<f64>,
    pub rejection_rate_unknown: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub clustering: Option<ClusteringSummary>,
    pub wall_time: Option<f64>,
}

impl EvalReport {
    /// One-line summary with percentages to one decimal.
    pub fn summary(&self) -> String {
        let p = |v: Option<f64>| {
            v.map_or_else(|| "n/a".to_string(), |v| format!("{}%", format_percent(v)))
        };
        format!(
            "Acc_old {} Acc_new {} overall {}% rejected known {} rejected unknown {}",
            p(self.acc_old),
            p(self.acc_new),
            format_percent(self.overall_accuracy),
            p(self.rejection_rate_known),
            p(self.rejection_rate_unknown)
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn format_percent(v: f64) -> String {
    format!("{v:.1}")
}

/// Fraction of samples that share their cluster's majority truth label.
pub fn cluster_purity(labels: &[usize], truth: &[String]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: truth.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("purity of an empty partition"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let hits: usize = (0..k)
        .filter_map(|c| {
            majority_label(
                labels
                    .iter()
                    .zip(truth)
                    .filter(|(&l, _)| l == c)
                    .map(|(_, t)| t.as_str()),
            )
        })
        .map(|m| m.count)
        .sum();
    Ok(hits as f64 / labels.len() as f64)
}

/// Scores predictions (`None` = rejected) against truth labels.
///
/// A sample is old if its truth is an original class, new otherwise. A
/// prediction is correct when the predicted class stands for the sample's
/// truth: an original class by name, a discovered class by the unique
/// majority truth of its cluster. A discovered class whose majority is an
/// original class duplicates that class and is never counted as correct;
/// it gets its own confusion column.
pub fn score_session(
    predictions: &[Option<usize>],
    truth: &[String],
    classes: &ClassRegistry,
) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if let Some(bad) = predictions.iter().flatten().find(|&&c| c >= classes.len()) {
        return Err(Error::InvalidArgument(format!(
            "prediction {bad} outside the {}-class registry",
            classes.len()
        )));
    }
    let originals: Vec<String> = classes.original_labels();
    let is_old = |t: &str| originals.iter().any(|o| o == t);

    let mut rows = originals.clone();
    let extra: BTreeSet<&str> = truth
        .iter()
        .map(String::as_str)
        .filter(|t| !is_old(t))
        .collect();
    rows.extend(extra.iter().map(|t| t.to_string()));
    let row_of = |t: &str| rows.iter().position(|r| r == t);

    let mut columns = rows.clone();
    let mut col_of_class = Vec::with_capacity(classes.len());
    for entry in classes.entries() {
        let target = entry
            .truth_label()
            .filter(|t| entry.is_original() || !is_old(t));
        let col = match target.and_then(row_of) {
            Some(c) => c,
            None => {
                columns.push(entry.name.clone());
                columns.len() - 1
            }
        };
        col_of_class.push(col);
    }
    columns.push(UNKNOWN.to_string());
    let unknown_col = columns.len() - 1;

    let mut counts = vec![vec![0u64; columns.len()]; rows.len()];
    let (mut n_old, mut n_new, mut ok_old, mut ok_new, mut rej_old, mut rej_new) =
        (0, 0, 0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truth) {
        let r = row_of(t).expect("every truth label has a row");
        let c = p.map_or(unknown_col, |c| col_of_class[c]);
        counts[r][c] += 1;
        let correct = c == r;
        if is_old(t) {
            n_old += 1;
            ok_old += usize::from(correct);
            rej_old += usize::from(p.is_none());
        } else {
            n_new += 1;
            ok_new += usize::from(correct);
            rej_new += usize::from(p.is_none());
        }
    }
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    let n = predictions.len();
    Ok(EvalReport {
        n_samples: n,
        n_old,
        n_new,
        acc_old: pct(ok_old, n_old),
        acc_new: pct(ok_new, n_new),
        overall_accuracy: pct(ok_old + ok_new, n).unwrap_or(0.0),
        rejection_rate_known: pct(rej_old, n_old),
        rejection_rate_unknown: pct(rej_new, n_new),
        confusion: ConfusionMatrix {
            rows,
            columns,
            counts,
        },
        clustering: None,
        wall_time: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{ClassEntry, ClassOrigin};

    fn registry(novel: &[(&str, Option<&str>)]) -> ClassRegistry {
        let mut r = ClassRegistry::from_labels(&["a", "b"]).unwrap();
        for (i, (name, truth)) in novel.iter().enumerate() {
            r.push(ClassEntry {
                name: name.to_string(),
                origin: ClassOrigin::Discovered {
                    session: 0,
                    cluster: i,
                    majority_truth: truth.map(str::to_string),
                },
            })
            .unwrap();
        }
        r
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn perfect_predictions() {
        let reg = registry(&[("novel-0-0", Some("x"))]);
        let truth = s(&["a", "b", "x", "x"]);
        let r = score_session(&[Some(0), Some(1), Some(2), Some(2)], &truth, &reg).unwrap();
        assert_eq!((r.acc_old, r.acc_new), (Some(100.0), Some(100.0)));
        assert_eq!(r.confusion.trace(), 4);
        assert_eq!(r.confusion.columns, s(&["a", "b", "x", UNKNOWN]));
    }

    #[test]
    fn forgetting_shape() {
        let reg = registry(&[("novel-0-0", Some("x"))]);
        let truth = s(&["a", "b", "a", "x"]);
        let r = score_session(&[Some(2), Some(2), Some(2), Some(2)], &truth, &reg).unwrap();
        assert_eq!(r.acc_old, Some(0.0));
        assert_eq!(r.acc_new, Some(100.0));
    }

    #[test]
    fn rediscovered_old_class_is_not_credited() {
        let reg = registry(&[("novel-0-0", Some("a"))]);
        let truth = s(&["a", "a"]);
        let r = score_session(&[Some(2), Some(0)], &truth, &reg).unwrap();
        assert_eq!(r.acc_old, Some(50.0));
        assert_eq!(r.confusion.columns, s(&["a", "b", "novel-0-0", UNKNOWN]));
        assert_eq!(r.confusion.counts[0], vec![1, 0, 1, 0]);
    }

    #[test]
    fn unmatched_cluster_gets_its_own_column() {
        let reg = registry(&[("novel-0-0", None)]);
        let truth = s(&["x", "x", "a"]);
        let r = score_session(&[Some(2), None, None], &truth, &reg).unwrap();
        assert_eq!(
            r.confusion.columns,
            s(&["a", "b", "x", "novel-0-0", UNKNOWN])
        );
        assert_eq!(r.acc_new, Some(0.0));
        assert_eq!(r.rejection_rate_unknown, Some(50.0));
        assert_eq!(r.rejection_rate_known, Some(100.0));
        assert_eq!(r.confusion.unknown_column(), vec![1, 0, 1]);
    }

    #[test]
    fn summary_uses_one_decimal() {
        let reg = registry(&[]);
        let r = score_session(&[Some(0), Some(1), None], &s(&["a", "a", "a"]), &reg).unwrap();
        assert!(r.summary().starts_with("Acc_old 33.3% Acc_new n/a"));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(score_session(&[None], &[], &registry(&[])).is_err());
    }

    #[test]
    fn partition_purity() {
        let p = cluster_purity(&[0, 0, 0, 1, 1], &s(&["a", "a", "b", "c", "c"])).unwrap();
        assert!((p - 0.8).abs() < 1e-12);
    }
}
