use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::column_mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    /// Flattened spectrogram, kept so the exemplar can be re-embedded after
    /// the encoder moves.
    pub input: Vec<f64>,
    pub embedding: Vec<f64>,
    pub arrival: u64,
    pub truth: Option<String>,
}

/// Indices of the `cap` rows nearest the row mean, nearest first; equal
/// distances keep arrival order.
pub fn select_exemplars(
    embeddings: ArrayView2<'_, f64>,
    arrivals: &[u64],
    cap: usize,
) -> Vec<usize> {
    if cap == 0 || embeddings.nrows() == 0 {
        return Vec::new();
    }
    let mean = column_mean(embeddings);
    let dist: Vec<f64> = embeddings
        .rows()
        .into_iter()
        .map(|r| (&r - &mean).mapv(|v| v * v).sum())
        .collect();
    let mut order: Vec<usize> = (0..embeddings.nrows()).collect();
    order.sort_by(|&a, &b| {
        dist[a]
            .total_cmp(&dist[b])
            .then(arrivals[a].cmp(&arrivals[b]))
    });
    order.truncate(cap);
    order
}

/// Per-class exemplar store bounded by a per-class cap and a total capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    pub per_class_cap: usize,
    pub capacity: usize,
    classes: Vec<Vec<Exemplar>>,
}

impl ReplayMemory {
    pub fn new(per_class_cap: usize, capacity: usize) -> Self {
        Self {
            per_class_cap,
            capacity,
            classes: Vec::new(),
        }
    }

    /// Replaces the exemplars of `class`. The caller is expected to respect
    /// the caps; [`ReplayMemory::check`] verifies them.
    pub fn set_class(&mut self, class: usize, exemplars: Vec<Exemplar>) {
        if self.classes.len() <= class {
            self.classes.resize_with(class + 1, Vec::new);
        }
        self.classes[class] = exemplars;
    }

    pub fn class(&self, class: usize) -> &[Exemplar] {
        self.classes.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn max_per_class(&self) -> usize {
        self.classes.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn check(&self) -> Result<()> {
        if self.total() > self.capacity {
            return Err(Error::MemoryBudget(format!(
                "{} exemplars stored, capacity {}",
                self.total(),
                self.capacity
            )));
        }
        if let Some((c, v)) = self
            .classes
            .iter()
            .enumerate()
            .find(|(_, v)| v.len() > self.per_class_cap)
        {
            return Err(Error::MemoryBudget(format!(
                "class {c} holds {} exemplars, cap {}",
                v.len(),
                self.per_class_cap
            )));
        }
        Ok(())
    }
}
