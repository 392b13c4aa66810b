use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::NMin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedSample {
    pub input: Vec<f64>,
    pub embedding: Vec<f64>,
    pub arrival: u64,
    pub truth: Option<String>,
}

/// Rejected stream samples awaiting discovery.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownBuffer {
    pub trigger: NMin,
    entries: Vec<BufferedSample>,
}

impl UnknownBuffer {
    pub fn new(trigger: NMin) -> Self {
        Self {
            trigger,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: BufferedSample) {
        self.entries.push(sample);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.trigger.reached(self.entries.len())
    }

    pub fn entries(&self) -> &[BufferedSample] {
        &self.entries
    }

    /// `N × D` matrix of buffered embeddings.
    pub fn embeddings(&self) -> Array2<f64> {
        let d = self.entries.first().map_or(0, |e| e.embedding.len());
        Array2::from_shape_fn((self.entries.len(), d), |(i, j)| {
            self.entries[i].embedding[j]
        })
    }

    /// Truth labels, only if every entry carries one.
    pub fn truth(&self) -> Option<Vec<String>> {
        self.entries.iter().map(|e| e.truth.clone()).collect()
    }

    pub fn drain(&mut self) -> Vec<BufferedSample> {
        std::mem::take(&mut self.entries)
    }
}
