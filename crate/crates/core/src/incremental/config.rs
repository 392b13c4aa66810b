use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Discovery trigger size. `Never` disables discovery entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NMin {
    At(usize),
    Never,
}

impl NMin {
    pub fn reached(self, len: usize) -> bool {
        match self {
            NMin::At(n) => len >= n,
            NMin::Never => false,
        }
    }

    pub fn below(self, len: usize) -> bool {
        !self.reached(len)
    }
}

impl fmt::Display for NMin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NMin::At(n) => write!(f, "{n}"),
            NMin::Never => f.write_str("never"),
        }
    }
}

impl FromStr for NMin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "never" | "inf" => Ok(NMin::Never),
            other => other.parse().map(NMin::At).map_err(|_| {
                Error::Config(format!(
                    "n_min must be an integer or \"never\", got `{other}`"
                ))
            }),
        }
    }
}

impl Serialize for NMin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NMin::At(n) => s.serialize_u64(*n as u64),
            NMin::Never => s.serialize_str("never"),
        }
    }
}

impl<'de> Deserialize<'de> for NMin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(NMin::At(n as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncrementalConfig {
    pub n_min: NMin,
    /// Exemplars kept per old class; 0 disables replay.
    pub old_max: usize,
    /// Samples taken per new cluster, nearest its centroid first.
    pub new_max: usize,
    /// Total replay memory capacity.
    pub m_max: usize,
    /// Optimizer step ceiling for one update.
    pub max_update_steps: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Early stop once the epoch loss has not improved by `min_delta` for
    /// `patience` epochs.
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for IncrementalConfig {
    fn default() -> Self {
        Self {
            n_min: NMin::At(100),
            old_max: 5,
            new_max: 60,
            m_max: 2000,
            max_update_steps: 20_000,
            epochs: 30,
            learning_rate: 1e-4,
            batch_size: 64,
            patience: 5,
            min_delta: 1e-4,
        }
    }
}

impl IncrementalConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("incremental: {m}")));
        if self.old_max == 1 {
            return err("old_max must be 0 or at least 2 (statistics need two exemplars)".into());
        }
        if self.new_max < 2 {
            return err(format!("new_max must be >= 2, got {}", self.new_max));
        }
        if let NMin::At(n) = self.n_min {
            if n < 2 {
                return err(format!("n_min must be >= 2, got {n}"));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return err("epochs, batch_size and patience must be positive".into());
        }
        if self.max_update_steps == 0 {
            return err("max_update_steps must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning_rate {} invalid", self.learning_rate));
        }
        if !(self.min_delta >= 0.0) {
            return err(format!("min_delta {} must be >= 0", self.min_delta));
        }
        Ok(())
    }

    /// Per-class exemplar cap with `n_classes` classes sharing the memory.
    pub fn per_class_cap(&self, n_classes: usize) -> usize {
        self.old_max.min(self.m_max / n_classes.max(1))
    }
}
