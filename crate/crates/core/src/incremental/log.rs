use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Decision {
        arrival: u64,
        predicted: Option<String>,
        nearest: String,
        distance: f64,
        tau: f64,
        truth: Option<String>,
    },
    DiscoveryTrigger {
        round: u32,
        buffer_size: usize,
        reason: String,
    },
    DiscoveryResult {
        round: u32,
        k_star: usize,
        chosen_model: Option<String>,
        accepted: usize,
        rejected: usize,
    },
    UpdateSummary {
        round: u32,
        new_classes: Vec<String>,
        old_samples: usize,
        new_samples: usize,
        epochs: usize,
        steps: u64,
        final_loss: f64,
        memory_total: usize,
        memory_max_per_class: usize,
    },
    Note {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// Append-only event log with monotone sequence numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn push(&mut self, event: SessionEvent) -> u64 {
        let seq = self.entries.len() as u64;
        self.entries.push(LogEntry { seq, event });
        seq
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.push(SessionEvent::Note {
            message: message.into(),
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<LogEntry>, _>>()?;
        Ok(Self { entries })
    }
}
