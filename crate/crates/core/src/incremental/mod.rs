//! Streaming session: open-set gating, unknown buffering, discovery and
//! replay-based model updates.
//!
//! Each stream sample is embedded with the current encoder and gated against
//! the per-class statistics. Rejected samples accumulate in an
//! [`UnknownBuffer`]; once it holds `n_min` entries, discovery runs on the
//! buffered embeddings and every accepted cluster becomes a new class. The
//! model is then fine-tuned on the new samples mixed with capped exemplars
//! from the [`ReplayMemory`], after which statistics are refit and the memory
//! refreshed.

mod buffer;
mod config;
mod log;
mod memory;
mod session;

pub use buffer::{BufferedSample, UnknownBuffer};
pub use config::{IncrementalConfig, NMin};
pub use log::{LogEntry, SessionEvent, SessionLog};
pub use memory::{select_exemplars, Exemplar, ReplayMemory};
pub use session::{
    assemble_update_set, fit_statistics, incremental_update, process_stream, BufferSnapshot,
    NewClassSamples, SessionState, StreamDecision, StreamSample, UpdateOutcome, UpdateSet,
};
