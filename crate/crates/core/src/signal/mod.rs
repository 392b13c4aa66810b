//! Signal acquisition: synthetic emitter bursts, raw I/Q files and STFT
//! spectrograms.

mod cache;
mod iq;
mod stft;
mod synth;
mod window;

pub use cache::{read_spectrogram_cache, write_spectrogram_cache, CACHE_MAGIC, CACHE_VERSION};
pub use iq::{ingest_iq, read_manifest, write_iq, write_manifest, IqRecord, ManifestEntry};
pub use stft::{
    frame_count, frame_power_spectrum, stft_spectrogram, stft_with, Spectrogram, LOG_EPSILON,
};
pub use synth::{BurstComponents, BurstGenerator, SynthClassProfile};
pub use window::{Hann, Rectangular, Window, WindowRegistry};
