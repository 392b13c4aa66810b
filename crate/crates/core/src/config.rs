//! File-driven pipeline configuration.
//!
//! One TOML document holds every stage's settings. Unknown keys are errors.
//! All randomness is derived from the root `seed` with
//! [`derive_seed`](crate::seed::derive_seed); per-stage seed fields are
//! overwritten by the pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discovery::DiscoveryConfig;
use crate::embedding::{Activation, EncoderConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::incremental::IncrementalConfig;
use crate::seed::derive_seed;
use crate::signal::{frame_count, SynthClassProfile, WindowRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub signal: SignalConfig,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub openset: OpenSetConfig,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub incremental: IncrementalConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    pub sample_rate: f64,
    pub carrier_freq: f64,
    /// Record length in seconds.
    pub duration: f64,
    pub fft_size: usize,
    pub frame_hop: usize,
    pub window: String,
    /// One batch of records per class is generated at each SNR.
    pub snr_db: Vec<f64>,
    pub records_per_class: usize,
    /// Fractions of each known class's records used for training and
    /// testing; the rest feed the stream. Unknown classes only have test
    /// and stream records.
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub known: Vec<SynthClassProfile>,
    pub unknown: Vec<SynthClassProfile>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            sample_rate: 1.0e6,
            carrier_freq: 2.4e9,
            duration: 512e-6,
            fft_size: 32,
            frame_hop: 32,
            window: "hann".into(),
            snr_db: vec![20.0],
            records_per_class: 300,
            train_fraction: 0.6,
            test_fraction: 0.2,
            known: Vec::new(),
            unknown: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub hidden_widths: Vec<usize>,
    pub embed_dim: usize,
    pub activation: Activation,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            hidden_widths: vec![256, 128],
            embed_dim: 64,
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpenSetConfig {
    pub shrinkage: f64,
}

impl Default for OpenSetConfig {
    fn default() -> Self {
        Self { shrinkage: 0.1 }
    }
}

/// Optional artifact locations; by default everything lives under the run
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl SignalConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Spectrogram shape `(n_frames, n_bins)`.
    pub fn spectrogram_dims(&self) -> (usize, usize) {
        (
            frame_count(self.n_samples(), self.fft_size, self.frame_hop),
            self.fft_size,
        )
    }

    pub fn profiles(&self) -> impl Iterator<Item = (&SynthClassProfile, bool)> {
        self.known
            .iter()
            .map(|p| (p, true))
            .chain(self.unknown.iter().map(|p| (p, false)))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("signal: {m}")));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return err(format!("sample_rate {} must be positive", self.sample_rate));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return err(format!("duration {} must be positive", self.duration));
        }
        if self.fft_size == 0 || !self.fft_size.is_power_of_two() {
            return err(format!("fft_size {} is not a power of two", self.fft_size));
        }
        if self.frame_hop == 0 || self.frame_hop > self.fft_size {
            return err(format!(
                "frame_hop {} not in 1..={}",
                self.frame_hop, self.fft_size
            ));
        }
        if self.n_samples() < self.fft_size {
            return err(format!(
                "duration gives {} samples, fewer than fft_size {}",
                self.n_samples(),
                self.fft_size
            ));
        }
        WindowRegistry::default().get(&self.window)?;
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return err("snr_db must be a non-empty list of numbers".into());
        }
        if self.records_per_class == 0 {
            return err("records_per_class must be positive".into());
        }
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !frac_ok(self.train_fraction)
            || !frac_ok(self.test_fraction)
            || self.train_fraction + self.test_fraction > 1.0
        {
            return err(
                "train_fraction and test_fraction must be in [0, 1] and sum to at most 1".into(),
            );
        }
        let all: Vec<&SynthClassProfile> = self.profiles().map(|(p, _)| p).collect();
        for (i, p) in all.iter().enumerate() {
            p.validate(self.sample_rate)?;
            for q in &all[..i] {
                if q.class_id == p.class_id {
                    return err(format!("duplicate class id `{}`", p.class_id));
                }
                let same = SynthClassProfile {
                    class_id: p.class_id.clone(),
                    ..(*q).clone()
                };
                if &same == *p {
                    return err(format!(
                        "profiles `{}` and `{}` differ only in class id",
                        q.class_id, p.class_id
                    ));
                }
            }
        }
        Ok(())
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("config file {} not found", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Full validation, including that explicit paths exist.
    pub fn validate(&self) -> Result<()> {
        self.validate_settings()?;
        for p in [&self.paths.dataset, &self.paths.checkpoint]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "path {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// Everything except the filesystem checks.
    pub fn validate_settings(&self) -> Result<()> {
        self.signal.validate()?;
        self.encoder_config().validate()?;
        self.training.validate()?;
        if !(0.0..=1.0).contains(&self.openset.shrinkage) {
            return Err(Error::Config(format!(
                "openset: shrinkage {} not in [0, 1]",
                self.openset.shrinkage
            )));
        }
        self.discovery.validate()?;
        self.incremental.validate()?;
        Ok(())
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            input_dims: self.signal.spectrogram_dims(),
            hidden_widths: self.encoder.hidden_widths.clone(),
            embed_dim: self.encoder.embed_dim,
            activation: self.encoder.activation,
            seed: self.stage_seed("encoder"),
        }
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }
}
