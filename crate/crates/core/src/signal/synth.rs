use std::f64::consts::TAU;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::IqRecord;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Number of amplitude-modulation cycles across one generated record.
const AM_CYCLES: f64 = 4.0;

/// Parameters of a synthetic emitter class.
///
/// `tone_set` holds baseband offsets in Hz. With `hop_period > 0` the emitter
/// dwells on one tone at a time and cycles through the set; otherwise all
/// tones are on simultaneously. `bandwidth` turns each tone into a linear
/// chirp of that width, repeated every dwell (or once per record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClassProfile {
    pub class_id: String,
    pub tone_set: Vec<f64>,
    #[serde(default)]
    pub hop_period: f64,
    #[serde(default)]
    pub bandwidth: f64,
    #[serde(default = "one")]
    pub burst_duty: f64,
    #[serde(default)]
    pub am_depth: f64,
}

fn one() -> f64 {
    1.0
}

impl SynthClassProfile {
    pub fn tone(class_id: impl Into<String>, offset_hz: f64) -> Self {
        Self {
            class_id: class_id.into(),
            tone_set: vec![offset_hz],
            hop_period: 0.0,
            bandwidth: 0.0,
            burst_duty: 1.0,
            am_depth: 0.0,
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("profile `{}`: {msg}", self.class_id)));
        if self.class_id.is_empty() {
            return Err(Error::Config("profile with empty class_id".into()));
        }
        if self.tone_set.is_empty() {
            return bad("tone_set is empty".into());
        }
        let nyquist = sample_rate / 2.0;
        for &f in &self.tone_set {
            if !f.is_finite() || f.abs() > nyquist {
                return bad(format!("tone {f} Hz outside ±{nyquist} Hz"));
            }
        }
        if !(self.hop_period >= 0.0 && self.hop_period.is_finite()) {
            return bad(format!("hop_period {} must be >= 0", self.hop_period));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth.is_finite()) {
            return bad(format!("bandwidth {} must be >= 0", self.bandwidth));
        }
        if !(self.burst_duty > 0.0 && self.burst_duty <= 1.0) {
            return bad(format!("burst_duty {} not in (0, 1]", self.burst_duty));
        }
        if !(0.0..1.0).contains(&self.am_depth) {
            return bad(format!("am_depth {} not in [0, 1)", self.am_depth));
        }
        Ok(())
    }
}

/// Clean waveform and noise before mixing.
#[derive(Debug, Clone)]
pub struct BurstComponents {
    pub signal: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

impl BurstComponents {
    pub fn mixed(&self) -> Vec<Complex32> {
        self.signal
            .iter()
            .zip(&self.noise)
            .map(|(s, n)| {
                let x = s + n;
                Complex32::new(x.re as f32, x.im as f32)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BurstGenerator {
    pub sample_rate: f64,
    pub carrier_freq: f64,
    /// Shortest acceptable record, normally the STFT size.
    pub min_samples: usize,
}

impl BurstGenerator {
    pub fn new(sample_rate: f64, carrier_freq: f64, min_samples: usize) -> Self {
        Self {
            sample_rate,
            carrier_freq,
            min_samples,
        }
    }

    pub fn sample_count(&self, duration: f64) -> usize {
        (duration * self.sample_rate).round() as usize
    }

    /// Generates signal and noise separately. `snr_db = +inf` disables noise.
    pub fn components(
        &self,
        profile: &SynthClassProfile,
        duration: f64,
        snr_db: f64,
        seed: u64,
    ) -> Result<BurstComponents> {
        profile.validate(self.sample_rate)?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "duration must be positive, got {duration}"
            )));
        }
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("invalid snr_db {snr_db}")));
        }
        let n = self.sample_count(duration);
        if n < self.min_samples.max(1) {
            return Err(Error::TooShort {
                needed: self.min_samples.max(1),
                got: n,
            });
        }

        let mut rng = rng_from_seed(seed);
        let fs = self.sample_rate;
        let n_tones = profile.tone_set.len();
        let hopping = profile.hop_period > 0.0;
        let period = if hopping {
            profile.hop_period
        } else {
            duration
        };
        let time_offset = rng.random::<f64>() * period;
        let am_phase = rng.random::<f64>() * TAU;
        let hop_start = rng.random_range(0..n_tones);
        let mut phases: Vec<f64> = (0..n_tones).map(|_| rng.random::<f64>() * TAU).collect();
        let am_freq = AM_CYCLES / duration;
        let sum_scale = if hopping {
            1.0
        } else {
            1.0 / (n_tones as f64).sqrt()
        };

        let mut signal = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / fs;
            let shifted = t + time_offset;
            let cycle = shifted / period;
            let within = cycle - cycle.floor();
            let chirp = profile.bandwidth * (within - 0.5);
            let gate = if within < profile.burst_duty {
                1.0
            } else {
                0.0
            };
            let envelope = gate * (1.0 + profile.am_depth * (TAU * am_freq * t + am_phase).cos());

            let mut value = Complex64::new(0.0, 0.0);
            if hopping {
                let idx = (hop_start + cycle.floor() as usize) % n_tones;
                value += Complex64::from_polar(1.0, phases[idx]);
                for (k, ph) in phases.iter_mut().enumerate() {
                    let f = profile.tone_set[k] + chirp;
                    *ph = (*ph + TAU * f / fs).rem_euclid(TAU);
                }
            } else {
                for (k, ph) in phases.iter_mut().enumerate() {
                    value += Complex64::from_polar(sum_scale, *ph);
                    let f = profile.tone_set[k] + chirp;
                    *ph = (*ph + TAU * f / fs).rem_euclid(TAU);
                }
            }
            signal.push(value * envelope);
        }

        let noise = if snr_db.is_infinite() {
            vec![Complex64::new(0.0, 0.0); n]
        } else {
            let p_signal = signal.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
            let p_noise = p_signal / 10f64.powf(snr_db / 10.0);
            let normal = Normal::new(0.0, (p_noise / 2.0).sqrt())
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (0..n)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect()
        };
        Ok(BurstComponents { signal, noise })
    }

    /// Generates one labeled record; a pure function of its arguments.
    pub fn generate(
        &self,
        profile: &SynthClassProfile,
        duration: f64,
        snr_db: f64,
        seed: u64,
    ) -> Result<IqRecord> {
        let parts = self.components(profile, duration, snr_db, seed)?;
        IqRecord::new(
            parts.mixed(),
            self.sample_rate,
            self.carrier_freq,
            Some(profile.class_id.clone()),
            format!("synth:{}:{seed}", profile.class_id),
        )
    }
}
