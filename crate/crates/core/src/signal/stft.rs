use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{IqRecord, Window, WindowRegistry};
use crate::error::{Error, Result};

/// Added to linear power before taking the logarithm.
pub const LOG_EPSILON: f64 = 1e-12;

/// Normalized log-power time-frequency matrix.
///
/// Complex I/Q input has distinct positive and negative frequencies, so the
/// spectrum is two-sided: `n_bins == fft_size`, in FFT order (bin `m` is the
/// offset `m * fs / fft_size` for `m < fft_size / 2`, negative offsets above).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `[n_frames × n_bins]`, every value in `[0, 1]`.
    pub values: Array2<f32>,
    pub frame_hop: usize,
    pub fft_size: usize,
    pub window: String,
    pub label: Option<String>,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Row-major flattening as `f64`, the encoder's input layout.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

pub fn frame_count(n_samples: usize, fft_size: usize, frame_hop: usize) -> usize {
    if n_samples < fft_size {
        0
    } else {
        (n_samples - fft_size) / frame_hop + 1
    }
}

/// Linear power spectrum `|X_k|^2 / N` of one windowed frame.
///
/// With a rectangular window the bins sum to the frame energy (Parseval).
pub fn frame_power_spectrum(frame: &[Complex64], window: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let mut buf: Vec<Complex64> = frame.iter().zip(window).map(|(x, w)| x * w).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// STFT with a window looked up in the default registry.
pub fn stft_spectrogram(
    record: &IqRecord,
    fft_size: usize,
    frame_hop: usize,
    window: &str,
) -> Result<Spectrogram> {
    let w = WindowRegistry::default().get(window)?;
    stft_with(record, fft_size, frame_hop, w.as_ref())
}

pub fn stft_with(
    record: &IqRecord,
    fft_size: usize,
    frame_hop: usize,
    window: &dyn Window,
) -> Result<Spectrogram> {
    if fft_size == 0 || !fft_size.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "fft_size {fft_size} is not a power of two"
        )));
    }
    if frame_hop == 0 || frame_hop > fft_size {
        return Err(Error::InvalidArgument(format!(
            "frame_hop {frame_hop} not in 1..={fft_size}"
        )));
    }
    let n = record.len();
    if n < fft_size {
        return Err(Error::TooShort {
            needed: fft_size,
            got: n,
        });
    }

    let n_frames = frame_count(n, fft_size, frame_hop);
    let coeffs = window.coefficients(fft_size);
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let mut db = Array2::<f64>::zeros((n_frames, fft_size));
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for f in 0..n_frames {
        let start = f * frame_hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = record.samples[start + i];
            *slot = Complex64::new(f64::from(s.re), f64::from(s.im)) * coeffs[i];
        }
        fft.process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            let power = c.norm_sqr() / fft_size as f64;
            db[(f, k)] = 10.0 * (power + LOG_EPSILON).log10();
        }
    }

    let (lo, hi) = db
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let values = if range > 0.0 {
        db.mapv(|v| (((v - lo) / range) as f32).clamp(0.0, 1.0))
    } else {
        Array2::zeros((n_frames, fft_size))
    };

    Ok(Spectrogram {
        values,
        frame_hop,
        fft_size,
        window: window.name().to_string(),
        label: record.label.clone(),
    })
}
