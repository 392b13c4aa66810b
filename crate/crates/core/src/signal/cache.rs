use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const CACHE_MAGIC: [u8; 4] = *b"OWRF";
pub const CACHE_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

/// Writes `values` as a spectrogram cache file.
///
/// Layout: magic `OWRF`, version `u16`, `n_frames` `u32`, `n_bins` `u32`,
/// two reserved zero bytes, then row-major little-endian `f32` values.
pub fn write_spectrogram_cache(path: &Path, values: &Array2<f32>) -> Result<()> {
    let (rows, cols) = values.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    out.extend_from_slice(&CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    for v in values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_spectrogram_cache(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || bytes[..4] != CACHE_MAGIC {
        return Err(Error::Format(format!(
            "{}: not a spectrogram cache",
            path.display()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CACHE_VERSION {
        return Err(Error::Format(format!(
            "unsupported cache version {version}"
        )));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "cache body has {} bytes, header implies {}",
            body.len(),
            rows * cols * 4
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}
