//! Versioned binary checkpoint.
//!
//! Layout (all integers and floats little-endian, strings as `u32` length +
//! UTF-8 bytes):
//!
//! ```text
//! "OWCK" | version u16
//! encoder config: n_frames u32, n_bins u32, n_hidden u32, widths u32*,
//!                 embed_dim u32, activation str, seed u64
//! parameters:     count u64, f64*
//! class table:    count u32, per class: name str, origin u8 (0 original,
//!                 1 discovered), session u32, cluster u32,
//!                 has_truth u8, truth str (if has_truth)
//! centers:        count * embed_dim f64
//! optimizer:      step u64, beta1 f64, beta2 f64, epsilon f64,
//!                 m_params f64*, v_params f64*, m_centers f64*, v_centers f64*
//! "STATS" | count u32, per class: index u32, n_samples u64, tau f64,
//!                 mu f64*, sigma f64* (row-major D x D)
//! ```
//!
//! Files are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{
    Activation, AdamState, ClassEntry, ClassOrigin, ClassRegistry, EncoderConfig, TrainState,
};
use crate::error::{Error, Result};
use crate::openset::ClassStatistics;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"OWCK";
pub const CHECKPOINT_VERSION: u16 = 1;
const STATS_TAG: &[u8; 5] = b"STATS";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState,
    pub classes: ClassRegistry,
    pub stats: Vec<ClassStatistics>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} overflows u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("length overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }
}

fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let st = &ckpt.state;
    if ckpt.classes.len() != st.n_classes {
        return Err(Error::InvalidArgument(format!(
            "class table has {} entries but the head has {} classes",
            ckpt.classes.len(),
            st.n_classes
        )));
    }
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(&CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);

    let cfg = &st.config;
    w.u32(cfg.input_dims.0)?;
    w.u32(cfg.input_dims.1)?;
    w.u32(cfg.hidden_widths.len())?;
    for &h in &cfg.hidden_widths {
        w.u32(h)?;
    }
    w.u32(cfg.embed_dim)?;
    w.str(cfg.activation.name())?;
    w.u64(cfg.seed);

    w.u64(st.parameters.len() as u64);
    w.f64s(&st.parameters);

    w.u32(ckpt.classes.len())?;
    for e in ckpt.classes.entries() {
        w.str(&e.name)?;
        match &e.origin {
            ClassOrigin::Original => {
                w.u8(0);
                w.u32(0)?;
                w.u32(0)?;
                w.u8(0);
            }
            ClassOrigin::Discovered {
                session,
                cluster,
                majority_truth,
            } => {
                w.u8(1);
                w.u32(*session as usize)?;
                w.u32(*cluster)?;
                match majority_truth {
                    Some(t) => {
                        w.u8(1);
                        w.str(t)?;
                    }
                    None => w.u8(0),
                }
            }
        }
    }
    w.f64s(st.class_centers.iter());

    let opt = &st.optimizer;
    w.u64(st.step_count);
    w.f64s([opt.beta1, opt.beta2, opt.epsilon].iter());
    w.f64s(&opt.m_params);
    w.f64s(&opt.v_params);
    w.f64s(&opt.m_centers);
    w.f64s(&opt.v_centers);

    w.0.extend_from_slice(STATS_TAG);
    w.u32(ckpt.stats.len())?;
    for s in &ckpt.stats {
        w.u32(s.class_index)?;
        w.u64(s.n_samples as u64);
        w.f64s([s.tau].iter());
        w.f64s(s.mu.iter());
        w.f64s(s.sigma.iter());
    }
    Ok(w.0)
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let input_dims = (r.u32()?, r.u32()?);
    let n_hidden = r.u32()?;
    let hidden_widths = (0..n_hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let embed_dim = r.u32()?;
    let activation: Activation = r.str()?.parse()?;
    let seed = r.u64()?;
    let config = EncoderConfig {
        input_dims,
        hidden_widths,
        embed_dim,
        activation,
        seed,
    };
    config.validate()?;

    let n_params = r.u64()? as usize;
    let parameters = r.f64s(n_params)?;

    let n_classes = r.u32()?;
    let mut classes = ClassRegistry::default();
    for _ in 0..n_classes {
        let name = r.str()?;
        let tag = r.u8()?;
        let session = r.u32()? as u32;
        let cluster = r.u32()?;
        let truth = if r.u8()? == 1 { Some(r.str()?) } else { None };
        let origin = match tag {
            0 => ClassOrigin::Original,
            1 => ClassOrigin::Discovered {
                session,
                cluster,
                majority_truth: truth,
            },
            t => return Err(Error::Format(format!("unknown class origin tag {t}"))),
        };
        classes.push(ClassEntry { name, origin })?;
    }
    let class_centers =
        Array2::from_shape_vec((n_classes, embed_dim), r.f64s(n_classes * embed_dim)?)
            .map_err(|e| Error::Format(e.to_string()))?;

    let step_count = r.u64()?;
    let (beta1, beta2, epsilon) = (r.f64()?, r.f64()?, r.f64()?);
    let optimizer = AdamState {
        beta1,
        beta2,
        epsilon,
        m_params: r.f64s(n_params)?,
        v_params: r.f64s(n_params)?,
        m_centers: r.f64s(n_classes * embed_dim)?,
        v_centers: r.f64s(n_classes * embed_dim)?,
    };
    let state = TrainState {
        config,
        parameters,
        n_classes,
        class_centers,
        optimizer,
        step_count,
    };
    if state.head_layer().end() != state.parameters.len() {
        return Err(Error::Format(
            "parameter count does not match encoder layout".into(),
        ));
    }

    if r.take(5)? != STATS_TAG {
        return Err(Error::Format("missing STATS section".into()));
    }
    let n_stats = r.u32()?;
    let mut stats = Vec::with_capacity(n_stats);
    for _ in 0..n_stats {
        let index = r.u32()?;
        let n_samples = r.u64()? as usize;
        let tau = r.f64()?;
        let mu = Array1::from(r.f64s(embed_dim)?);
        let sigma = Array2::from_shape_vec((embed_dim, embed_dim), r.f64s(embed_dim * embed_dim)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let name = classes
            .get(index)
            .ok_or_else(|| Error::Format(format!("statistics for unknown class index {index}")))?
            .name
            .clone();
        stats.push(ClassStatistics::from_parts(
            index, name, mu, sigma, tau, n_samples,
        )?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after STATS section".into()));
    }
    Ok(Checkpoint {
        state,
        classes,
        stats,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = encode(ckpt)?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes)
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    decode(&bytes)
}
