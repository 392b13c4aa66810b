use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A tapering window applied to each STFT frame.
pub trait Window: Send + Sync {
    fn name(&self) -> &'static str;
    fn coefficients(&self, len: usize) -> Vec<f64>;
}

/// Periodic Hann window.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hann;

impl Window for Hann {
    fn name(&self) -> &'static str {
        "hann"
    }

    fn coefficients(&self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| 0.5 - 0.5 * (TAU * i as f64 / len as f64).cos())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rectangular;

impl Window for Rectangular {
    fn name(&self) -> &'static str {
        "rectangular"
    }

    fn coefficients(&self, len: usize) -> Vec<f64> {
        vec![1.0; len]
    }
}

/// Windows available by name.
#[derive(Clone)]
pub struct WindowRegistry {
    windows: BTreeMap<String, Arc<dyn Window>>,
}

impl WindowRegistry {
    pub fn empty() -> Self {
        Self {
            windows: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, window: Arc<dyn Window>) {
        self.windows.insert(window.name().to_string(), window);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Window>> {
        self.windows
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "window",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.windows.keys().map(String::as_str)
    }
}

impl Default for WindowRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Hann));
        reg.register(Arc::new(Rectangular));
        reg
    }
}
