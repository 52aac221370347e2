//! Thermometer-style spectral decomposition of scalar rewards.
//!
//! The number line is split into buckets of width `b^i`; component `i` of a
//! decomposed scalar is the signed fill proportion of bucket `i`. Summing the
//! bucket widths weighted by their fill proportions recovers the scalar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base and highest frequency of a spectral decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    base: f64,
    max_frequency: usize,
}

impl CodecConfig {
    pub fn new(base: f64, max_frequency: usize) -> Result<Self> {
        if !(base.is_finite() && base > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "spectral base must be a finite real > 1, got {base}"
            )));
        }
        Ok(Self {
            base,
            max_frequency,
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn max_frequency(&self) -> usize {
        self.max_frequency
    }

    /// Number of components, `N + 1`.
    pub fn num_components(&self) -> usize {
        self.max_frequency + 1
    }

    /// Width of bucket `i`, which is also the reconstruction weight of component `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.base.powi(i as i32)
    }

    /// All reconstruction weights `b^0 ..= b^N`.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_components()).map(|i| self.weight(i)).collect()
    }

    /// Where bucket `i` starts on the non-negative half line: `(b^i - 1) / (b - 1)`.
    #[inline]
    pub fn bucket_start(&self, i: usize) -> f64 {
        (self.weight(i) - 1.0) / (self.base - 1.0)
    }

    /// Largest magnitude captured by the first `N + 1` buckets: `(b^(N+1) - 1) / (b - 1)`.
    pub fn max_representable(&self) -> f64 {
        self.bucket_start(self.num_components())
    }
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            base: 2.0,
            max_frequency: 20,
        }
    }
}

/// Per-frequency components of a reward or return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralVector(Vec<f64>);

impl SpectralVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_components(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SpectralVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Spectral decomposition of `r`. Fails if `|r|` exceeds [`CodecConfig::max_representable`].
pub fn decompose(r: f64, cfg: &CodecConfig) -> Result<SpectralVector> {
    let mut out = vec![0.0; cfg.num_components()];
    decompose_into(r, cfg, &mut out)?;
    Ok(SpectralVector(out))
}

/// Allocation-free form of [`decompose`]; `out` must have `N + 1` entries.
pub fn decompose_into(r: f64, cfg: &CodecConfig, out: &mut [f64]) -> Result<()> {
    assert_eq!(out.len(), cfg.num_components(), "output length must be N + 1");
    let magnitude = r.abs();
    let max = cfg.max_representable();
    if !(magnitude <= max) {
        return Err(Error::MagnitudeOverflow { value: r, max });
    }
    let sign = if r < 0.0 { -1.0 } else { 1.0 };
    for (i, slot) in out.iter_mut().enumerate() {
        let fill = ((magnitude - cfg.bucket_start(i)) / cfg.weight(i)).clamp(0.0, 1.0);
        // Keeps the zero case at +0.0 so oddness holds bit-for-bit.
        *slot = if fill == 0.0 { 0.0 } else { sign * fill };
    }
    Ok(())
}

/// Weighted sum `sum_i b^i v_i`.
pub fn reconstruct(v: &SpectralVector, cfg: &CodecConfig) -> f64 {
    reconstruct_slice(v.components(), cfg)
}

pub fn reconstruct_slice(components: &[f64], cfg: &CodecConfig) -> f64 {
    debug_assert_eq!(components.len(), cfg.num_components());
    components
        .iter()
        .enumerate()
        .map(|(i, c)| cfg.weight(i) * c)
        .sum()
}

pub fn max_representable(cfg: &CodecConfig) -> f64 {
    cfg.max_representable()
}
