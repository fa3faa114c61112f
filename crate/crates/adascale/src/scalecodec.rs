//! Normalized relative scale target encoding and decoding.
//!
//! The ratio range `[m_min/m_max, m_max/m_min]` of a scale set is mapped
//! linearly onto `[-1, 1]`. Decoding inverts the map relative to the current
//! frame's shortest side, then clips to `[m_min, m_max]` and rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::round_half_away;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("scale set needs at least two distinct positive scales")]
    DegenerateScaleSet,
    #[error("scales must be distinct positive integers")]
    InvalidScales,
    #[error("non-finite scale target")]
    NonFiniteTarget,
    #[error("scale must be positive")]
    NonPositiveScale,
}

/// A finite, strictly descending set of scales (shortest-side pixel sizes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ScaleSet {
    scales: Vec<u32>,
}

impl ScaleSet {
    pub fn new(mut scales: Vec<u32>) -> Result<Self, CodecError> {
        scales.sort_unstable_by(|a, b| b.cmp(a));
        if scales.contains(&0) {
            return Err(CodecError::InvalidScales);
        }
        if scales.windows(2).any(|w| w[0] == w[1]) {
            return Err(CodecError::InvalidScales);
        }
        if scales.len() < 2 {
            return Err(CodecError::DegenerateScaleSet);
        }
        Ok(Self { scales })
    }

    /// The paper-default regression scale set.
    pub fn reg_default() -> Self {
        Self::new(vec![600, 480, 360, 240, 128]).unwrap()
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }

    pub fn m_min(&self) -> u32 {
        *self.scales.last().unwrap()
    }

    pub fn m_max(&self) -> u32 {
        self.scales[0]
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Lower bound of the representable ratio range, `m_min / m_max`.
    fn ratio_lo(&self) -> f64 {
        self.m_min() as f64 / self.m_max() as f64
    }

    /// Upper bound of the representable ratio range, `m_max / m_min`.
    fn ratio_hi(&self) -> f64 {
        self.m_max() as f64 / self.m_min() as f64
    }
}

impl TryFrom<Vec<u32>> for ScaleSet {
    type Error = CodecError;
    fn try_from(v: Vec<u32>) -> Result<Self, CodecError> {
        ScaleSet::new(v)
    }
}

impl From<ScaleSet> for Vec<u32> {
    fn from(s: ScaleSet) -> Vec<u32> {
        s.scales
    }
}

/// Normalized relative scale target, clamped to `[-1, 1]` after encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTarget(f64);

impl ScaleTarget {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Encodes the optimal scale relative to the input scale.
pub fn encode_scale_target(m_i: u32, m_opt: u32, ss: &ScaleSet) -> Result<ScaleTarget, CodecError> {
    if m_i == 0 || m_opt == 0 {
        return Err(CodecError::NonPositiveScale);
    }
    let lo = ss.ratio_lo();
    let hi = ss.ratio_hi();
    let ratio = m_opt as f64 / m_i as f64;
    let t = 2.0 * ((ratio - lo) / (hi - lo)) - 1.0;
    Ok(ScaleTarget(t.clamp(-1.0, 1.0)))
}

/// Inverts the encoding relative to `base_size` (the shortest side of the
/// current, already-resized frame), clips the raw result to
/// `[m_min, m_max]`, and rounds half away from zero.
pub fn decode_scale(t: f64, base_size: u32, ss: &ScaleSet) -> Result<u32, CodecError> {
    if !t.is_finite() {
        return Err(CodecError::NonFiniteTarget);
    }
    let lo = ss.ratio_lo();
    let hi = ss.ratio_hi();
    let ratio = ((t + 1.0) / 2.0) * (hi - lo) + lo;
    let raw = ratio * base_size as f64;
    let clamped = raw.clamp(ss.m_min() as f64, ss.m_max() as f64);
    Ok(round_half_away(clamped) as u32)
}
