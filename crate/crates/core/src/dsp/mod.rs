//! Waveform to feature extraction.

mod featdump;
mod griffin_lim;
mod mel;
mod norm;
mod pitch;
mod wav;

pub use griffin_lim::{griffin_lim, DEFAULT_GRIFFIN_LIM_ITERATIONS};
pub use featdump::{read_feature_dump, write_feature_dump, FEATURE_DUMP_MAGIC, FEATURE_DUMP_VERSION};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, segment_mel, segment_samples, MelFilterbank, LOG_FLOOR, MEL_DIMS, MEL_FMAX, MEL_FMIN};
pub use norm::{apply_normalization, fit_normalization, NormStats, STD_FLOOR};
pub use pitch::{estimate_f0, estimate_f0_with, PitchTrack, DEFAULT_VOICING_THRESHOLD, F0_MAX, F0_MIN};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::FrameClock;

/// Time-major real matrix: `frames` rows of `dims` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    dims: usize,
    pub clock: FrameClock,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, dims: usize, clock: FrameClock) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("feature dims must be positive".into()));
        }
        if data.len() % dims != 0 {
            return Err(Error::Shape(format!(
                "{} values do not fill rows of {dims}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "feature value at row {}, dim {} is {}",
                i / dims,
                i % dims,
                data[i]
            )));
        }
        Ok(Self { data, dims, clock })
    }

    pub fn zeros(frames: usize, dims: usize, clock: FrameClock) -> Self {
        Self {
            data: vec![0.0; frames * dims],
            dims,
            clock,
        }
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// First `frames` rows (or all rows, if fewer).
    pub fn truncated(&self, frames: usize) -> Self {
        let n = frames.min(self.frames());
        Self {
            data: self.data[..n * self.dims].to_vec(),
            dims: self.dims,
            clock: self.clock,
        }
    }
}
