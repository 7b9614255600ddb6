use serde::{Deserialize, Serialize};

use super::mel::frame_count;
use crate::error::{Error, Result};
use crate::score::FrameClock;

pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 1000.0;
pub const DEFAULT_VOICING_THRESHOLD: f64 = 0.45;

/// Secondary peaks within this fraction of the best one win if they come first,
/// which suppresses octave-down errors.
const PEAK_RATIO: f64 = 0.9;

/// Per-frame F0 in Hz, 0 where unvoiced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchTrack {
    pub fn new(f0: Vec<f64>, voiced: Vec<bool>) -> Result<Self> {
        if f0.len() != voiced.len() {
            return Err(Error::Shape(format!(
                "{} f0 values vs {} voicing flags",
                f0.len(),
                voiced.len()
            )));
        }
        if let Some(i) = f0.iter().zip(&voiced).position(|(f, v)| (*f > 0.0) != *v || !f.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "frame {i}: f0 {} inconsistent with voiced={}",
                f0[i], voiced[i]
            )));
        }
        Ok(Self { f0, voiced })
    }

    /// Builds a track from f0 values alone; positive means voiced.
    pub fn from_f0(f0: Vec<f64>) -> Result<Self> {
        let voiced = f0.iter().map(|f| *f > 0.0).collect();
        Self::new(f0, voiced)
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }
}

pub fn estimate_f0(waveform: &[f64], clock: &FrameClock) -> Result<PitchTrack> {
    estimate_f0_with(waveform, clock, DEFAULT_VOICING_THRESHOLD)
}

/// Normalized-autocorrelation pitch tracker over the 60-1000 Hz lag range,
/// with parabolic refinement of the chosen peak.
pub fn estimate_f0_with(waveform: &[f64], clock: &FrameClock, threshold: f64) -> Result<PitchTrack> {
    let frames = frame_count(waveform.len(), clock)?;
    let sr = clock.sample_rate as f64;
    let min_lag = (sr / F0_MAX).floor().max(1.0) as usize;
    let max_lag = ((sr / F0_MIN).ceil() as usize).min(clock.window - 2);
    let mut f0 = Vec::with_capacity(frames);
    let mut corr = vec![0.0; max_lag + 2];
    for t in 0..frames {
        let x = &waveform[t * clock.hop..t * clock.hop + clock.window];
        f0.push(frame_f0(x, min_lag, max_lag, sr, threshold, &mut corr));
    }
    PitchTrack::from_f0(f0)
}

fn frame_f0(x: &[f64], min_lag: usize, max_lag: usize, sr: f64, threshold: f64, corr: &mut [f64]) -> f64 {
    let n = x.len();
    // prefix sums of energy give both window energies in O(1) per lag
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for v in x {
        cum.push(cum.last().unwrap() + v * v);
    }
    if cum[n] <= f64::MIN_POSITIVE {
        return 0.0;
    }
    for lag in min_lag - 1..=max_lag + 1 {
        let m = n - lag;
        let dot: f64 = x[..m].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
        let e = (cum[m] * (cum[n] - cum[lag])).sqrt();
        corr[lag] = if e > 0.0 { dot / e } else { 0.0 };
    }
    let peaks: Vec<usize> = (min_lag..=max_lag)
        .filter(|&l| corr[l] > corr[l - 1] && corr[l] >= corr[l + 1])
        .collect();
    let Some(best) = peaks.iter().map(|&l| corr[l]).reduce(f64::max) else {
        return 0.0;
    };
    if best < threshold {
        return 0.0;
    }
    let lag = peaks
        .into_iter()
        .find(|&l| corr[l] >= PEAK_RATIO * best)
        .expect("best peak qualifies");
    let (a, b, c) = (corr[lag - 1], corr[lag], corr[lag + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
    sr / (lag as f64 + shift.clamp(-0.5, 0.5))
}
