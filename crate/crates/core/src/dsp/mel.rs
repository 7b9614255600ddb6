use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::score::FrameClock;

pub const MEL_DIMS: usize = 80;
pub const MEL_FMIN: f64 = 0.0;
pub const MEL_FMAX: f64 = 12_000.0;
/// Magnitudes are floored here before the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the `n_fft / 2 + 1` magnitude bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `n_mels` rows of `n_bins` weights.
    pub weights: Vec<Vec<f64>>,
    pub n_bins: usize,
}

/// Unit-peak triangular filters with centres evenly spaced on the HTK mel scale.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> MelFilterbank {
    let n_bins = n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let weights = (0..n_mels)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    let up = (f - left) / (centre - left);
                    let down = (right - f) / (right - centre);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect();
    MelFilterbank { weights, n_bins }
}

pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

pub(crate) fn frame_count(len: usize, clock: &FrameClock) -> Result<usize> {
    if len < clock.window {
        return Err(Error::TooShort {
            len,
            window: clock.window,
        });
    }
    Ok((len - clock.window) / clock.hop + 1)
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl Stft {
    fn new(n: usize) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(n),
            window: hann(n),
            buf: vec![Complex::default(); n],
        }
    }

    fn magnitudes(&mut self, frame: &[f64], out: &mut [f64]) {
        for ((b, x), w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.buf);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.norm();
        }
    }
}

/// Log-mel spectrogram: Hann window of `clock.window` samples, FFT of the
/// same size, no centring or padding, 80 filters over 0-12 kHz, natural log.
pub fn mel_spectrogram(waveform: &[f64], clock: &FrameClock) -> Result<FeatureMatrix> {
    let frames = frame_count(waveform.len(), clock)?;
    let n_fft = clock.window;
    let fb = mel_filterbank(MEL_DIMS, n_fft, clock.sample_rate, MEL_FMIN, MEL_FMAX);
    let mut stft = Stft::new(n_fft);
    let mut mags = vec![0.0; fb.n_bins];
    let mut data = Vec::with_capacity(frames * MEL_DIMS);
    for t in 0..frames {
        let start = t * clock.hop;
        stft.magnitudes(&waveform[start..start + clock.window], &mut mags);
        data.extend(fb.weights.iter().map(|w| {
            let e: f64 = w.iter().zip(&mags).map(|(a, b)| a * b).sum();
            e.max(LOG_FLOOR).ln()
        }));
    }
    FeatureMatrix::new(data, MEL_DIMS, *clock)
}

/// Samples covering frames `[rint(start * rate), rint(end * rate))` of a
/// segment, so the spectrogram has exactly one frame per covered hop. The
/// tail is zero-padded when the waveform ends early.
pub fn segment_samples(waveform: &[f64], start: f64, end: f64, clock: &FrameClock) -> Result<Vec<f64>> {
    if !(start >= 0.0) || !(end > start) {
        return Err(Error::InvalidArgument(format!("segment {start}..{end}")));
    }
    let first = crate::score::rint(start * clock.frame_rate()) as usize;
    let last = crate::score::rint(end * clock.frame_rate()) as usize;
    if last <= first {
        return Err(Error::InvalidArgument(format!("segment {start}..{end} is shorter than a frame")));
    }
    let a = first * clock.hop;
    let b = last * clock.hop + clock.window - clock.hop;
    let mut out = vec![0.0; b - a];
    if a < waveform.len() {
        let n = (waveform.len() - a).min(b - a);
        out[..n].copy_from_slice(&waveform[a..a + n]);
    }
    Ok(out)
}

/// Log-mel of one segment; see [`segment_samples`].
pub fn segment_mel(waveform: &[f64], start: f64, end: f64, clock: &FrameClock) -> Result<FeatureMatrix> {
    mel_spectrogram(&segment_samples(waveform, start, end, clock)?, clock)
}
