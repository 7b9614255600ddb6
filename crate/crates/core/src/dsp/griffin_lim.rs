//! Mel-to-waveform inversion for evaluation: a non-negative least-squares
//! estimate of the linear magnitude spectrum, then Griffin-Lim phase
//! recovery. Good enough for pitch and voicing analysis, not for listening.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use std::f64::consts::PI;

use super::mel::{hann, mel_filterbank, MEL_FMAX, MEL_FMIN};
use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_GRIFFIN_LIM_ITERATIONS: usize = 32;
const NNLS_ITERATIONS: usize = 16;
const PHASE_SEED: u64 = 0x6772_6966;

/// Sparse filterbank rows: `(first bin, weights)`.
fn sparse_filters(weights: &[Vec<f64>]) -> Vec<(usize, Vec<f64>)> {
    weights
        .iter()
        .map(|w| {
            let first = w.iter().position(|v| *v > 0.0).unwrap_or(0);
            let last = w.iter().rposition(|v| *v > 0.0).map_or(first, |i| i + 1);
            (first, w[first..last].to_vec())
        })
        .collect()
}

/// Linear magnitudes `S >= 0` with `W S ~= M`, by multiplicative updates
/// started from the normalized transpose.
fn invert_filterbank(filters: &[(usize, Vec<f64>)], n_bins: usize, mel: &[f64]) -> Vec<f64> {
    let mut norm = vec![0.0; n_bins];
    let mut s = vec![0.0; n_bins];
    for ((first, w), m) in filters.iter().zip(mel) {
        for (j, v) in w.iter().enumerate() {
            norm[first + j] += v;
            s[first + j] += v * m;
        }
    }
    let wtm = s.clone();
    for (x, n) in s.iter_mut().zip(&norm) {
        *x = if *n > 0.0 { *x / n } else { 0.0 };
    }
    for _ in 0..NNLS_ITERATIONS {
        let mut wtws = vec![0.0; n_bins];
        for (first, w) in filters {
            let proj: f64 = w.iter().enumerate().map(|(j, v)| v * s[first + j]).sum();
            for (j, v) in w.iter().enumerate() {
                wtws[first + j] += v * proj;
            }
        }
        for ((x, num), den) in s.iter_mut().zip(&wtm).zip(&wtws) {
            if *den > 0.0 {
                *x *= num / den;
            }
        }
    }
    s
}

/// Reconstructs a waveform of `(frames - 1) * hop + window` samples from a
/// natural-log mel spectrogram made by [`super::mel_spectrogram`]. Initial
/// phases come from a fixed-seed stream, so the result is deterministic;
/// random rather than zero phases keep near-silent frames from turning into
/// a periodic click train.
pub fn griffin_lim(log_mel: &FeatureMatrix, iterations: usize) -> Result<Vec<f64>> {
    let clock = log_mel.clock;
    let n = clock.window;
    let hop = clock.hop;
    let frames = log_mel.frames();
    if frames == 0 {
        return Err(Error::InvalidArgument("empty spectrogram".into()));
    }
    let fb = mel_filterbank(log_mel.dims(), n, clock.sample_rate, MEL_FMIN, MEL_FMAX);
    let filters = sparse_filters(&fb.weights);
    let mags: Vec<Vec<f64>> = log_mel
        .rows()
        .map(|row| {
            let m: Vec<f64> = row.iter().map(|v| v.exp()).collect();
            invert_filterbank(&filters, fb.n_bins, &m)
        })
        .collect();

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let window = hann(n);
    let len = (frames - 1) * hop + n;
    let mut wsum = vec![0.0; len];
    for t in 0..frames {
        for (i, w) in window.iter().enumerate() {
            wsum[t * hop + i] += w * w;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut phases: Vec<Vec<Complex<f64>>> = (0..frames)
        .map(|_| {
            (0..fb.n_bins)
                .map(|_| Complex::from_polar(1.0, rng.gen_range(-PI..PI)))
                .collect()
        })
        .collect();
    let mut signal = vec![0.0; len];
    let mut buf = vec![Complex::default(); n];
    for iter in 0..=iterations {
        signal.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..frames {
            for k in 0..fb.n_bins {
                buf[k] = phases[t][k] * mags[t][k];
            }
            for k in fb.n_bins..n {
                buf[k] = buf[n - k].conj();
            }
            inverse.process(&mut buf);
            for (i, w) in window.iter().enumerate() {
                signal[t * hop + i] += buf[i].re / n as f64 * w;
            }
        }
        for (s, w) in signal.iter_mut().zip(&wsum) {
            if *w > 1e-8 {
                *s /= w;
            }
        }
        if iter == iterations {
            break;
        }
        for t in 0..frames {
            for (i, w) in window.iter().enumerate() {
                buf[i] = Complex::new(signal[t * hop + i] * w, 0.0);
            }
            forward.process(&mut buf);
            for k in 0..fb.n_bins {
                let norm = buf[k].norm();
                phases[t][k] = if norm > 1e-12 { buf[k] / norm } else { Complex::new(1.0, 0.0) };
            }
        }
    }
    Ok(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{estimate_f0, mel_spectrogram};
    use crate::score::FrameClock;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn harmonic_tone_keeps_its_pitch() {
        let c = FrameClock::default();
        for f0 in [130.8, 220.0, 392.0] {
            let wave: Vec<f64> = (0..12_000)
                .map(|i| {
                    let t = i as f64 / 24_000.0;
                    (1..6).map(|h| (2.0 * std::f64::consts::PI * h as f64 * f0 * t).sin() / h as f64).sum::<f64>() * 0.2
                })
                .collect();
            let mel = mel_spectrogram(&wave, &c).unwrap();
            let back = griffin_lim(&mel, DEFAULT_GRIFFIN_LIM_ITERATIONS).unwrap();
            assert_eq!(back.len(), wave.len() - (wave.len() - 1200) % 300);
            let track = estimate_f0(&back, &c).unwrap();
            let voiced: Vec<f64> = track.f0.iter().copied().filter(|f| *f > 0.0).collect();
            assert!(voiced.len() * 10 >= track.len() * 8, "{f0}: {} of {} voiced", voiced.len(), track.len());
            let m = median(voiced);
            assert!((m - f0).abs() / f0 < 0.03, "{f0}: median {m}");
        }
    }

    #[test]
    fn quiet_input_stays_quiet_and_unvoiced() {
        let c = FrameClock::default();
        let mel = mel_spectrogram(&vec![0.0; 6000], &c).unwrap();
        let back = griffin_lim(&mel, 4).unwrap();
        assert!(back.iter().all(|v| v.abs() < 1e-6));
        // a flat floor spectrum can look periodic at the edges; most frames stay unvoiced
        let track = estimate_f0(&back, &c).unwrap();
        assert!(track.voiced.iter().filter(|v| **v).count() * 4 < track.len());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dither: Vec<f64> = (0..6000).map(|_| rng.gen_range(-1e-4..1e-4)).collect();
        let mel = mel_spectrogram(&dither, &c).unwrap();
        let track = estimate_f0(&griffin_lim(&mel, DEFAULT_GRIFFIN_LIM_ITERATIONS).unwrap(), &c).unwrap();
        assert!(track.voiced.iter().all(|v| !v));
    }
}
