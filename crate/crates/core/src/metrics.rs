//! Objective evaluation: mel-cepstral distortion, voicing error, semitone
//! accuracy and phoneme duration error.

use std::f64::consts::{LN_10, PI};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dsp::{FeatureMatrix, PitchTrack};
use crate::error::{Error, Result};
use crate::score::{rint, PhonemeClass};

pub const EVAL_SCHEMA: &str = "phonemix-eval/1";
pub const DEFAULT_MCD_ORDER: usize = 13;

/// `10 / ln 10 * sqrt(2)`.
pub fn mcd_constant() -> f64 {
    10.0 / LN_10 * 2f64.sqrt()
}

/// Orthonormal DCT-II coefficients `1..=order` of one log-mel row.
pub fn mel_cepstrum(row: &[f64], order: usize) -> Vec<f64> {
    let n = row.len() as f64;
    let scale = (2.0 / n).sqrt();
    (1..=order)
        .map(|d| {
            scale
                * row
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * d as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Mean over frames of `10 / ln 10 * sqrt(2 * sum_d (c_ref,d - c_syn,d)^2)`
/// with cepstra `1..=order`. Lengths align by truncation.
pub fn mcd(reference: &FeatureMatrix, synthesized: &FeatureMatrix, order: usize) -> Result<f64> {
    if reference.dims() != synthesized.dims() {
        return Err(Error::Shape(format!(
            "mel dims {} vs {}",
            reference.dims(),
            synthesized.dims()
        )));
    }
    if order == 0 || order >= reference.dims() {
        return Err(Error::InvalidArgument(format!(
            "cepstral order {order} outside 1..{}",
            reference.dims()
        )));
    }
    let t = reference.frames().min(synthesized.frames());
    if t == 0 {
        return Err(Error::InvalidArgument("no overlapping frames".into()));
    }
    let k = 10.0 / LN_10;
    let total: f64 = (0..t)
        .map(|i| {
            let a = mel_cepstrum(reference.row(i), order);
            let b = mel_cepstrum(synthesized.row(i), order);
            let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            k * (2.0 * s).sqrt()
        })
        .sum();
    Ok(total / t as f64)
}

fn overlap(a: &PitchTrack, b: &PitchTrack) -> Result<usize> {
    let t = a.len().min(b.len());
    if t == 0 {
        return Err(Error::InvalidArgument("no overlapping frames".into()));
    }
    Ok(t)
}

/// Fraction of frames whose voicing decisions differ.
pub fn vuv_error(reference: &PitchTrack, synthesized: &PitchTrack) -> Result<f64> {
    let t = overlap(reference, synthesized)?;
    let wrong = (0..t).filter(|&i| reference.voiced[i] != synthesized.voiced[i]).count();
    Ok(wrong as f64 / t as f64)
}

/// MIDI semitone of `f0`, rounded half to even.
pub fn semitone(f0: f64) -> i64 {
    rint(69.0 + 12.0 * (f0 / 440.0).log2()) as i64
}

/// Over frames voiced in both tracks, the fraction with equal semitones.
/// Zero, with a warning, when no frame is voiced in both.
pub fn semitone_accuracy(reference: &PitchTrack, synthesized: &PitchTrack) -> Result<f64> {
    let t = overlap(reference, synthesized)?;
    let both: Vec<usize> = (0..t)
        .filter(|&i| reference.voiced[i] && synthesized.voiced[i])
        .collect();
    if both.is_empty() {
        warn!("semitone accuracy: no co-voiced frames");
        return Ok(0.0);
    }
    let hit = both
        .iter()
        .filter(|&&i| semitone(reference.f0[i]) == semitone(synthesized.f0[i]))
        .count();
    Ok(hit as f64 / both.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationReport {
    /// Mean absolute error in frames.
    pub mae: f64,
    pub vowel_mae: Option<f64>,
    pub consonant_mae: Option<f64>,
    pub count: usize,
}

/// Frame MAE overall and by class. Silence entries count only toward the
/// overall figure.
pub fn duration_report(predicted: &[u32], annotated: &[u32], classes: &[PhonemeClass]) -> Result<DurationReport> {
    if predicted.len() != annotated.len() || classes.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} predicted, {} annotated, {} classes",
            predicted.len(),
            annotated.len(),
            classes.len()
        )));
    }
    let mut sums = [(0.0, 0usize); 3];
    let mut total = 0.0;
    for ((p, a), c) in predicted.iter().zip(annotated).zip(classes) {
        let e = p.abs_diff(*a) as f64;
        total += e;
        let slot = match c {
            PhonemeClass::Vowel => 0,
            PhonemeClass::Consonant => 1,
            PhonemeClass::Silence => 2,
        };
        sums[slot].0 += e;
        sums[slot].1 += 1;
    }
    let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    Ok(DurationReport {
        mae: mean((total, predicted.len())).unwrap_or(0.0),
        vowel_mae: mean(sums[0]),
        consonant_mae: mean(sums[1]),
        count: predicted.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEval {
    pub segment: String,
    pub mcd: f64,
    pub vuv_e: f64,
    pub sa: f64,
    pub frames: usize,
}

/// How the figures were computed, so reports stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDefinitions {
    pub mcd: String,
    pub mcd_order: usize,
    pub alignment: String,
    pub semitone_rounding: String,
}

impl Default for MetricDefinitions {
    fn default() -> Self {
        Self {
            mcd: "10/ln(10) * sqrt(2 * sum_{d=1..order} (c_ref,d - c_syn,d)^2), orthonormal DCT-II of natural-log mel, frame mean".into(),
            mcd_order: DEFAULT_MCD_ORDER,
            alignment: "truncate to shorter".into(),
            semitone_rounding: "half to even, both tracks".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub method: String,
    pub mcd: f64,
    pub vuv_e: f64,
    pub sa: f64,
    /// Frame MAE of the phoneme durations fed to the acoustic encoder.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<DurationReport>,
    /// Frame MAE of the duration predictor's regulator output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regulator_duration: Option<DurationReport>,
    pub definitions: MetricDefinitions,
    pub segments: Vec<SegmentEval>,
}

impl EvalReport {
    /// Frame-weighted means over `segments`.
    pub fn from_segments(method: impl Into<String>, segments: Vec<SegmentEval>) -> Result<Self> {
        let frames: usize = segments.iter().map(|s| s.frames).sum();
        if frames == 0 {
            return Err(Error::InvalidArgument("no evaluated frames".into()));
        }
        let avg = |f: fn(&SegmentEval) -> f64| segments.iter().map(|s| f(s) * s.frames as f64).sum::<f64>() / frames as f64;
        Ok(Self {
            schema: EVAL_SCHEMA.into(),
            method: method.into(),
            mcd: avg(|s| s.mcd),
            vuv_e: avg(|s| s.vuv_e),
            sa: avg(|s| s.sa),
            duration: None,
            regulator_duration: None,
            definitions: MetricDefinitions::default(),
            segments,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const CSV_HEADER: &str = "Method,MCD,VUV_E,SA,DUR_MAE,DUR_MAE_V,DUR_MAE_C,LR_MAE";

/// One row per report, in the comparison table layout.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let d = r.duration.as_ref();
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{},{},{},{}\n",
            r.method,
            r.mcd,
            r.vuv_e,
            r.sa,
            opt(d.map(|d| d.mae)),
            opt(d.and_then(|d| d.vowel_mae)),
            opt(d.and_then(|d| d.consonant_mae)),
            opt(r.regulator_duration.as_ref().map(|d| d.mae)),
        ));
    }
    out
}
