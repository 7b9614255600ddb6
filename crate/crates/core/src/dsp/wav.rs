use std::path::Path;

use crate::error::{Error, Result};

/// Reads a mono 16-bit or float PCM WAV at exactly `sample_rate`.
pub fn read_wav(path: &Path, sample_rate: u32) -> Result<Vec<f64>> {
    let audio = |msg: String| Error::Audio(msg).at_path(path);
    let mut reader = hound::WavReader::open(path).map_err(|e| audio(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(audio(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_rate != sample_rate {
        return Err(audio(format!(
            "sample rate {} Hz, expected {sample_rate} Hz (no resampling)",
            spec.sample_rate
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| audio(e.to_string())),
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| audio(e.to_string())),
        (fmt, bits) => Err(audio(format!("unsupported sample format {fmt:?} {bits}-bit"))),
    }
}

/// Writes mono 16-bit PCM, clipping to [-1, 1].
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| Error::Audio(e.to_string()).at_path(path);
    let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
    for s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
            .map_err(err)?;
    }
    w.finalize().map_err(err)
}
