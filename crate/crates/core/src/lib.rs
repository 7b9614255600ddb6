//! Acoustic feature processing for singing voice synthesis.
//!
//! The crate covers the whole desk-scale pipeline: score and annotation
//! ingestion, mel/F0 feature extraction, a small reverse-mode autodiff
//! engine, the phoneme distribution predictor with its acoustic model and
//! baseline strategies, and objective metrics.

pub mod dsp;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod score;
pub mod synth;

pub use error::{Error, Result};
pub use score::{
    pair_score, seconds_to_frames, segment_score, AnnotationTrack, FrameClock, Lexicon, MusicScore,
    Note, Phoneme, PhonemeClass, PhonemeInterval, SyllableNotePair,
};
