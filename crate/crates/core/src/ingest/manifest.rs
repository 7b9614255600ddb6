use std::path::Path;

use serde::{Deserialize, Serialize};

use super::align::{AlignFlag, AlignedPair, MisalignmentReport};
use crate::error::{Error, Result};
use crate::score::{FrameClock, Phoneme, SyllableNotePair};

pub const MANIFEST_SCHEMA: &str = "phonemix-manifest/1";

/// Corpus description written by ingestion and read by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub clock: FrameClock,
    /// Largest lexicon entry, i.e. the number of distribution slots.
    pub n_max: usize,
    pub songs: Vec<SongEntry>,
    pub report: MisalignmentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongEntry {
    pub name: String,
    pub score: String,
    pub annotation: Option<String>,
    pub wav: Option<String>,
    pub warnings: Vec<String>,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub id: String,
    pub start: f64,
    pub end: f64,
    /// Feature dump path relative to the manifest directory.
    pub features: Option<String>,
    /// Mel frames in the feature dump.
    pub frames: Option<usize>,
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub index: usize,
    pub note_index: usize,
    pub syllable: String,
    pub phonemes: Vec<Phoneme>,
    pub pitch: u8,
    pub d_note: u32,
    pub onset: f64,
    pub duration: f64,
    pub annotated: Option<Vec<u32>>,
    pub flags: Vec<AlignFlag>,
}

impl PairEntry {
    pub fn from_pair(pair: &SyllableNotePair) -> Self {
        Self {
            index: pair.index,
            note_index: pair.note_index,
            syllable: pair.syllable.clone(),
            phonemes: pair.phonemes.clone(),
            pitch: pair.pitch,
            d_note: pair.d_note,
            onset: pair.onset,
            duration: pair.duration,
            annotated: None,
            flags: Vec::new(),
        }
    }

    pub fn from_aligned(aligned: &AlignedPair) -> Self {
        Self {
            annotated: Some(aligned.annotated_durations.clone()),
            flags: aligned.flags.iter().copied().collect(),
            ..Self::from_pair(&aligned.pair)
        }
    }

    pub fn to_pair(&self, segment: usize) -> SyllableNotePair {
        SyllableNotePair {
            syllable: self.syllable.clone(),
            phonemes: self.phonemes.clone(),
            pitch: self.pitch,
            d_note: self.d_note,
            index: self.index,
            segment,
            note_index: self.note_index,
            onset: self.onset,
            duration: self.duration,
        }
    }
}

impl Manifest {
    pub fn new(clock: FrameClock, n_max: usize) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_owned(),
            clock,
            n_max,
            songs: Vec::new(),
            report: MisalignmentReport::default(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::schema(format!(
                "manifest schema {:?}, expected {MANIFEST_SCHEMA:?}",
                m.schema
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_json(&text).map_err(|e| e.at_path(path))
    }

    pub fn segments(&self) -> impl Iterator<Item = (&SongEntry, &SegmentEntry)> {
        self.songs
            .iter()
            .flat_map(|song| song.segments.iter().map(move |seg| (song, seg)))
    }
}
