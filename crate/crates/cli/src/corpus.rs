//! Manifest segments as training and evaluation examples.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Result;
use log::warn;

use phonemix_core::dsp::{apply_normalization, read_feature_dump, FeatureMatrix, NormStats};
use phonemix_core::ingest::{Manifest, SegmentEntry, SongEntry};
use phonemix_core::model::TrainingBatch;
use phonemix_core::score::SyllableNotePair;
use phonemix_core::Error;

use crate::config::{RunConfig, Split};
use crate::UsageError;

pub struct Corpus {
    pub manifest: Manifest,
    pub root: PathBuf,
}

/// One segment with its raw (unnormalized) target mel.
pub struct Example<'a> {
    pub song: &'a SongEntry,
    pub segment: &'a SegmentEntry,
    pub pairs: Vec<SyllableNotePair>,
    pub annotated: Option<Vec<Vec<u32>>>,
    pub mel: FeatureMatrix,
}

impl Corpus {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg.manifest_path();
        if !path.exists() {
            return Err(UsageError(format!("no manifest at {}; run `phonemix ingest` first", path.display())).into());
        }
        let manifest = Manifest::load(&path)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Self { manifest, root })
    }

    /// Songs per split: (train, valid, test).
    pub fn split(&self, split: &Split) -> Result<(Vec<&SongEntry>, Vec<&SongEntry>, Vec<&SongEntry>)> {
        for name in split.valid.iter().chain(&split.test) {
            if !self.manifest.songs.iter().any(|s| &s.name == name) {
                return Err(UsageError(format!("split names unknown song {name:?}")).into());
            }
        }
        if let Some(n) = split.valid.iter().find(|n| split.test.contains(n)) {
            return Err(UsageError(format!("song {n:?} is in both valid and test")).into());
        }
        let pick = |names: &[String]| -> Vec<&SongEntry> {
            self.manifest.songs.iter().filter(|s| names.contains(&s.name)).collect()
        };
        let train = self
            .manifest
            .songs
            .iter()
            .filter(|s| !split.valid.contains(&s.name) && !split.test.contains(&s.name))
            .collect();
        Ok((train, pick(&split.valid), pick(&split.test)))
    }

    fn load_mel(&self, segment: &SegmentEntry) -> Result<Option<FeatureMatrix>> {
        let Some(rel) = &segment.features else {
            return Ok(None);
        };
        let path = self.root.join(rel);
        let file = File::open(&path).map_err(|e| Error::from(e).at_path(&path))?;
        let mel = read_feature_dump(BufReader::new(file), self.manifest.clock).map_err(|e| e.at_path(&path))?;
        Ok(Some(mel))
    }

    /// Segments of `songs` that have features, in manifest order.
    pub fn examples<'a>(&'a self, songs: &[&'a SongEntry]) -> Result<Vec<Example<'a>>> {
        let mut out = Vec::new();
        for song in songs {
            for (i, segment) in song.segments.iter().enumerate() {
                let Some(mel) = self.load_mel(segment)? else {
                    warn!("{}: no features, skipped", segment.id);
                    continue;
                };
                let annotated = segment
                    .pairs
                    .iter()
                    .map(|p| p.annotated.clone())
                    .collect::<Option<Vec<_>>>();
                out.push(Example {
                    song,
                    segment,
                    pairs: segment.pairs.iter().map(|p| p.to_pair(i)).collect(),
                    annotated,
                    mel,
                });
            }
        }
        Ok(out)
    }
}

/// Normalized training examples. Segments that lack an annotation the
/// strategy needs, or whose annotation disagrees with the audio length, are
/// skipped with a warning.
pub fn batches(examples: &[Example], stats: &NormStats, needs_annotation: bool) -> Result<Vec<TrainingBatch>> {
    let mut out = Vec::new();
    for ex in examples {
        if needs_annotation && ex.annotated.is_none() {
            warn!("{}: not annotated, skipped", ex.segment.id);
            continue;
        }
        let mel = apply_normalization(&ex.mel, stats)?;
        match TrainingBatch::new(ex.segment.id.clone(), ex.pairs.clone(), mel, ex.annotated.clone()) {
            Ok(b) => out.push(b),
            Err(e @ Error::Shape(_)) => warn!("{e}, skipped"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}
