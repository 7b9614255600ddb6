//! Scores, annotations and audio in; manifest and feature dumps out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};

use phonemix_core::dsp::{read_wav, segment_mel, write_feature_dump};
use phonemix_core::ingest::{
    align_annotation, parse_musicxml_subset, parse_textgrid_subset, Manifest, MisalignmentReport, PairEntry,
    SegmentEntry, SongEntry,
};
use phonemix_core::score::{group_by_segment, pair_score, AnnotationTrack, FrameClock, PhonemeInterval};
use phonemix_core::Error;

use crate::config::RunConfig;
use crate::UsageError;

fn with_path<T>(r: phonemix_core::Result<T>, path: &Path) -> phonemix_core::Result<T> {
    r.map_err(|e| e.at_path(path))
}

/// Score files sorted by path, keyed by file stem.
fn score_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::from(e).at_path(dir))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::from(e).at_path(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("musicxml" | "xml")) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            if let Some(prev) = out.insert(stem.clone(), path.clone()) {
                return Err(UsageError(format!(
                    "two scores share the name {stem:?}: {} and {}",
                    prev.display(),
                    path.display()
                ))
                .into());
            }
        }
    }
    if out.is_empty() {
        return Err(UsageError(format!("no .musicxml or .xml scores in {}", dir.display())).into());
    }
    Ok(out)
}

fn companion(dir: Option<&Path>, stem: &str, ext: &str) -> Option<PathBuf> {
    let p = dir?.join(format!("{stem}.{ext}"));
    p.exists().then_some(p)
}

/// Annotation intervals whose midpoint lies inside `[start, end]`,
/// silences included.
fn clip(track: &AnnotationTrack, start: f64, end: f64) -> phonemix_core::Result<AnnotationTrack> {
    let within: Vec<PhonemeInterval> = track
        .intervals()
        .iter()
        .filter(|iv| iv.midpoint() > start && iv.midpoint() < end)
        .cloned()
        .collect();
    AnnotationTrack::new(within)
}

pub struct IngestSummary {
    pub manifest: Manifest,
    pub path: PathBuf,
}

pub fn run(cfg: &RunConfig) -> Result<IngestSummary> {
    let clock = FrameClock::default();
    let lexicon = cfg.lexicon()?;
    let out = &cfg.paths.out;
    let features_dir = out.join("features");
    fs::create_dir_all(&features_dir).map_err(|e| Error::from(e).at_path(&features_dir))?;

    let mut manifest = Manifest::new(clock, lexicon.n_max());
    for (stem, score_path) in score_files(&cfg.paths.scores)? {
        let bytes = fs::read(&score_path).map_err(|e| Error::from(e).at_path(&score_path))?;
        let parsed = with_path(parse_musicxml_subset(&bytes, clock), &score_path)?;
        let pairs = with_path(pair_score(&parsed.score, &lexicon), &score_path)?;

        let tg_path = companion(cfg.paths.annotations.as_deref(), &stem, "TextGrid");
        let track = match &tg_path {
            Some(p) => {
                let doc = fs::read(p).map_err(|e| Error::from(e).at_path(p))?;
                Some(with_path(parse_textgrid_subset(&doc, cfg.features.tier.as_deref()), p)?)
            }
            None => {
                warn!("{stem}: no annotation");
                None
            }
        };
        let wav_path = companion(cfg.paths.wavs.as_deref(), &stem, "wav");
        let waveform = match &wav_path {
            Some(p) => Some(with_path(read_wav(p, clock.sample_rate), p)?),
            None => {
                warn!("{stem}: no audio");
                None
            }
        };

        let mut segments = Vec::new();
        let mut report = MisalignmentReport::default();
        for (i, seg) in group_by_segment(&pairs).into_iter().enumerate() {
            let (start, end) = (seg[0].onset, seg[seg.len() - 1].end());
            let id = format!("{stem}-{i:03}");
            let entries: Vec<PairEntry> = match &track {
                Some(t) => {
                    let clipped = clip(t, start, end)?;
                    let (aligned, r) = align_annotation(&seg, &clipped, &clock)
                        .map_err(|e| e.at_path(tg_path.as_deref().unwrap_or(&score_path)))?;
                    report.merge(&r);
                    aligned.iter().map(PairEntry::from_aligned).collect()
                }
                None => seg.iter().map(PairEntry::from_pair).collect(),
            };
            let (features, frames) = match &waveform {
                Some(w) => {
                    let mel = segment_mel(w, start, end, &clock)
                        .map_err(|e| e.at_path(wav_path.as_deref().unwrap_or(&score_path)))?;
                    let rel = format!("features/{id}.phfx");
                    let path = out.join(&rel);
                    let mut buf = Vec::new();
                    write_feature_dump(&mut buf, &mel)?;
                    fs::write(&path, buf).map_err(|e| Error::from(e).at_path(&path))?;
                    (Some(rel), Some(mel.frames()))
                }
                None => (None, None),
            };
            segments.push(SegmentEntry {
                id,
                start,
                end,
                features,
                frames,
                pairs: entries,
            });
        }
        info!("{stem}: {} segments, {} pairs", segments.len(), pairs.len());
        manifest.report.merge(&report);
        manifest.songs.push(SongEntry {
            name: stem,
            score: score_path.display().to_string(),
            annotation: tg_path.map(|p| p.display().to_string()),
            wav: wav_path.map(|p| p.display().to_string()),
            warnings: parsed.warnings,
            segments,
        });
    }

    let path = cfg.manifest_path();
    fs::write(&path, manifest.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    let report_path = out.join("misalignment.json");
    fs::write(&report_path, serde_json::to_string_pretty(&manifest.report)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    Ok(IngestSummary { manifest, path })
}
