//! `phonemix infer-durations`: PHONEix phoneme durations for a score.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use phonemix_core::ingest::parse_musicxml_subset;
use phonemix_core::model::{model_from_checkpoint, StrategyKind};
use phonemix_core::nn::Checkpoint;
use phonemix_core::score::{pair_score, PhonemeClass};
use phonemix_core::Error;

use crate::config::RunConfig;
use crate::UsageError;

pub const DURATIONS_SCHEMA: &str = "phonemix-durations/1";

#[derive(Args, Debug)]
pub struct InferArgs {
    /// MusicXML score to annotate.
    #[arg(long)]
    pub score: PathBuf,
    /// PHONEix checkpoint; defaults to the run's.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DurationListing {
    schema: &'static str,
    score: String,
    checkpoint: String,
    seconds_per_frame: f64,
    notes: Vec<NoteDurations>,
}

#[derive(Debug, Serialize)]
struct NoteDurations {
    note_index: usize,
    syllable: String,
    pitch: u8,
    d_note: u32,
    phonemes: Vec<PhonemeDuration>,
}

#[derive(Debug, Serialize)]
struct PhonemeDuration {
    symbol: String,
    class: PhonemeClass,
    proportion: f64,
    frames: u32,
    seconds: f64,
}

pub fn run(cfg: &RunConfig, args: &InferArgs, json_out: bool) -> Result<()> {
    let ckpt_path = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.checkpoint_path(&StrategyKind::Phoneix));
    if !ckpt_path.exists() {
        return Err(UsageError(format!("missing checkpoint {}", ckpt_path.display())).into());
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let (model, meta) = model_from_checkpoint(&ckpt).map_err(|e| e.at_path(&ckpt_path))?;
    if !meta.strategy.uses_distribution() {
        return Err(UsageError(format!(
            "{} holds a {} model; duration inference needs PHONEix",
            ckpt_path.display(),
            meta.strategy.label()
        ))
        .into());
    }

    let clock = meta.clock;
    let doc = std::fs::read(&args.score).map_err(|e| Error::from(e).at_path(&args.score))?;
    let parsed = parse_musicxml_subset(&doc, clock).map_err(|e| e.at_path(&args.score))?;
    let pairs = pair_score(&parsed.score, &cfg.lexicon()?).map_err(|e| e.at_path(&args.score))?;
    let (frames, dists) = model.plan_inference(&ckpt.params, &pairs, &meta.strategy)?;
    let dists = dists.expect("PHONEix plans carry distributions");
    let seconds_per_frame = clock.hop as f64 / clock.sample_rate as f64;

    let notes: Vec<NoteDurations> = pairs
        .iter()
        .zip(frames.iter().zip(&dists))
        .map(|(pair, (f, d))| NoteDurations {
            note_index: pair.note_index,
            syllable: pair.syllable.clone(),
            pitch: pair.pitch,
            d_note: pair.d_note,
            phonemes: pair
                .phonemes
                .iter()
                .zip(f.iter().zip(d.active()))
                .map(|(ph, (&frames, &proportion))| PhonemeDuration {
                    symbol: ph.symbol.clone(),
                    class: ph.class,
                    proportion,
                    frames,
                    seconds: frames as f64 * seconds_per_frame,
                })
                .collect(),
        })
        .collect();

    if json_out {
        let listing = DurationListing {
            schema: DURATIONS_SCHEMA,
            score: args.score.display().to_string(),
            checkpoint: ckpt_path.display().to_string(),
            seconds_per_frame,
            notes,
        };
        println!("{}", serde_json::to_string_pretty(&listing)?);
    } else {
        println!("note\tsyllable\tphoneme\tframes\tseconds");
        for n in &notes {
            for p in &n.phonemes {
                println!("{}\t{}\t{}\t{}\t{:.4}", n.note_index, n.syllable, p.symbol, p.frames, p.seconds);
            }
        }
    }
    Ok(())
}
