//! `phonemix synth`: a synthetic corpus plus a ready-to-run config.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use phonemix_core::synth::{SynthConfig, SynthCorpus};

use crate::config::{Paths, RunConfig, Split};
use crate::{Common, UsageError};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    pub songs: usize,
    #[arg(long, default_value_t = 3)]
    pub segments_per_song: usize,
    /// Training epochs written into the generated config.
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    /// Skip waveform rendering (scores and annotations only).
    #[arg(long)]
    pub no_audio: bool,
}

/// The config stored next to a generated corpus: the last song tests, the
/// one before it validates.
pub fn corpus_config(corpus: &SynthCorpus, epochs: usize, seed: u64, with_audio: bool) -> RunConfig {
    let names: Vec<String> = corpus.songs.iter().map(|s| s.name.clone()).collect();
    let n = names.len();
    let mut cfg = RunConfig {
        paths: Paths {
            scores: "scores".into(),
            annotations: Some("annotations".into()),
            wavs: with_audio.then(|| "wav".into()),
            lexicon: "lexicon.txt".into(),
            out: "run".into(),
        },
        split: Split {
            valid: vec![names[n - 2].clone()],
            test: vec![names[n - 1].clone()],
        },
        ..RunConfig::default()
    };
    cfg.train.seed = seed;
    cfg.train.epochs = epochs;
    cfg.model.batch_size = 4;
    cfg.model.n_max = corpus.lexicon.n_max();
    cfg
}

pub fn run(common: &Common, args: &SynthArgs) -> Result<()> {
    let dir: PathBuf = common
        .out
        .clone()
        .ok_or_else(|| UsageError("synth needs --out DIR".into()))?;
    if args.songs < 3 {
        return Err(UsageError("synth needs at least 3 songs (train, valid, test)".into()).into());
    }
    let seed = common.seed.unwrap_or(0);
    let corpus = SynthCorpus::generate(&SynthConfig {
        songs: args.songs,
        segments_per_song: args.segments_per_song,
        seed,
        with_audio: !args.no_audio,
        ..SynthConfig::default()
    })?;
    corpus.write(&dir)?;
    let cfg = corpus_config(&corpus, args.epochs, seed, !args.no_audio);
    let path = dir.join("run.toml");
    std::fs::write(&path, toml::to_string_pretty(&cfg)?).with_context(|| format!("writing {}", path.display()))?;
    if common.json {
        println!("{}", serde_json::json!({ "dir": dir, "config": path, "songs": args.songs }));
    } else {
        println!("{} songs -> {}", args.songs, dir.display());
        println!("config: {}", path.display());
    }
    Ok(())
}
