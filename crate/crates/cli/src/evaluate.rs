//! `phonemix compare` and `phonemix eval`: test-split metrics per strategy.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phonemix_core::dsp::{estimate_f0_with, griffin_lim, read_wav, segment_samples, PitchTrack};
use phonemix_core::metrics::{
    duration_report, mcd, reports_to_csv, semitone_accuracy, vuv_error, EvalReport, SegmentEval, DEFAULT_MCD_ORDER,
};
use phonemix_core::model::{inject_misalignment, model_from_checkpoint, StrategyKind};
use phonemix_core::nn::Checkpoint;
use phonemix_core::Error;

use crate::config::RunConfig;
use crate::corpus::{Corpus, Example};
use crate::UsageError;

/// Reference pitch per segment, from the recording.
fn reference_pitch(cfg: &RunConfig, corpus: &Corpus, examples: &[Example]) -> Result<BTreeMap<String, PitchTrack>> {
    let clock = corpus.manifest.clock;
    let mut waves: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for ex in examples {
        let Some(wav) = &ex.song.wav else {
            continue;
        };
        if !waves.contains_key(wav.as_str()) {
            let path = Path::new(wav);
            waves.insert(wav, read_wav(path, clock.sample_rate).map_err(|e| e.at_path(path))?);
        }
        let samples = segment_samples(&waves[wav.as_str()], ex.segment.start, ex.segment.end, &clock)?;
        out.insert(
            ex.segment.id.clone(),
            estimate_f0_with(&samples, &clock, cfg.features.voicing_threshold)?,
        );
    }
    Ok(out)
}

fn evaluate_strategy(
    cfg: &RunConfig,
    name: &str,
    examples: &[Example],
    ref_f0: &BTreeMap<String, PitchTrack>,
) -> Result<EvalReport> {
    let requested = cfg.strategy(name)?;
    let path = cfg.checkpoint_path(&requested);
    if !path.exists() {
        return Err(UsageError(format!(
            "missing checkpoint {}; run `phonemix train --strategy {name}` first",
            path.display()
        ))
        .into());
    }
    let ckpt = Checkpoint::load(&path)?;
    let (model, meta) = model_from_checkpoint(&ckpt).map_err(|e| e.at_path(&path))?;
    let kind = meta.strategy;
    if kind.name() != requested.name() {
        return Err(UsageError(format!("{} holds a {} model, not {name}", path.display(), kind.label())).into());
    }
    let clock = meta.clock;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);

    let mut segments = Vec::new();
    let (mut enc_pred, mut reg_pred, mut annotated, mut classes) = (vec![], vec![], vec![], vec![]);
    for ex in examples {
        let (mut frames, _) = model.plan_inference(&ckpt.params, &ex.pairs, &kind)?;
        if matches!(kind, StrategyKind::Type2 { .. }) && cfg.compare.misalignment_frames > 0 {
            inject_misalignment(&mut frames, cfg.compare.misalignment_frames, &mut rng);
        }
        let syn = model.synthesize(&ckpt.params, &ex.pairs, frames, clock)?;
        let mel = meta.norm.denormalize(&syn.mel)?;
        let distortion = mcd(&ex.mel, &mel, DEFAULT_MCD_ORDER)?;

        let (vuv_e, sa) = match ref_f0.get(&ex.segment.id) {
            Some(reference) => {
                let wave = griffin_lim(&mel, cfg.compare.griffin_lim_iterations)?;
                let synthesized = estimate_f0_with(&wave, &clock, cfg.features.voicing_threshold)?;
                (vuv_error(reference, &synthesized)?, semitone_accuracy(reference, &synthesized)?)
            }
            None => {
                warn!("{}: no recording, VUV_E and SA left at 0", ex.segment.id);
                (0.0, 0.0)
            }
        };
        segments.push(SegmentEval {
            segment: ex.segment.id.clone(),
            mcd: distortion,
            vuv_e,
            sa,
            frames: ex.mel.frames().min(mel.frames()),
        });

        if let Some(a) = &ex.annotated {
            enc_pred.extend(syn.encoder_frames.iter().flatten().copied());
            reg_pred.extend(syn.regulator_frames.iter().copied());
            annotated.extend(a.iter().flatten().copied());
            classes.extend(ex.pairs.iter().flat_map(|p| p.phonemes.iter().map(|ph| ph.class)));
        }
    }
    let mut report = EvalReport::from_segments(kind.label(), segments)?;
    if !annotated.is_empty() {
        report.duration = Some(duration_report(&enc_pred, &annotated, &classes)?);
        report.regulator_duration = Some(duration_report(&reg_pred, &annotated, &classes)?);
    }
    info!("{}: MCD {:.3}", kind.label(), report.mcd);
    Ok(report)
}

fn test_examples<'a>(cfg: &RunConfig, corpus: &'a Corpus) -> Result<Vec<Example<'a>>> {
    let (_, _, test) = corpus.split(&cfg.split)?;
    if test.is_empty() {
        return Err(UsageError("the split names no test songs".into()).into());
    }
    let examples = corpus.examples(&test)?;
    if examples.is_empty() {
        return Err(UsageError("no test segments with features".into()).into());
    }
    Ok(examples)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn compare(cfg: &RunConfig, json_out: bool) -> Result<()> {
    if cfg.compare.strategies.is_empty() {
        return Err(UsageError("compare needs at least one strategy".into()).into());
    }
    for s in &cfg.compare.strategies {
        cfg.strategy(s)?;
    }
    let corpus = Corpus::load(cfg)?;
    let examples = test_examples(cfg, &corpus)?;
    let ref_f0 = reference_pitch(cfg, &corpus, &examples)?;
    let reports = cfg
        .compare
        .strategies
        .iter()
        .map(|s| evaluate_strategy(cfg, s, &examples, &ref_f0))
        .collect::<Result<Vec<_>>>()?;
    let csv = reports_to_csv(&reports);
    let json = serde_json::to_string_pretty(&reports)? + "\n";
    write(&cfg.paths.out.join("compare.csv"), &csv)?;
    write(&cfg.paths.out.join("compare.json"), &json)?;
    print!("{}", if json_out { &json } else { &csv });
    Ok(())
}

pub fn eval(cfg: &RunConfig, json_out: bool) -> Result<()> {
    let corpus = Corpus::load(cfg)?;
    let examples = test_examples(cfg, &corpus)?;
    let ref_f0 = reference_pitch(cfg, &corpus, &examples)?;
    let report = evaluate_strategy(cfg, &cfg.train.strategy, &examples, &ref_f0)?;
    let name = cfg.strategy(&cfg.train.strategy)?.name();
    let json = report.to_json() + "\n";
    write(&cfg.paths.out.join("eval").join(format!("{name}.json")), &json)?;
    if json_out {
        print!("{json}");
    } else {
        print!("{}", reports_to_csv(std::slice::from_ref(&report)));
    }
    Ok(())
}

