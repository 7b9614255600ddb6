//! `phonemix train`.

use std::fs;

use anyhow::{Context, Result};
use log::info;
use serde_json::json;

use phonemix_core::dsp::fit_normalization;
use phonemix_core::model::{fit, AfpModel, ModelMetadata, StrategyKind, Vocab, MODEL_FORMAT};
use phonemix_core::nn::Checkpoint;
use phonemix_core::Error;

use crate::config::RunConfig;
use crate::corpus::{batches, Corpus};
use crate::UsageError;

fn needs_annotation(kind: &StrategyKind) -> bool {
    !matches!(kind, StrategyKind::Type1 { .. })
}

pub fn run(cfg: &RunConfig, json_out: bool) -> Result<()> {
    let kind = cfg.strategy(&cfg.train.strategy)?;
    let corpus = Corpus::load(cfg)?;
    let (train_songs, valid_songs, _) = corpus.split(&cfg.split)?;
    let train_ex = corpus.examples(&train_songs)?;
    let valid_ex = corpus.examples(&valid_songs)?;
    if train_ex.is_empty() {
        return Err(UsageError("no training segments with features; check the split and wav paths".into()).into());
    }

    let norm = fit_normalization(&train_ex.iter().map(|e| e.mel.clone()).collect::<Vec<_>>())?;
    let train = batches(&train_ex, &norm, needs_annotation(&kind))?;
    let valid = batches(&valid_ex, &norm, needs_annotation(&kind))?;
    if train.is_empty() {
        return Err(UsageError(format!("{} training needs annotated segments", kind.label())).into());
    }

    let mut model_cfg = cfg.model.clone();
    model_cfg.n_max = corpus.manifest.n_max;
    let vocab = Vocab::from_lexicon(&cfg.lexicon()?);
    let model = AfpModel::new(model_cfg.clone(), vocab.clone())?;
    let init = model.init_params(cfg.train.seed);
    info!(
        "training {} on {} segments ({} valid), {} epochs",
        kind.label(),
        train.len(),
        valid.len(),
        cfg.train.epochs
    );

    let logs = cfg.paths.out.join("logs");
    fs::create_dir_all(&logs).map_err(|e| Error::from(e).at_path(&logs))?;
    let result = match fit(&model, init, &train, &valid, &kind, cfg.train.epochs) {
        Ok(r) => r,
        Err(e) => {
            let dump = logs.join(format!("{}-failure.json", kind.name()));
            let diag = json!({
                "strategy": kind.name(),
                "seed": cfg.train.seed,
                "error": e.to_string(),
                "model": model_cfg,
                "segments": train.iter().map(|b| &b.segment).collect::<Vec<_>>(),
            });
            let _ = fs::write(&dump, serde_json::to_string_pretty(&diag)? + "\n");
            return Err(anyhow::Error::from(e).context(format!("training failed; diagnostics in {}", dump.display())));
        }
    };

    let meta = ModelMetadata {
        format: MODEL_FORMAT.into(),
        config: model_cfg,
        vocab,
        norm,
        strategy: kind,
        clock: corpus.manifest.clock,
        seed: cfg.train.seed,
        epoch: result.best_epoch,
        valid_loss: (!valid.is_empty()).then_some(result.best_loss),
    };
    let ckpt_path = cfg.checkpoint_path(&kind);
    if let Some(dir) = ckpt_path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
    }
    Checkpoint {
        metadata: meta.to_json(),
        params: result.params,
        optimizer: Some(result.optimizer),
    }
    .save(&ckpt_path)?;

    let log_path = logs.join(format!("{}.json", kind.name()));
    let log = json!({
        "strategy": kind.name(),
        "seed": cfg.train.seed,
        "config": cfg,
        "best_epoch": result.best_epoch,
        "best_loss": result.best_loss,
        "epochs": result.log,
    });
    fs::write(&log_path, serde_json::to_string_pretty(&log)? + "\n")
        .with_context(|| format!("writing {}", log_path.display()))?;

    if json_out {
        println!(
            "{}",
            json!({"strategy": kind.name(), "checkpoint": ckpt_path, "best_epoch": result.best_epoch, "best_loss": result.best_loss})
        );
    } else {
        let first = result.log.first().map(|l| l.train.total).unwrap_or(f64::NAN);
        let last = result.log.last().map(|l| l.train.total).unwrap_or(f64::NAN);
        println!(
            "{}: train loss {first:.4} -> {last:.4}, best epoch {} ({:.4}) -> {}",
            kind.label(),
            result.best_epoch,
            result.best_loss,
            ckpt_path.display()
        );
    }
    Ok(())
}
