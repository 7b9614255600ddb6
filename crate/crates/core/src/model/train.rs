use log::warn;
use serde::{Deserialize, Serialize};

use super::afp::{duration_loss_graph, mel_loss_graph, AfpModel};
use super::distribution::phoneme_distribution_loss_graph;
use super::strategy::{build_strategy_durations, Mode, StrategyKind};
use super::{ModelConfig, Vocab};
use crate::dsp::{FeatureMatrix, NormStats};
use crate::error::{Error, Result};
use crate::nn::{adam_step, Checkpoint, Graph, OptimizerState, ParameterSet, Var};
use crate::score::{FrameClock, SyllableNotePair};

/// One segment's training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub segment: String,
    pub pairs: Vec<SyllableNotePair>,
    /// Normalized target mel.
    pub mel: FeatureMatrix,
    /// Aligned frames per phoneme per pair, when annotated.
    pub durations: Option<Vec<Vec<u32>>>,
}

impl TrainingBatch {
    /// Checks that annotated durations cover the mel to within one frame per
    /// pair.
    pub fn new(
        segment: impl Into<String>,
        pairs: Vec<SyllableNotePair>,
        mel: FeatureMatrix,
        durations: Option<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        let segment = segment.into();
        if pairs.is_empty() {
            return Err(Error::Shape(format!("segment {segment}: no pairs")));
        }
        if let Some(d) = &durations {
            if d.len() != pairs.len() {
                return Err(Error::Shape(format!(
                    "segment {segment}: {} duration lists for {} pairs",
                    d.len(),
                    pairs.len()
                )));
            }
            let total: i64 = d.iter().flatten().map(|x| *x as i64).sum();
            if (total - mel.frames() as i64).unsigned_abs() as usize > pairs.len() {
                return Err(Error::Shape(format!(
                    "segment {segment}: annotated {total} frames against {} mel frames",
                    mel.frames()
                )));
            }
        }
        Ok(Self {
            segment,
            pairs,
            mel,
            durations,
        })
    }
}

/// Per-term averages over the segments of one pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mel: f64,
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phoneme: Option<f64>,
    pub total: f64,
    /// Optimizer updates applied.
    pub steps: usize,
    pub segments: usize,
}

struct SegmentLoss {
    total: Var,
    mel: f64,
    duration: f64,
    phoneme: Option<f64>,
}

/// Builds every loss term for one segment under `kind`, teacher-forcing the
/// regulator with the strategy's training targets.
fn segment_loss(g: &mut Graph, model: &AfpModel, ps: &ParameterSet, batch: &TrainingBatch, kind: &StrategyKind) -> Result<SegmentLoss> {
    let pairs = &batch.pairs;
    let aligned = batch.durations.as_deref();
    let (probs, dists) = if kind.uses_distribution() {
        let prior = model.prior(g, ps, pairs)?;
        let d = model.distributions(g, prior.probs, pairs)?;
        (Some(prior.probs), Some(d))
    } else {
        (None, None)
    };
    let plan = build_strategy_durations(kind, Mode::Train, pairs, aligned, dists.as_deref())?;
    let regulator = plan
        .regulator
        .ok_or_else(|| Error::State("training strategy produced no regulator targets".into()))?;

    let encoded = model.acoustic_encode(g, ps, pairs, &plan.encoder, probs)?;
    let flat: Vec<u32> = regulator.iter().flatten().copied().collect();
    let dur_out = model.duration_graph(g, ps, encoded)?;
    let dur_loss = duration_loss_graph(g, dur_out, &flat)?;

    let counts: Vec<usize> = flat.iter().map(|f| *f as usize).collect();
    let frames = g.repeat_rows(encoded, &counts)?;
    let n = counts.iter().sum::<usize>();
    let m = batch.mel.frames();
    let t = n.min(m);
    if n != m {
        warn!("segment {}: regulated {n} frames against {m} mel frames, truncating", batch.segment);
    }
    if t == 0 {
        return Err(Error::Shape(format!("segment {}: no frames to decode", batch.segment)));
    }
    let frames = if t < n { g.slice_rows(frames, 0, t)? } else { frames };
    let mel_out = model.decode_graph(g, ps, frames)?;
    let target = batch.mel.truncated(t);
    let mel_loss = mel_loss_graph(g, mel_out, &target)?;

    let mut total = g.add(mel_loss, dur_loss)?;
    let mut phoneme = None;
    if let Some(probs) = probs {
        let a = aligned.ok_or_else(|| Error::MissingAnnotation(format!("segment {}", batch.segment)))?;
        let d_note: Vec<u32> = pairs.iter().map(|p| p.d_note).collect();
        let lph = phoneme_distribution_loss_graph(g, probs, &d_note, a)?;
        phoneme = Some(g.scalar(lph));
        total = g.add(total, lph)?;
    }
    let value = g.scalar(total);
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "segment {}: loss {value} (mel {}, duration {}, phoneme {:?})",
            batch.segment,
            g.scalar(mel_loss),
            g.scalar(dur_loss),
            phoneme
        )));
    }
    Ok(SegmentLoss {
        total,
        mel: g.scalar(mel_loss),
        duration: g.scalar(dur_loss),
        phoneme,
    })
}

fn summarize(acc: &mut LossSummary, l: &SegmentLoss, total: f64) {
    acc.mel += l.mel;
    acc.duration += l.duration;
    if let Some(p) = l.phoneme {
        *acc.phoneme.get_or_insert(0.0) += p;
    }
    acc.total += total;
    acc.segments += 1;
}

fn finish(mut acc: LossSummary) -> LossSummary {
    if acc.segments > 0 {
        let n = acc.segments as f64;
        acc.mel /= n;
        acc.duration /= n;
        acc.phoneme = acc.phoneme.map(|p| p / n);
        acc.total /= n;
    }
    acc
}

/// One pass over `batches` in order. Gradients are averaged over groups of
/// `batch_size` segments; each group is one Adam update.
pub fn train_epoch(
    model: &AfpModel,
    params: &mut ParameterSet,
    optimizer: &mut OptimizerState,
    batches: &[TrainingBatch],
    kind: &StrategyKind,
) -> Result<LossSummary> {
    let mut acc = LossSummary::default();
    for group in batches.chunks(model.config.batch_size) {
        params.zero_grad();
        let scale = 1.0 / group.len() as f64;
        for batch in group {
            let mut g = Graph::new();
            let l = segment_loss(&mut g, model, params, batch, kind)?;
            let grads = g.backward(l.total)?;
            params.accumulate(&grads, scale)?;
            summarize(&mut acc, &l, g.scalar(l.total));
        }
        adam_step(params, optimizer)?;
        acc.steps += 1;
    }
    Ok(finish(acc))
}

/// Loss terms without updates.
pub fn evaluate_loss(model: &AfpModel, params: &ParameterSet, batches: &[TrainingBatch], kind: &StrategyKind) -> Result<LossSummary> {
    let mut acc = LossSummary::default();
    for batch in batches {
        let mut g = Graph::new();
        let l = segment_loss(&mut g, model, params, batch, kind)?;
        summarize(&mut acc, &l, g.scalar(l.total));
    }
    Ok(finish(acc))
}

/// Trains only the prior encoder and distribution predictor on the phoneme
/// distribution loss. `batches` pair each segment with its aligned frames.
pub fn train_predictor_epoch(
    model: &AfpModel,
    params: &mut ParameterSet,
    optimizer: &mut OptimizerState,
    batches: &[(Vec<SyllableNotePair>, Vec<Vec<u32>>)],
) -> Result<f64> {
    let mut total = 0.0;
    for group in batches.chunks(model.config.batch_size) {
        params.zero_grad();
        let scale = 1.0 / group.len() as f64;
        for (pairs, aligned) in group {
            let mut g = Graph::new();
            let loss = predictor_loss(&mut g, model, params, pairs, aligned)?;
            let grads = g.backward(loss)?;
            params.accumulate(&grads, scale)?;
            total += g.scalar(loss);
        }
        adam_step(params, optimizer)?;
    }
    Ok(if batches.is_empty() { 0.0 } else { total / batches.len() as f64 })
}

/// Phoneme distribution loss through the prior encoder and predictor.
pub fn predictor_loss(g: &mut Graph, model: &AfpModel, params: &ParameterSet, pairs: &[SyllableNotePair], aligned: &[Vec<u32>]) -> Result<Var> {
    let prior = model.prior(g, params, pairs)?;
    let d_note: Vec<u32> = pairs.iter().map(|p| p.d_note).collect();
    phoneme_distribution_loss_graph(g, prior.probs, &d_note, aligned)
}

pub const MODEL_FORMAT: &str = "phonemix-model/1";

/// Everything besides the weights needed to rebuild a trained model; stored
/// as checkpoint metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format: String,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub norm: NormStats,
    pub strategy: StrategyKind,
    pub clock: FrameClock,
    pub seed: u64,
    pub epoch: usize,
    pub valid_loss: Option<f64>,
}

impl ModelMetadata {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(s).map_err(|e| Error::schema_at(e.line(), e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(Error::schema(format!("model format {:?}, expected {MODEL_FORMAT:?}", m.format)));
        }
        m.vocab.reindex();
        Ok(m)
    }
}

/// Rebuilds the model described by a checkpoint.
pub fn model_from_checkpoint(ckpt: &Checkpoint) -> Result<(AfpModel, ModelMetadata)> {
    let meta = ModelMetadata::from_json(&ckpt.metadata)?;
    let model = AfpModel::new(meta.config.clone(), meta.vocab.clone())?;
    let expected = model.init_params(0);
    for name in expected.names() {
        let want = expected.get(name)?.shape();
        let got = ckpt.params.get(name).map_err(|_| Error::schema(format!("checkpoint lacks parameter {name}")))?;
        if got.shape() != want {
            return Err(Error::schema(format!("parameter {name}: shape {:?}, expected {want:?}", got.shape())));
        }
    }
    if ckpt.params.len() != expected.len() {
        return Err(Error::schema("checkpoint has unexpected parameters"));
    }
    Ok((model, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid: Option<LossSummary>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters from the epoch with the lowest validation loss (training
    /// loss when there is no validation set).
    pub params: ParameterSet,
    pub optimizer: OptimizerState,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub log: Vec<EpochLog>,
}

/// Trains for `epochs` passes from `init`, keeping the best epoch. Ties keep
/// the earlier epoch.
pub fn fit(
    model: &AfpModel,
    init: ParameterSet,
    train: &[TrainingBatch],
    valid: &[TrainingBatch],
    kind: &StrategyKind,
    epochs: usize,
) -> Result<FitResult> {
    let mut params = init;
    let mut optimizer = OptimizerState::adam(model.config.learning_rate);
    let mut best: Option<(f64, usize, ParameterSet, OptimizerState)> = None;
    let mut log = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let train_loss = train_epoch(model, &mut params, &mut optimizer, train, kind)?;
        let valid_loss = if valid.is_empty() {
            None
        } else {
            Some(evaluate_loss(model, &params, valid, kind)?)
        };
        let score = valid_loss.as_ref().map_or(train_loss.total, |v| v.total);
        log::info!("epoch {epoch}: train {:.5} valid {:?}", train_loss.total, valid_loss.as_ref().map(|v| v.total));
        if best.as_ref().map_or(true, |(b, ..)| score < *b) {
            best = Some((score, epoch, params.clone(), optimizer.clone()));
        }
        log.push(EpochLog {
            epoch,
            train: train_loss,
            valid: valid_loss,
        });
    }
    let (best_loss, best_epoch, params, optimizer) = best.unwrap_or((f64::INFINITY, 0, params, optimizer));
    Ok(FitResult {
        params,
        optimizer,
        best_epoch,
        best_loss,
        log,
    })
}
