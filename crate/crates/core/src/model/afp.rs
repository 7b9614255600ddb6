//! The five-step acoustic model: prior encoder, phoneme distribution
//! predictor, acoustic encoder, duration predictor with length regulator,
//! and decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distribution::PhonemeDistribution;
use super::strategy::{build_strategy_durations, Mode, StrategyKind};
use super::{ModelConfig, Vocab};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::nn::{sinusoidal_positions, ConvStack, Embedding, Encoder, Graph, Linear, ParameterSet, Tensor, Var};
use crate::score::{rint, FrameClock, SyllableNotePair};

/// Pitch embedding size: every MIDI number.
pub const PITCH_VOCAB: usize = 128;

/// Note-level or phoneme-level input embedding: token + pitch + duration,
/// where duration enters both as a bucketed embedding and through a linear
/// map of `ln(1 + frames)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InputEmbedding {
    token: Embedding,
    pitch: Embedding,
    duration: Embedding,
    duration_scale: Linear,
}

impl InputEmbedding {
    fn new(name: &str, tokens: usize, config: &ModelConfig) -> Self {
        let e = config.embedding_dim;
        Self {
            token: Embedding::new(format!("{name}.token"), tokens, e),
            pitch: Embedding::new(format!("{name}.pitch"), PITCH_VOCAB, e),
            duration: Embedding::new(format!("{name}.duration"), config.max_duration_frames, e),
            duration_scale: Linear::new(format!("{name}.duration_scale"), 1, e),
        }
    }

    fn init(&self, ps: &mut ParameterSet, rng: &mut ChaCha8Rng) {
        self.token.init(ps, rng);
        self.pitch.init(ps, rng);
        self.duration.init(ps, rng);
        self.duration_scale.init(ps, rng);
    }

    /// `log_duration` is an `[n, 1]` column of `ln(1 + frames)`.
    fn forward(
        &self,
        g: &mut Graph,
        ps: &ParameterSet,
        tokens: &[usize],
        pitches: &[usize],
        frames: &[u32],
        log_duration: Var,
    ) -> Result<Var> {
        let buckets: Vec<usize> = frames
            .iter()
            .map(|f| (*f as usize).min(self.duration.vocab - 1))
            .collect();
        let t = self.token.forward(g, ps, tokens)?;
        let p = self.pitch.forward(g, ps, pitches)?;
        let d = self.duration.forward(g, ps, &buckets)?;
        let s = self.duration_scale.forward(g, ps, log_duration)?;
        let x = g.add(t, p)?;
        let x = g.add(x, d)?;
        g.add(x, s)
    }
}

fn log_duration_column(g: &mut Graph, frames: &[u32]) -> Result<Var> {
    g.input(frames.len(), 1, frames.iter().map(|f| (*f as f64).ln_1p()).collect())
}

/// Graph values of one forward pass over a segment.
#[derive(Debug, Clone, Copy)]
pub struct PriorOutput {
    pub encoded: Var,
    /// `[pairs, n_max]` masked probabilities.
    pub probs: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfpModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    prior_input: InputEmbedding,
    prior_encoder: Encoder,
    predictor: ConvStack,
    predictor_head: Linear,
    acoustic_input: InputEmbedding,
    acoustic_encoder: Encoder,
    duration: ConvStack,
    duration_head: Linear,
    decoder: ConvStack,
    decoder_head: Linear,
}

impl AfpModel {
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        if vocab.n_syllables() == 0 || vocab.n_phonemes() == 0 {
            return Err(Error::InvalidArgument("empty vocabulary".into()));
        }
        let e = config.embedding_dim;
        let prior_encoder = Encoder::new(config.prior_encoder, "prior.encoder", e, config.prior_hidden);
        let acoustic_encoder = if config.share_encoders {
            prior_encoder.clone()
        } else {
            Encoder::new(config.acoustic_encoder, "acoustic.encoder", e, config.acoustic_hidden)
        };
        let hp = prior_encoder.out_dim();
        let ha = acoustic_encoder.out_dim();
        let predictor = ConvStack::new(
            "predictor",
            hp,
            config.predictor_channels,
            config.predictor_kernel,
            config.predictor_layers,
        );
        let duration = ConvStack::new(
            "duration",
            ha,
            config.duration_channels,
            config.duration_kernel,
            config.duration_layers,
        );
        let decoder = ConvStack::new(
            "decoder",
            ha,
            config.decoder_hidden,
            config.decoder_kernel,
            config.decoder_layers,
        );
        Ok(Self {
            prior_input: InputEmbedding::new("prior", vocab.n_syllables(), &config),
            prior_encoder,
            predictor_head: Linear::new("predictor.head", config.predictor_channels, config.n_max),
            predictor,
            acoustic_input: InputEmbedding::new("acoustic", vocab.n_phonemes(), &config),
            acoustic_encoder,
            duration_head: Linear::new("duration.head", config.duration_channels, 1),
            duration,
            decoder_head: Linear::new("decoder.head", config.decoder_hidden, config.mel_dims),
            decoder,
            config,
            vocab,
        })
    }

    /// Fresh parameters from a seeded ChaCha8 stream, drawn in a fixed order.
    pub fn init_params(&self, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParameterSet::new();
        self.prior_input.init(&mut ps, &mut rng);
        self.prior_encoder.init(&mut ps, &mut rng);
        self.predictor.init(&mut ps, &mut rng);
        self.predictor_head.init(&mut ps, &mut rng);
        self.acoustic_input.init(&mut ps, &mut rng);
        if !self.config.share_encoders {
            self.acoustic_encoder.init(&mut ps, &mut rng);
        }
        self.duration.init(&mut ps, &mut rng);
        self.duration_head.init(&mut ps, &mut rng);
        self.decoder.init(&mut ps, &mut rng);
        self.decoder_head.init(&mut ps, &mut rng);
        ps
    }

    fn check_pairs(&self, pairs: &[SyllableNotePair]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::Shape("empty pair list".into()));
        }
        if let Some(p) = pairs.iter().find(|p| p.k() == 0 || p.k() > self.config.n_max) {
            return Err(Error::InvalidArgument(format!(
                "note {} has {} phonemes, model supports 1..={}",
                p.note_index,
                p.k(),
                self.config.n_max
            )));
        }
        Ok(())
    }

    /// Note-level hidden states `[pairs, hidden]`.
    pub fn prior_encode(&self, g: &mut Graph, ps: &ParameterSet, pairs: &[SyllableNotePair]) -> Result<Var> {
        self.check_pairs(pairs)?;
        let tokens = pairs
            .iter()
            .map(|p| self.vocab.syllable_id(&p.syllable))
            .collect::<Result<Vec<_>>>()?;
        let pitches: Vec<usize> = pairs.iter().map(|p| p.pitch as usize).collect();
        let frames: Vec<u32> = pairs.iter().map(|p| p.d_note).collect();
        let logd = log_duration_column(g, &frames)?;
        let x = self.prior_input.forward(g, ps, &tokens, &pitches, &frames, logd)?;
        self.prior_encoder.run(g, ps, x)
    }

    /// Masked probabilities `[pairs, n_max]` over each pair's phoneme slots.
    pub fn predict_distribution_graph(&self, g: &mut Graph, ps: &ParameterSet, prior: Var, k: &[usize]) -> Result<Var> {
        let (rows, _) = g.shape(prior);
        if k.len() != rows {
            return Err(Error::Shape(format!("{} slot counts for {rows} pairs", k.len())));
        }
        let h = self.predictor.forward(g, ps, prior)?;
        let logits = self.predictor_head.forward(g, ps, h)?;
        g.masked_softmax(logits, k)
    }

    pub fn prior(&self, g: &mut Graph, ps: &ParameterSet, pairs: &[SyllableNotePair]) -> Result<PriorOutput> {
        let encoded = self.prior_encode(g, ps, pairs)?;
        let k: Vec<usize> = pairs.iter().map(SyllableNotePair::k).collect();
        let probs = self.predict_distribution_graph(g, ps, encoded, &k)?;
        Ok(PriorOutput { encoded, probs })
    }

    /// Reads distributions back from a probability matrix.
    pub fn distributions(&self, g: &Graph, probs: Var, pairs: &[SyllableNotePair]) -> Result<Vec<PhonemeDistribution>> {
        let (_, n) = g.shape(probs);
        let values = g.value(probs);
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut row = values[i * n..(i + 1) * n].to_vec();
                // renormalize away float drift so the sum invariant holds exactly enough
                let s: f64 = row[..p.k()].iter().sum();
                row[..p.k()].iter_mut().for_each(|v| *v /= s);
                PhonemeDistribution::new(row, p.k())
            })
            .collect()
    }

    /// Phoneme distribution per pair, without gradients.
    pub fn predict_phoneme_distribution(&self, ps: &ParameterSet, pairs: &[SyllableNotePair]) -> Result<Vec<PhonemeDistribution>> {
        let mut g = Graph::new();
        let out = self.prior(&mut g, ps, pairs)?;
        self.distributions(&g, out.probs, pairs)
    }

    /// `d_note * p` per active slot, one row per phoneme, as a differentiable
    /// `[phonemes, 1]` column.
    fn continuous_durations(&self, g: &mut Graph, probs: Var, pairs: &[SyllableNotePair]) -> Result<Var> {
        let (rows, n) = g.shape(probs);
        let total: usize = pairs.iter().map(SyllableNotePair::k).sum();
        let mut select = vec![0.0; total * rows];
        let mut slot = vec![0.0; total * n];
        let mut r = 0;
        for (i, p) in pairs.iter().enumerate() {
            for j in 0..p.k() {
                select[r * rows + i] = p.d_note as f64;
                slot[r * n + j] = 1.0;
                r += 1;
            }
        }
        let select = g.input(total, rows, select)?;
        let slot = g.input(total, n, slot)?;
        let ones = g.constant(n, 1, 1.0);
        let spread = g.matmul(select, probs)?;
        let picked = g.mul(spread, slot)?;
        g.matmul(picked, ones)
    }

    /// Phoneme-level hidden states `[total phonemes, hidden]`. With
    /// `end_to_end` and `probs`, the duration feature is `ln(1 + d_note * p)`
    /// taken from the graph rather than from the rounded frames.
    pub fn acoustic_encode(
        &self,
        g: &mut Graph,
        ps: &ParameterSet,
        pairs: &[SyllableNotePair],
        frames: &[Vec<u32>],
        probs: Option<Var>,
    ) -> Result<Var> {
        self.check_pairs(pairs)?;
        if frames.len() != pairs.len() {
            return Err(Error::Shape(format!("{} frame lists for {} pairs", frames.len(), pairs.len())));
        }
        let mut tokens = Vec::new();
        let mut pitches = Vec::new();
        let mut flat = Vec::new();
        for (p, f) in pairs.iter().zip(frames) {
            if f.len() != p.k() {
                return Err(Error::Shape(format!(
                    "note {}: {} durations for {} phonemes",
                    p.note_index,
                    f.len(),
                    p.k()
                )));
            }
            for (ph, d) in p.phonemes.iter().zip(f) {
                tokens.push(self.vocab.phoneme_id(&ph.symbol)?);
                pitches.push(p.pitch as usize);
                flat.push(*d);
            }
        }
        let logd = match probs {
            Some(probs) if self.config.end_to_end => {
                let c = self.continuous_durations(g, probs, pairs)?;
                g.ln1p(c)
            }
            _ => log_duration_column(g, &flat)?,
        };
        let x = self.acoustic_input.forward(g, ps, &tokens, &pitches, &flat, logd)?;
        self.acoustic_encoder.run(g, ps, x)
    }

    /// Duration predictor output `[phonemes, 1]` in the `ln(1 + frames)`
    /// domain. The encoder output enters as a constant, so this loss trains
    /// only the predictor.
    pub fn duration_graph(&self, g: &mut Graph, ps: &ParameterSet, encoded: Var) -> Result<Var> {
        let detached = g.tensor(encoded);
        let x = g.input_tensor(&detached);
        let h = self.duration.forward(g, ps, x)?;
        self.duration_head.forward(g, ps, h)
    }

    /// Integer frames per phoneme from the predictor, at least 1.
    pub fn predict_frame_durations(&self, g: &mut Graph, ps: &ParameterSet, encoded: Var) -> Result<Vec<u32>> {
        let out = self.duration_graph(g, ps, encoded)?;
        Ok(log_domain_to_frames(g.value(out)))
    }

    /// Mel frames `[frames, mel_dims]` from frame-level features. Adds
    /// sinusoidal frame positions before the convolution stack.
    pub fn decode_graph(&self, g: &mut Graph, ps: &ParameterSet, frames: Var) -> Result<Var> {
        let (t, d) = g.shape(frames);
        if t == 0 {
            return Err(Error::Shape("decoder input has no frames".into()));
        }
        let pe = g.input(t, d, sinusoidal_positions(t, d))?;
        let x = g.add(frames, pe)?;
        let h = self.decoder.forward(g, ps, x)?;
        self.decoder_head.forward(g, ps, h)
    }

    pub fn decode_to_mel(&self, frame_features: &Tensor, ps: &ParameterSet, clock: FrameClock) -> Result<FeatureMatrix> {
        let mut g = Graph::new();
        let x = g.input_tensor(frame_features);
        let y = self.decode_graph(&mut g, ps, x)?;
        FeatureMatrix::new(g.value(y).to_vec(), self.config.mel_dims, clock)
    }
}

/// Result of running the model on one segment without targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    /// Durations fed to the acoustic encoder, per pair.
    pub encoder_frames: Vec<Vec<u32>>,
    /// Duration predictor output, one entry per phoneme.
    pub regulator_frames: Vec<u32>,
    /// Normalized mel, `sum(regulator_frames)` rows.
    pub mel: FeatureMatrix,
}

impl AfpModel {
    /// Encoder durations for `kind` at inference, plus the predicted
    /// distributions for PHONEix.
    pub fn plan_inference(
        &self,
        ps: &ParameterSet,
        pairs: &[SyllableNotePair],
        kind: &StrategyKind,
    ) -> Result<(Vec<Vec<u32>>, Option<Vec<PhonemeDistribution>>)> {
        let dists = if kind.uses_distribution() {
            Some(self.predict_phoneme_distribution(ps, pairs)?)
        } else {
            None
        };
        let plan = build_strategy_durations(kind, Mode::Infer, pairs, None, dists.as_deref())?;
        Ok((plan.encoder, dists))
    }

    /// Acoustic encoder, duration predictor, length regulator and decoder.
    pub fn synthesize(
        &self,
        ps: &ParameterSet,
        pairs: &[SyllableNotePair],
        encoder_frames: Vec<Vec<u32>>,
        clock: FrameClock,
    ) -> Result<Synthesis> {
        let mut g = Graph::new();
        let encoded = self.acoustic_encode(&mut g, ps, pairs, &encoder_frames, None)?;
        let regulator_frames = self.predict_frame_durations(&mut g, ps, encoded)?;
        let counts: Vec<usize> = regulator_frames.iter().map(|f| *f as usize).collect();
        let frames = g.repeat_rows(encoded, &counts)?;
        let mel = self.decode_graph(&mut g, ps, frames)?;
        Ok(Synthesis {
            encoder_frames,
            regulator_frames,
            mel: FeatureMatrix::new(g.value(mel).to_vec(), self.config.mel_dims, clock)?,
        })
    }
}

/// `max(rint(exp(x) - 1), 1)` per value.
pub fn log_domain_to_frames(values: &[f64]) -> Vec<u32> {
    values
        .iter()
        .map(|x| {
            let f = rint(x.exp() - 1.0);
            if f.is_finite() {
                f.clamp(1.0, u32::MAX as f64) as u32
            } else {
                1
            }
        })
        .collect()
}

/// Mean squared error between predictions `[n, 1]` and `ln(1 + targets)`.
pub fn duration_loss_graph(g: &mut Graph, predicted: Var, targets: &[u32]) -> Result<Var> {
    let t = log_duration_column(g, targets)?;
    let d = g.sub(predicted, t)?;
    let sq = g.square(d);
    Ok(g.mean(sq))
}

/// Frame-wise `mean |y - t| + mean (y - t)^2`. Callers align lengths first.
pub fn mel_loss_graph(g: &mut Graph, predicted: Var, target: &FeatureMatrix) -> Result<Var> {
    let (t, d) = g.shape(predicted);
    if t != target.frames() || d != target.dims() {
        return Err(Error::Shape(format!(
            "prediction {t}x{d} against target {}x{}",
            target.frames(),
            target.dims()
        )));
    }
    let y = g.input(t, d, target.as_slice().to_vec())?;
    let diff = g.sub(predicted, y)?;
    let a = g.abs(diff);
    let l1 = g.mean(a);
    let s = g.square(diff);
    let l2 = g.mean(s);
    g.add(l1, l2)
}

/// Repeats row `i` of `encoded` `frames[i]` times.
pub fn length_regulate(encoded: &Tensor, frames: &[i64]) -> Result<Tensor> {
    if frames.len() != encoded.rows() {
        return Err(Error::Shape(format!(
            "{} durations for {} rows",
            frames.len(),
            encoded.rows()
        )));
    }
    if let Some(f) = frames.iter().find(|f| **f < 0) {
        return Err(Error::InvalidArgument(format!("negative frame count {f}")));
    }
    let mut g = Graph::new();
    let x = g.input_tensor(encoded);
    let counts: Vec<usize> = frames.iter().map(|f| *f as usize).collect();
    let y = g.repeat_rows(x, &counts)?;
    Ok(g.tensor(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StrategyKind;
    use crate::nn::{check_gradients, EncoderKind};
    use crate::score::Lexicon;

    pub(crate) fn lexicon() -> Lexicon {
        Lexicon::parse("ka k a\nsa s a\na a\nto t o\n").unwrap()
    }

    pub(crate) fn pairs(spec: &[(&str, u8, u32)]) -> Vec<SyllableNotePair> {
        let lex = lexicon();
        let mut onset = 0.0;
        spec.iter()
            .enumerate()
            .map(|(i, (s, pitch, d))| {
                let p = SyllableNotePair {
                    syllable: s.to_string(),
                    phonemes: lex.get(s).unwrap().to_vec(),
                    pitch: *pitch,
                    d_note: *d,
                    index: i,
                    segment: 0,
                    note_index: i,
                    onset,
                    duration: *d as f64 / 80.0,
                };
                onset += p.duration;
                p
            })
            .collect()
    }

    fn small(kind: EncoderKind) -> AfpModel {
        let config = ModelConfig {
            embedding_dim: 6,
            prior_encoder: kind,
            prior_hidden: 4,
            acoustic_encoder: kind,
            acoustic_hidden: 4,
            predictor_channels: 5,
            duration_channels: 4,
            decoder_hidden: 6,
            mel_dims: 3,
            max_duration_frames: 64,
            ..ModelConfig::default()
        };
        AfpModel::new(config, Vocab::from_lexicon(&lexicon())).unwrap()
    }

    #[test]
    fn prior_shapes_and_context() {
        for kind in [EncoderKind::Recurrent, EncoderKind::Attention] {
            let m = small(kind);
            let ps = m.init_params(1);
            let mut g = Graph::new();
            let one = m.prior_encode(&mut g, &ps, &pairs(&[("ka", 60, 20)])).unwrap();
            assert_eq!(g.shape(one), (1, m.prior_encoder.out_dim()));

            let a = pairs(&[("ka", 60, 20), ("sa", 62, 10), ("a", 64, 30), ("to", 65, 12)]);
            let mut b = a.clone();
            b[3].syllable = "ka".into();
            b[3].phonemes = a[0].phonemes.clone();
            let mut g = Graph::new();
            let ea = m.prior_encode(&mut g, &ps, &a).unwrap();
            let eb = m.prior_encode(&mut g, &ps, &b).unwrap();
            let h = m.prior_encoder.out_dim();
            // the first row sees the last note through context
            assert_ne!(&g.value(ea)[..h], &g.value(eb)[..h]);
        }
    }

    #[test]
    fn zero_inputs_give_zero_prior() {
        let m = small(EncoderKind::Recurrent);
        let mut ps = m.init_params(2);
        let names: Vec<String> = ps
            .names()
            .filter(|n| n.starts_with("prior.") && (!n.contains(".encoder.") || n.contains(".b_")))
            .map(str::to_owned)
            .collect();
        for n in names {
            ps.get_mut(&n).unwrap().values_mut().fill(0.0);
        }
        let mut g = Graph::new();
        let e = m.prior_encode(&mut g, &ps, &pairs(&[("ka", 60, 20), ("a", 61, 8)])).unwrap();
        assert!(g.value(e).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_syllable_is_vocabulary_error() {
        let m = small(EncoderKind::Recurrent);
        let ps = m.init_params(1);
        let mut p = pairs(&[("ka", 60, 20)]);
        p[0].syllable = "zu".into();
        let mut g = Graph::new();
        assert!(matches!(m.prior_encode(&mut g, &ps, &p), Err(Error::Vocabulary { .. })));
    }

    #[test]
    fn distributions_respect_mask() {
        let m = small(EncoderKind::Recurrent);
        for seed in 0..5 {
            let ps = m.init_params(seed);
            let p = pairs(&[("ka", 60, 20), ("a", 62, 10), ("to", 70, 44)]);
            let d = m.predict_phoneme_distribution(&ps, &p).unwrap();
            assert_eq!(d[1].p(), &[1.0, 0.0]);
            for x in &d {
                let s: f64 = x.active().iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn acoustic_shapes_and_duration_sensitivity() {
        let m = small(EncoderKind::Recurrent);
        let ps = m.init_params(3);
        let p = pairs(&[("ka", 60, 20), ("a", 62, 10)]);
        let mut g = Graph::new();
        let e = m.acoustic_encode(&mut g, &ps, &p, &[vec![5, 15], vec![10]], None).unwrap();
        assert_eq!(g.shape(e).0, 3);
        let e2 = m.acoustic_encode(&mut g, &ps, &p, &[vec![6, 14], vec![10]], None).unwrap();
        let h = m.acoustic_encoder.out_dim();
        assert_ne!(&g.value(e)[..h], &g.value(e2)[..h]);
        assert!(matches!(
            m.acoustic_encode(&mut g, &ps, &p, &[vec![5, 15]], None),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            m.acoustic_encode(&mut g, &ps, &p, &[vec![5], vec![10]], None),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            m.acoustic_encode(&mut g, &ps, &[], &[], None),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn frame_inversion() {
        assert_eq!(log_domain_to_frames(&[6f64.ln(); 3]), vec![5, 5, 5]);
        assert_eq!(log_domain_to_frames(&[-3.0, 0.0]), vec![1, 1]);
        let mut g = Graph::new();
        let x = g.input(2, 1, vec![4f64.ln(), 9f64.ln()]).unwrap();
        let l = duration_loss_graph(&mut g, x, &[3, 8]).unwrap();
        assert!(g.scalar(l).abs() < 1e-15);
    }

    #[test]
    fn duration_predictor_gradients() {
        let m = small(EncoderKind::Recurrent);
        let ps = m.init_params(4);
        let encoded = Tensor::matrix(4, 8, (0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect()).unwrap();
        let dur: ParameterSet = {
            let mut d = ParameterSet::new();
            for (n, p) in ps.iter().filter(|(n, _)| n.starts_with("duration.")) {
                d.insert(n, p.value.clone());
            }
            d
        };
        let report = check_gradients(
            |g, ps| {
                let x = g.input_tensor(&encoded);
                let y = m.duration_graph(g, ps, x)?;
                duration_loss_graph(g, y, &[3, 9, 1, 20])
            },
            &dur,
            1e-6,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn length_regulation() {
        let x = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(length_regulate(&x, &[1, 1, 1]).unwrap(), x);
        let y = length_regulate(&x, &[2, 0, 3]).unwrap();
        assert_eq!(y.rows(), 5);
        assert_eq!(y.values(), &[1.0, 2.0, 1.0, 2.0, 5.0, 6.0, 5.0, 6.0, 5.0, 6.0]);
        assert_eq!(length_regulate(&x, &[0, 0, 0]).unwrap().rows(), 0);
        assert!(matches!(length_regulate(&x, &[1, -1, 1]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn decoder_shapes_and_zero_params() {
        let m = small(EncoderKind::Recurrent);
        let mut ps = m.init_params(5);
        let x = Tensor::matrix(7, 8, vec![0.1; 56]).unwrap();
        let mel = m.decode_to_mel(&x, &ps, FrameClock::default()).unwrap();
        assert_eq!((mel.frames(), mel.dims()), (7, 3));
        let names: Vec<String> = ps.names().filter(|n| n.starts_with("decoder.")).map(str::to_owned).collect();
        for n in names {
            ps.get_mut(&n).unwrap().values_mut().fill(0.0);
        }
        let mel = m.decode_to_mel(&x, &ps, FrameClock::default()).unwrap();
        assert!(mel.as_slice().iter().all(|v| *v == 0.0));
        let empty = Tensor::matrix(0, 8, vec![]).unwrap();
        assert!(matches!(m.decode_to_mel(&empty, &ps, FrameClock::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn synthesis_length_follows_predicted_durations() {
        let m = small(EncoderKind::Recurrent);
        let ps = m.init_params(6);
        let p = pairs(&[("ka", 60, 20), ("a", 62, 10), ("to", 64, 16)]);
        for kind in [StrategyKind::type1(), StrategyKind::type2(), StrategyKind::Phoneix] {
            let (enc, dists) = m.plan_inference(&ps, &p, &kind).unwrap();
            assert_eq!(dists.is_some(), kind == StrategyKind::Phoneix);
            let s = m.synthesize(&ps, &p, enc, FrameClock::default()).unwrap();
            assert_eq!(s.regulator_frames.len(), 5);
            assert_eq!(s.mel.frames(), s.regulator_frames.iter().sum::<u32>() as usize);
        }
    }

    #[test]
    fn shared_encoders_have_one_weight_set() {
        let config = ModelConfig {
            share_encoders: true,
            ..small(EncoderKind::Recurrent).config
        };
        let m = AfpModel::new(config, Vocab::from_lexicon(&lexicon())).unwrap();
        let ps = m.init_params(0);
        assert!(!ps.names().any(|n| n.starts_with("acoustic.encoder")));
        let mut g = Graph::new();
        let p = pairs(&[("ka", 60, 20)]);
        m.acoustic_encode(&mut g, &ps, &p, &[vec![4, 16]], None).unwrap();
    }
}
