//! How score and annotation durations become acoustic-encoder inputs and
//! length-regulator targets under each AFP strategy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::distribution::{infer_phoneme_frames, PhonemeDistribution};
use crate::error::{Error, Result};
use crate::score::{rint, SyllableNotePair};

pub const DEFAULT_CONSONANT_FRACTION: f64 = 0.3;
pub const DEFAULT_CONSONANT_CAP: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategyKind {
    /// Note durations into the encoder; rule-split targets for the regulator.
    Type1 { consonant_fraction: f64, consonant_cap: u32 },
    /// Annotated durations into the encoder while training; the rule splitter
    /// at inference.
    Type2 { consonant_fraction: f64, consonant_cap: u32 },
    /// Predicted phoneme distribution, rounded frame-wise.
    Phoneix,
}

impl StrategyKind {
    pub fn type1() -> Self {
        StrategyKind::Type1 {
            consonant_fraction: DEFAULT_CONSONANT_FRACTION,
            consonant_cap: DEFAULT_CONSONANT_CAP,
        }
    }

    pub fn type2() -> Self {
        StrategyKind::Type2 {
            consonant_fraction: DEFAULT_CONSONANT_FRACTION,
            consonant_cap: DEFAULT_CONSONANT_CAP,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Type1 { .. } => "type1",
            StrategyKind::Type2 { .. } => "type2",
            StrategyKind::Phoneix => "phoneix",
        }
    }

    /// Display name used in comparison tables.
    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::Type1 { .. } => "Type1",
            StrategyKind::Type2 { .. } => "Type2",
            StrategyKind::Phoneix => "PHONEix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" => Ok(Self::type1()),
            "type2" => Ok(Self::type2()),
            "phoneix" => Ok(StrategyKind::Phoneix),
            _ => Err(Error::InvalidArgument(format!(
                "unknown strategy {s:?} (expected type1, type2 or phoneix)"
            ))),
        }
    }

    pub fn uses_distribution(&self) -> bool {
        matches!(self, StrategyKind::Phoneix)
    }

    fn splitter(&self) -> (f64, u32) {
        match *self {
            StrategyKind::Type1 {
                consonant_fraction,
                consonant_cap,
            }
            | StrategyKind::Type2 {
                consonant_fraction,
                consonant_cap,
            } => (consonant_fraction, consonant_cap),
            StrategyKind::Phoneix => (DEFAULT_CONSONANT_FRACTION, DEFAULT_CONSONANT_CAP),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per pair, per phoneme frame counts.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyDurations {
    pub encoder: Vec<Vec<u32>>,
    /// `None` means the duration predictor decides.
    pub regulator: Option<Vec<Vec<u32>>>,
}

/// Deterministic stand-in for forced alignment. Each consonant gets
/// `min(rint(fraction * d_note), cap)` frames (at least 1); vowels share the
/// remainder, earlier vowels taking the extra frames. A syllable without a
/// vowel gives the remainder to its last phoneme. Sums to `d_note` whenever
/// `d_note >= k`; otherwise every phoneme gets one frame.
pub fn rule_split(pair: &SyllableNotePair, consonant_fraction: f64, consonant_cap: u32) -> Vec<u32> {
    let k = pair.k();
    let d = pair.d_note;
    if (d as usize) < k || k == 0 {
        return vec![1; k];
    }
    let vowels: Vec<usize> = (0..k).filter(|&i| pair.phonemes[i].is_vowel()).collect();
    let takers = if vowels.is_empty() { vec![k - 1] } else { vowels };
    let n_cons = (k - takers.len()) as u32;
    let mut cons = (rint(consonant_fraction * d as f64) as u32).min(consonant_cap).max(1);
    // leave at least one frame per remainder taker
    while n_cons > 0 && cons > 1 && n_cons * cons + takers.len() as u32 > d {
        cons -= 1;
    }
    let mut out = vec![cons; k];
    let rest = d - n_cons * cons;
    let share = rest / takers.len() as u32;
    let extra = (rest % takers.len() as u32) as usize;
    for (j, &i) in takers.iter().enumerate() {
        out[i] = share + u32::from(j < extra);
    }
    out
}

fn check_annotation<'a>(pairs: &[SyllableNotePair], aligned: Option<&'a [Vec<u32>]>) -> Result<&'a [Vec<u32>]> {
    let aligned = aligned.ok_or_else(|| {
        Error::MissingAnnotation("strategy needs aligned phoneme durations for training".into())
    })?;
    if aligned.len() != pairs.len() {
        return Err(Error::Shape(format!(
            "{} aligned pairs for {} score pairs",
            aligned.len(),
            pairs.len()
        )));
    }
    for (p, a) in pairs.iter().zip(aligned) {
        if a.len() != p.k() {
            return Err(Error::Shape(format!(
                "note {}: {} aligned durations for {} phonemes",
                p.note_index,
                a.len(),
                p.k()
            )));
        }
    }
    Ok(aligned)
}

/// Encoder durations and regulator targets for `pairs`. `aligned` holds the
/// annotated frames per pair; `distributions` the predicted phoneme
/// distributions (PHONEix only).
pub fn build_strategy_durations(
    kind: &StrategyKind,
    mode: Mode,
    pairs: &[SyllableNotePair],
    aligned: Option<&[Vec<u32>]>,
    distributions: Option<&[PhonemeDistribution]>,
) -> Result<StrategyDurations> {
    let (fraction, cap) = kind.splitter();
    let split = || pairs.iter().map(|p| rule_split(p, fraction, cap)).collect::<Vec<_>>();
    match (kind, mode) {
        (StrategyKind::Type1 { .. }, _) => Ok(StrategyDurations {
            encoder: pairs.iter().map(|p| vec![p.d_note; p.k()]).collect(),
            regulator: (mode == Mode::Train).then(split),
        }),
        (StrategyKind::Type2 { .. }, Mode::Train) => {
            let a = check_annotation(pairs, aligned)?.to_vec();
            Ok(StrategyDurations {
                encoder: a.clone(),
                regulator: Some(a),
            })
        }
        (StrategyKind::Type2 { .. }, Mode::Infer) => Ok(StrategyDurations {
            encoder: split(),
            regulator: None,
        }),
        (StrategyKind::Phoneix, _) => {
            let dists = distributions.ok_or_else(|| {
                Error::InvalidArgument("PHONEix durations need predicted distributions".into())
            })?;
            if dists.len() != pairs.len() {
                return Err(Error::Shape(format!(
                    "{} distributions for {} pairs",
                    dists.len(),
                    pairs.len()
                )));
            }
            let encoder = pairs
                .iter()
                .zip(dists)
                .map(|(p, d)| {
                    if d.k() != p.k() {
                        return Err(Error::Shape(format!(
                            "note {}: distribution over {} slots for {} phonemes",
                            p.note_index,
                            d.k(),
                            p.k()
                        )));
                    }
                    Ok(infer_phoneme_frames(d, p.d_note))
                })
                .collect::<Result<Vec<_>>>()?;
            let regulator = match mode {
                Mode::Train => Some(check_annotation(pairs, aligned)?.to_vec()),
                Mode::Infer => None,
            };
            Ok(StrategyDurations { encoder, regulator })
        }
    }
}

/// Simulated alignment error: for every multi-phoneme pair, moves up to
/// `max_shift` frames across one random internal boundary, keeping the pair
/// sum and a one-frame minimum.
pub fn inject_misalignment<R: Rng>(frames: &mut [Vec<u32>], max_shift: u32, rng: &mut R) {
    for f in frames.iter_mut().filter(|f| f.len() > 1) {
        let b = rng.gen_range(0..f.len() - 1);
        let shift = rng.gen_range(1..=max_shift.max(1)) as i64;
        let shift = if rng.gen_bool(0.5) { shift } else { -shift };
        let (left, right) = (f[b] as i64, f[b + 1] as i64);
        let s = shift.clamp(1 - left, right - 1);
        f[b] = (left + s) as u32;
        f[b + 1] = (right - s) as u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Phoneme, PhonemeClass};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(symbols: &[(&str, PhonemeClass)], d_note: u32) -> SyllableNotePair {
        SyllableNotePair {
            syllable: "x".into(),
            phonemes: symbols.iter().map(|(s, c)| Phoneme::new(*s, *c).unwrap()).collect(),
            pitch: 60,
            d_note,
            index: 0,
            segment: 0,
            note_index: 0,
            onset: 0.0,
            duration: d_note as f64 / 80.0,
        }
    }

    fn ka(d: u32) -> SyllableNotePair {
        pair(&[("k", PhonemeClass::Consonant), ("a", PhonemeClass::Vowel)], d)
    }

    #[test]
    fn splitter_example() {
        assert_eq!(rule_split(&ka(40), 0.3, 8), vec![8, 32]);
        assert_eq!(rule_split(&ka(10), 0.3, 8), vec![3, 7]);
        assert_eq!(rule_split(&ka(2), 0.3, 8), vec![1, 1]);
        assert_eq!(rule_split(&ka(1), 0.3, 8), vec![1, 1]);
    }

    #[test]
    fn splitter_edge_shapes() {
        let ccv = pair(
            &[
                ("s", PhonemeClass::Consonant),
                ("t", PhonemeClass::Consonant),
                ("a", PhonemeClass::Vowel),
            ],
            5,
        );
        // 2 * 2 + 1 = 5
        assert_eq!(rule_split(&ccv, 0.3, 8), vec![2, 2, 1]);
        let n = pair(&[("n", PhonemeClass::Consonant)], 12);
        assert_eq!(rule_split(&n, 0.3, 8), vec![12]);
        let aa = pair(&[("a", PhonemeClass::Vowel), ("i", PhonemeClass::Vowel)], 7);
        assert_eq!(rule_split(&aa, 0.3, 8), vec![4, 3]);
    }

    #[test]
    fn strategy_examples() {
        let pairs = vec![ka(40)];
        let t1 = build_strategy_durations(&StrategyKind::type1(), Mode::Train, &pairs, None, None).unwrap();
        assert_eq!(t1.encoder, vec![vec![40, 40]]);
        assert_eq!(t1.regulator, Some(vec![vec![8, 32]]));

        let aligned = vec![vec![8, 32]];
        let t2 = build_strategy_durations(&StrategyKind::type2(), Mode::Train, &pairs, Some(&aligned), None).unwrap();
        assert_eq!(t2.encoder, aligned);
        let t2i = build_strategy_durations(&StrategyKind::type2(), Mode::Infer, &pairs, None, None).unwrap();
        assert_eq!(t2i.encoder, vec![vec![8, 32]]);
        assert_eq!(t2i.regulator, None);

        let d = vec![PhonemeDistribution::new(vec![0.2, 0.8], 2).unwrap()];
        let ph = build_strategy_durations(&StrategyKind::Phoneix, Mode::Infer, &pairs, None, Some(&d)).unwrap();
        assert_eq!(ph.encoder, vec![vec![8, 32]]);
        assert_eq!(ph.regulator, None);
    }

    #[test]
    fn type2_training_needs_annotation() {
        let r = build_strategy_durations(&StrategyKind::type2(), Mode::Train, &[ka(40)], None, None);
        assert!(matches!(r, Err(Error::MissingAnnotation(_))));
    }

    #[test]
    fn phoneix_matches_type2_at_exact_proportions() {
        let pairs = vec![ka(40), ka(25)];
        let aligned = vec![vec![10, 30], vec![6, 19]];
        let dists: Vec<_> = pairs
            .iter()
            .zip(&aligned)
            .map(|(p, a)| {
                let v = a.iter().map(|x| *x as f64 / p.d_note as f64).collect();
                PhonemeDistribution::new(v, 2).unwrap()
            })
            .collect();
        let ph = build_strategy_durations(&StrategyKind::Phoneix, Mode::Train, &pairs, Some(&aligned), Some(&dists)).unwrap();
        let t2 = build_strategy_durations(&StrategyKind::type2(), Mode::Train, &pairs, Some(&aligned), None).unwrap();
        for (a, b) in ph.encoder.iter().flatten().zip(t2.encoder.iter().flatten()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn misalignment_keeps_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let orig = vec![vec![8, 32], vec![1, 1], vec![5], vec![2, 3, 4]];
        let mut f = orig.clone();
        inject_misalignment(&mut f, 4, &mut rng);
        for (a, b) in orig.iter().zip(&f) {
            assert_eq!(a.iter().sum::<u32>(), b.iter().sum::<u32>());
            assert!(b.iter().all(|x| *x >= 1));
        }
        assert_ne!(orig, f);
    }

    #[test]
    fn kind_parsing_and_serde() {
        assert_eq!(StrategyKind::parse("PHONEix").unwrap(), StrategyKind::Phoneix);
        assert!(StrategyKind::parse("type3").is_err());
        let json = serde_json::to_string(&StrategyKind::type1()).unwrap();
        assert_eq!(serde_json::from_str::<StrategyKind>(&json).unwrap(), StrategyKind::type1());
    }
}
