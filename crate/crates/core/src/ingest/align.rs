//! Greedy matching of annotated phoneme intervals to syllable-note pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{AnnotationTrack, FrameClock, PhonemeInterval, SyllableNotePair, rint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignFlag {
    /// An annotated phoneme had no slot in the pair's lexicon entry.
    RedundantPhoneme,
    /// A lexicon phoneme had no annotated interval.
    MissingPhoneme,
    /// Matched intervals extend more than one frame past the note boundaries.
    BoundaryShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub pair: SyllableNotePair,
    /// Annotated frames per phoneme slot.
    pub annotated_durations: Vec<u32>,
    pub flags: BTreeSet<AlignFlag>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MisalignmentReport {
    pub counts: BTreeMap<AlignFlag, usize>,
    /// `(note_index, flags)` for every flagged pair.
    pub per_pair: Vec<(usize, Vec<AlignFlag>)>,
    /// Sum over pairs of (annotated frames - note frames).
    pub duration_discrepancy_frames: i64,
    /// Non-silence intervals that fell outside every note.
    pub unassigned_intervals: usize,
}

impl MisalignmentReport {
    pub fn merge(&mut self, other: &MisalignmentReport) {
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_default() += v;
        }
        self.per_pair.extend(other.per_pair.iter().cloned());
        self.duration_discrepancy_frames += other.duration_discrepancy_frames;
        self.unassigned_intervals += other.unassigned_intervals;
    }

    pub fn count(&self, flag: AlignFlag) -> usize {
        self.counts.get(&flag).copied().unwrap_or(0)
    }
}

fn boundary_frame(t: f64, clock: &FrameClock) -> i64 {
    rint(t * clock.frame_rate()) as i64
}

/// Frames of an interval, measured between rounded boundaries so that
/// adjacent intervals tile without accumulating rounding error.
fn interval_frames(iv: &PhonemeInterval, clock: &FrameClock) -> u32 {
    (boundary_frame(iv.end, clock) - boundary_frame(iv.start, clock)).max(0) as u32
}

/// Aligns an annotation track to the pairs of one segment.
///
/// Intervals are assigned to the note whose span contains their midpoint,
/// then matched left to right against the lexicon phonemes by exact symbol.
pub fn align_annotation(
    pairs: &[SyllableNotePair],
    track: &AnnotationTrack,
    clock: &FrameClock,
) -> Result<(Vec<AlignedPair>, MisalignmentReport)> {
    let speech = track.intervals().iter().filter(|iv| !iv.is_silence()).count();
    if pairs.is_empty() {
        if speech > 0 {
            return Err(Error::Alignment(format!(
                "{speech} annotated phonemes but no syllable-note pairs"
            )));
        }
        return Ok((Vec::new(), MisalignmentReport::default()));
    }

    let mut report = MisalignmentReport::default();
    let mut aligned = Vec::with_capacity(pairs.len());
    let mut assigned = 0usize;
    let tolerance = clock.frame_seconds();

    for pair in pairs {
        let ivs: Vec<&PhonemeInterval> = track.within(pair.onset, pair.end()).collect();
        assigned += ivs.len();
        let slots = &pair.phonemes;
        let mut durations = vec![0u32; slots.len()];
        let mut matched = vec![false; slots.len()];
        let mut flags = BTreeSet::new();

        let mut slot = 0usize;
        for iv in &ivs {
            match slots[slot.min(slots.len())..]
                .iter()
                .position(|p| p.symbol == iv.phoneme)
            {
                Some(offset) => {
                    slot += offset;
                    durations[slot] = interval_frames(iv, clock);
                    matched[slot] = true;
                    slot += 1;
                    if iv.start < pair.onset - tolerance || iv.end > pair.end() + tolerance {
                        flags.insert(AlignFlag::BoundaryShift);
                    }
                }
                None => {
                    flags.insert(AlignFlag::RedundantPhoneme);
                }
            }
        }
        if matched.iter().any(|m| !m) {
            flags.insert(AlignFlag::MissingPhoneme);
        }

        for f in &flags {
            *report.counts.entry(*f).or_default() += 1;
        }
        if !flags.is_empty() {
            report
                .per_pair
                .push((pair.note_index, flags.iter().copied().collect()));
        }
        report.duration_discrepancy_frames +=
            durations.iter().map(|d| *d as i64).sum::<i64>() - pair.d_note as i64;
        aligned.push(AlignedPair {
            pair: pair.clone(),
            annotated_durations: durations,
            flags,
        });
    }

    let (first, last) = (pairs[0].onset, pairs[pairs.len() - 1].end());
    report.unassigned_intervals = track.within(first, last).count().saturating_sub(assigned);
    Ok((aligned, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{pair_score, Lexicon, MusicScore, Note};

    fn pairs_for(syl: &str, lex: &str) -> Vec<SyllableNotePair> {
        let score =
            MusicScore::new(vec![Note::new(Some(60), 0.0, 0.5, syl).unwrap()], FrameClock::default())
                .unwrap();
        pair_score(&score, &Lexicon::parse(lex).unwrap()).unwrap()
    }

    fn track(ivs: &[(&str, f64, f64)]) -> AnnotationTrack {
        AnnotationTrack::new(
            ivs.iter()
                .map(|(p, a, b)| PhonemeInterval::new(*p, *a, *b).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_match() {
        let pairs = pairs_for("ka", "ka k a\n");
        let (al, rep) = align_annotation(
            &pairs,
            &track(&[("k", 0.0, 0.1), ("a", 0.1, 0.5)]),
            &FrameClock::default(),
        )
        .unwrap();
        assert_eq!(al[0].annotated_durations, vec![8, 32]);
        assert!(al[0].flags.is_empty());
        assert!(rep.counts.is_empty());
        assert_eq!(rep.duration_discrepancy_frames, 0);
    }

    #[test]
    fn missing_phoneme() {
        let pairs = pairs_for("ka", "ka k a\n");
        let (al, rep) =
            align_annotation(&pairs, &track(&[("a", 0.0, 0.5)]), &FrameClock::default()).unwrap();
        assert_eq!(al[0].annotated_durations, vec![0, 40]);
        assert!(al[0].flags.contains(&AlignFlag::MissingPhoneme));
        assert_eq!(rep.count(AlignFlag::MissingPhoneme), 1);
    }

    #[test]
    fn redundant_phoneme() {
        let pairs = pairs_for("a", "a a\n");
        let (al, rep) = align_annotation(
            &pairs,
            &track(&[("n", 0.0, 0.1), ("a", 0.1, 0.5)]),
            &FrameClock::default(),
        )
        .unwrap();
        assert_eq!(al[0].annotated_durations, vec![32]);
        assert_eq!(al[0].flags, BTreeSet::from([AlignFlag::RedundantPhoneme]));
        assert_eq!(rep.per_pair, vec![(0, vec![AlignFlag::RedundantPhoneme])]);
    }

    #[test]
    fn boundary_shift_when_interval_spills() {
        let pairs = pairs_for("ka", "ka k a\n");
        let (al, _) = align_annotation(
            &pairs,
            &track(&[("k", 0.0, 0.1), ("a", 0.1, 0.7)]),
            &FrameClock::default(),
        )
        .unwrap();
        assert!(al[0].flags.contains(&AlignFlag::BoundaryShift));
    }

    #[test]
    fn empty_pairs() {
        let c = FrameClock::default();
        assert!(matches!(
            align_annotation(&[], &track(&[("a", 0.0, 0.5)]), &c),
            Err(Error::Alignment(_))
        ));
        assert!(align_annotation(&[], &track(&[("<sil>", 0.0, 0.5)]), &c).is_ok());
    }

    #[test]
    fn deterministic_and_bounded() {
        let lex = Lexicon::parse("ka k a\nsan s a n\n").unwrap();
        let c = FrameClock::default();
        let score = MusicScore::new(
            vec![
                Note::new(Some(60), 0.0, 0.33, "ka").unwrap(),
                Note::new(Some(62), 0.33, 0.41, "san").unwrap(),
            ],
            c,
        )
        .unwrap();
        let pairs = pair_score(&score, &lex).unwrap();
        let t = track(&[
            ("k", 0.0, 0.07),
            ("a", 0.07, 0.33),
            ("x", 0.33, 0.36),
            ("s", 0.36, 0.43),
            ("a", 0.43, 0.69),
            ("n", 0.69, 0.74),
        ]);
        let a = align_annotation(&pairs, &t, &c).unwrap();
        let b = align_annotation(&pairs, &t, &c).unwrap();
        assert_eq!(a, b);
        let total: u32 = a.0.iter().flat_map(|p| p.annotated_durations.iter()).sum();
        let track_frames = crate::score::seconds_to_frames(0.74, &c).unwrap();
        assert!(total <= track_frames + pairs.len() as u32);
        assert_eq!(a.1.count(AlignFlag::RedundantPhoneme), 1);
    }
}
