//! Domain model for scores, syllable-note pairs, annotations and the frame clock.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Onset/offset comparisons between consecutive notes tolerate this much slack.
pub const TIME_EPSILON: f64 = 1e-6;

/// Rounds to the nearest integer, ties to even.
pub fn rint(x: f64) -> f64 {
    x.round_ties_even()
}

/// Sample rate, hop and analysis window shared by every frame-level quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub sample_rate: u32,
    pub hop: usize,
    pub window: usize,
}

impl Default for FrameClock {
    fn default() -> Self {
        Self {
            sample_rate: 24_000,
            hop: 300,
            window: 1200,
        }
    }
}

impl FrameClock {
    pub fn new(sample_rate: u32, hop: usize, window: usize) -> Result<Self> {
        if sample_rate == 0 || hop == 0 {
            return Err(Error::InvalidArgument(
                "sample rate and hop must be positive".into(),
            ));
        }
        if window < hop {
            return Err(Error::InvalidArgument(format!(
                "window {window} shorter than hop {hop}"
            )));
        }
        Ok(Self {
            sample_rate,
            hop,
            window,
        })
    }

    /// Frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Seconds covered by one hop (12.5 ms at the defaults).
    pub fn frame_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn frames_to_seconds(&self, frames: u32) -> f64 {
        frames as f64 * self.frame_seconds()
    }
}

/// Converts a time in seconds to the nearest integer frame count (ties to even).
pub fn seconds_to_frames(t: f64, clock: &FrameClock) -> Result<u32> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    Ok(rint(t * clock.sample_rate as f64 / clock.hop as f64) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeClass {
    Vowel,
    Consonant,
    Silence,
}

/// The canonical silence marks. Bare spellings (`sil`, `pau`, `br`) and the
/// empty label normalise to these.
pub const SILENCE_MARKS: [&str; 3] = ["<sil>", "<pau>", "<br>"];

/// Maps a raw label to its canonical silence mark, if it is one.
pub fn silence_mark(label: &str) -> Option<&'static str> {
    match label.trim() {
        "" | "<sil>" | "sil" => Some("<sil>"),
        "<pau>" | "pau" => Some("<pau>"),
        "<br>" | "br" => Some("<br>"),
        _ => None,
    }
}

pub fn is_silence(label: &str) -> bool {
    silence_mark(label).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phoneme {
    pub symbol: String,
    pub class: PhonemeClass,
}

impl Phoneme {
    pub fn new(symbol: impl Into<String>, class: PhonemeClass) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() {
            return Err(Error::InvalidArgument("empty phoneme symbol".into()));
        }
        let silent = is_silence(&symbol);
        if silent != (class == PhonemeClass::Silence) {
            return Err(Error::InvalidArgument(format!(
                "phoneme {symbol:?} cannot have class {class:?}"
            )));
        }
        Ok(Self { symbol, class })
    }

    pub fn is_vowel(&self) -> bool {
        self.class == PhonemeClass::Vowel
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

/// One score note. `pitch == None` marks a rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub pitch: Option<u8>,
    pub onset: f64,
    pub duration: f64,
    pub syllable: String,
}

impl Note {
    pub fn new(pitch: Option<u8>, onset: f64, duration: f64, syllable: impl Into<String>) -> Result<Self> {
        let syllable = syllable.into();
        if !(onset >= 0.0) || !onset.is_finite() {
            return Err(Error::InvalidArgument(format!("note onset {onset} must be >= 0")));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "note duration {duration} must be > 0"
            )));
        }
        if let Some(p) = pitch {
            if p > 127 {
                return Err(Error::InvalidArgument(format!("MIDI pitch {p} out of range")));
            }
            if syllable.trim().is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "pitched note at {onset:.3}s has no syllable"
                )));
            }
        }
        Ok(Self {
            pitch,
            onset,
            duration,
            syllable,
        })
    }

    pub fn rest(onset: f64, duration: f64) -> Result<Self> {
        Self::new(None, onset, duration, "")
    }

    pub fn is_rest(&self) -> bool {
        self.pitch.is_none()
    }

    /// Rests and silence-marked notes both split segments.
    pub fn is_boundary(&self) -> bool {
        self.is_rest() || is_silence(&self.syllable)
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicScore {
    notes: Vec<Note>,
    pub clock: FrameClock,
}

impl MusicScore {
    pub fn new(notes: Vec<Note>, clock: FrameClock) -> Result<Self> {
        for (i, w) in notes.windows(2).enumerate() {
            if w[1].onset + TIME_EPSILON < w[0].end() {
                return Err(Error::InvalidArgument(format!(
                    "note {} starts at {:.6}s before note {} ends at {:.6}s",
                    i + 1,
                    w[1].onset,
                    i,
                    w[0].end()
                )));
            }
        }
        Ok(Self { notes, clock })
    }

    pub fn empty(clock: FrameClock) -> Self {
        Self {
            notes: Vec::new(),
            clock,
        }
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    /// Span from the first onset to the last note end, in seconds.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.notes.first()?.onset, self.notes.last()?.end()))
    }
}

/// Syllable to phoneme-sequence dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Phoneme>>,
    n_max: usize,
}

/// Vowel detection used when a lexicon file does not declare its vowels.
const DEFAULT_VOWEL_INITIALS: &str = "aeiouAEIOU";

impl Lexicon {
    pub fn new(entries: BTreeMap<String, Vec<Phoneme>>) -> Result<Self> {
        if let Some((syl, _)) = entries.iter().find(|(_, p)| p.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "lexicon entry {syl:?} has no phonemes"
            )));
        }
        let n_max = entries.values().map(Vec::len).max().unwrap_or(0);
        Ok(Self { entries, n_max })
    }

    /// Parses the plain-text lexicon format: one `syllable ph1 ph2 ...` entry
    /// per line, `#` comments, and an optional `@vowels v1 v2 ...` directive
    /// naming the vowel symbols. Without the directive, symbols starting with
    /// a Latin vowel letter are vowels.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vowels: Option<Vec<String>> = None;
        let mut raw: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap_or_default();
            if head == "@vowels" {
                vowels = Some(fields.map(str::to_owned).collect());
                continue;
            }
            let phones: Vec<String> = fields.map(str::to_owned).collect();
            if phones.is_empty() {
                return Err(Error::schema_at(
                    lineno + 1,
                    format!("lexicon entry {head:?} has no phonemes"),
                ));
            }
            raw.push((lineno + 1, head.to_owned(), phones));
        }
        let classify = |s: &str| -> PhonemeClass {
            if is_silence(s) {
                PhonemeClass::Silence
            } else if match &vowels {
                Some(v) => v.iter().any(|x| x == s),
                None => s.starts_with(|c| DEFAULT_VOWEL_INITIALS.contains(c)),
            } {
                PhonemeClass::Vowel
            } else {
                PhonemeClass::Consonant
            }
        };
        let mut entries = BTreeMap::new();
        for (line, syl, phones) in raw {
            let phonemes = phones
                .iter()
                .map(|s| Phoneme::new(s.clone(), classify(s)))
                .collect::<Result<Vec<_>>>()?;
            if entries.insert(syl.clone(), phonemes).is_some() {
                return Err(Error::schema_at(line, format!("duplicate lexicon entry {syl:?}")));
            }
        }
        Self::new(entries)
    }

    /// Writes the text format accepted by [`Lexicon::parse`], with an explicit vowel list.
    pub fn to_text(&self) -> String {
        let mut vowels: Vec<&str> = self
            .entries
            .values()
            .flatten()
            .filter(|p| p.is_vowel())
            .map(|p| p.symbol.as_str())
            .collect();
        vowels.sort_unstable();
        vowels.dedup();
        let mut out = format!("@vowels {}\n", vowels.join(" "));
        for (syl, phones) in &self.entries {
            out.push_str(syl);
            for p in phones {
                out.push(' ');
                out.push_str(&p.symbol);
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, syllable: &str) -> Option<&[Phoneme]> {
        self.entries.get(syllable).map(Vec::as_slice)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn syllables(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Every distinct phoneme, sorted by symbol.
    pub fn phonemes(&self) -> Vec<Phoneme> {
        let mut all: BTreeMap<&str, &Phoneme> = BTreeMap::new();
        for p in self.entries.values().flatten() {
            all.entry(&p.symbol).or_insert(p);
        }
        all.into_values().cloned().collect()
    }

    /// Class of a symbol as used by this lexicon. Silence marks resolve even
    /// when no entry uses them.
    pub fn class_of(&self, symbol: &str) -> Option<PhonemeClass> {
        if is_silence(symbol) {
            return Some(PhonemeClass::Silence);
        }
        self.entries
            .values()
            .flatten()
            .find(|p| p.symbol == symbol)
            .map(|p| p.class)
    }
}

/// One pitched note, its syllable and the syllable's phonemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyllableNotePair {
    pub syllable: String,
    pub phonemes: Vec<Phoneme>,
    pub pitch: u8,
    /// Note duration in frames, at least 1.
    pub d_note: u32,
    /// Position within the segment.
    pub index: usize,
    /// Segment number; increments at every rest or silence mark.
    pub segment: usize,
    /// Position of the source note in the score.
    pub note_index: usize,
    pub onset: f64,
    pub duration: f64,
}

impl SyllableNotePair {
    /// Number of active phoneme slots.
    pub fn k(&self) -> usize {
        self.phonemes.len()
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

/// Expands every pitched note into a syllable-note pair. Rests and silence
/// marks are dropped and start a new segment.
pub fn pair_score(score: &MusicScore, lexicon: &Lexicon) -> Result<Vec<SyllableNotePair>> {
    let mut pairs = Vec::new();
    let mut segment = 0usize;
    let mut index = 0usize;
    let mut open = false;
    for (note_index, note) in score.notes().iter().enumerate() {
        if note.is_boundary() {
            if open {
                segment += 1;
                index = 0;
                open = false;
            }
            continue;
        }
        let phonemes = lexicon
            .get(&note.syllable)
            .ok_or_else(|| Error::MissingLexiconEntry {
                syllable: note.syllable.clone(),
                note_index,
            })?
            .to_vec();
        let d_note = seconds_to_frames(note.duration, &score.clock)?.max(1);
        pairs.push(SyllableNotePair {
            syllable: note.syllable.clone(),
            phonemes,
            pitch: note.pitch.expect("boundary check excludes rests"),
            d_note,
            index,
            segment,
            note_index,
            onset: note.onset,
            duration: note.duration,
        });
        index += 1;
        open = true;
    }
    Ok(pairs)
}

/// Splits a score at rests and silence marks, dropping them.
pub fn segment_score(score: &MusicScore) -> Vec<MusicScore> {
    let mut segments = Vec::new();
    let mut current: Vec<Note> = Vec::new();
    for note in score.notes() {
        if note.is_boundary() {
            if !current.is_empty() {
                segments.push(std::mem::take(&mut current));
            }
        } else {
            current.push(note.clone());
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
        .into_iter()
        .map(|notes| MusicScore {
            notes,
            clock: score.clock,
        })
        .collect()
}

/// Groups pairs by their segment number, preserving order.
pub fn group_by_segment(pairs: &[SyllableNotePair]) -> Vec<Vec<SyllableNotePair>> {
    let mut out: Vec<Vec<SyllableNotePair>> = Vec::new();
    for p in pairs {
        match out.last_mut() {
            Some(last) if last[0].segment == p.segment => last.push(p.clone()),
            _ => out.push(vec![p.clone()]),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeInterval {
    pub phoneme: String,
    pub start: f64,
    pub end: f64,
}

impl PhonemeInterval {
    pub fn new(phoneme: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "interval end {end} must exceed start {start}"
            )));
        }
        Ok(Self {
            phoneme: phoneme.into(),
            start,
            end,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn is_silence(&self) -> bool {
        is_silence(&self.phoneme)
    }
}

/// Manually labelled phoneme time sequence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationTrack {
    intervals: Vec<PhonemeInterval>,
}

impl AnnotationTrack {
    pub fn new(intervals: Vec<PhonemeInterval>) -> Result<Self> {
        for (i, w) in intervals.windows(2).enumerate() {
            if w[1].start + TIME_EPSILON < w[0].end {
                return Err(Error::schema(format!(
                    "interval {} ({:.6}s) overlaps or precedes interval {} ending at {:.6}s",
                    i + 1,
                    w[1].start,
                    i,
                    w[0].end
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[PhonemeInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.start, self.intervals.last()?.end))
    }

    /// Non-silence intervals whose midpoint lies in `[start, end)`.
    pub fn within(&self, start: f64, end: f64) -> impl Iterator<Item = &PhonemeInterval> {
        self.intervals
            .iter()
            .filter(move |iv| !iv.is_silence() && iv.midpoint() >= start && iv.midpoint() < end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        Lexicon::parse("ka k a\nsa s a\na a\n").unwrap()
    }

    fn note(pitch: u8, onset: f64, dur: f64, syl: &str) -> Note {
        Note::new(Some(pitch), onset, dur, syl).unwrap()
    }

    #[test]
    fn seconds_to_frames_examples() {
        let c = FrameClock::default();
        assert_eq!(seconds_to_frames(0.0, &c).unwrap(), 0);
        assert_eq!(seconds_to_frames(1.0, &c).unwrap(), 80);
        assert_eq!(seconds_to_frames(0.125, &c).unwrap(), 10);
        assert!(matches!(
            seconds_to_frames(-0.1, &c),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn seconds_to_frames_ties_to_even() {
        let c = FrameClock::default();
        // 0.00625 s = 0.5 frames, 0.01875 s = 1.5 frames
        assert_eq!(seconds_to_frames(0.5 / 80.0, &c).unwrap(), 0);
        assert_eq!(seconds_to_frames(1.5 / 80.0, &c).unwrap(), 2);
        assert_eq!(seconds_to_frames(2.5 / 80.0, &c).unwrap(), 2);
    }

    #[test]
    fn clock_invariants() {
        assert!(FrameClock::new(24_000, 0, 1200).is_err());
        assert!(FrameClock::new(24_000, 300, 200).is_err());
        assert!((FrameClock::default().frame_seconds() - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn pair_single_note() {
        let score = MusicScore::new(vec![note(60, 0.0, 0.5, "ka")], FrameClock::default()).unwrap();
        let pairs = pair_score(&score, &lexicon()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].k(), 2);
        assert_eq!(pairs[0].d_note, 40);
    }

    #[test]
    fn pair_empty_and_missing() {
        let empty = MusicScore::empty(FrameClock::default());
        assert!(pair_score(&empty, &lexicon()).unwrap().is_empty());

        let score = MusicScore::new(
            vec![note(60, 0.0, 0.5, "ka"), note(62, 0.5, 0.5, "zu")],
            FrameClock::default(),
        )
        .unwrap();
        match pair_score(&score, &lexicon()) {
            Err(Error::MissingLexiconEntry {
                syllable,
                note_index,
            }) => {
                assert_eq!(syllable, "zu");
                assert_eq!(note_index, 1);
            }
            other => panic!("expected missing entry, got {other:?}"),
        }
    }

    #[test]
    fn pair_segments_restart_index() {
        let score = MusicScore::new(
            vec![
                note(60, 0.0, 0.5, "ka"),
                Note::rest(0.5, 0.25).unwrap(),
                note(62, 0.75, 0.5, "sa"),
                note(64, 1.25, 0.5, "a"),
            ],
            FrameClock::default(),
        )
        .unwrap();
        let pairs = pair_score(&score, &lexicon()).unwrap();
        let seg: Vec<_> = pairs.iter().map(|p| (p.segment, p.index)).collect();
        assert_eq!(seg, vec![(0, 0), (1, 0), (1, 1)]);
        assert_eq!(group_by_segment(&pairs).len(), 2);
    }

    #[test]
    fn d_note_clamped_to_one_frame() {
        let score = MusicScore::new(vec![note(60, 0.0, 0.001, "a")], FrameClock::default()).unwrap();
        assert_eq!(pair_score(&score, &lexicon()).unwrap()[0].d_note, 1);
    }

    #[test]
    fn segment_examples() {
        let c = FrameClock::default();
        let split = MusicScore::new(
            vec![
                note(60, 0.0, 0.5, "ka"),
                Note::rest(0.5, 0.5).unwrap(),
                note(60, 1.0, 0.5, "sa"),
            ],
            c,
        )
        .unwrap();
        let segs = segment_score(&split);
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.len() == 1));

        let plain = MusicScore::new(vec![note(60, 0.0, 0.5, "ka"), note(62, 0.5, 0.5, "a")], c).unwrap();
        assert_eq!(segment_score(&plain), vec![plain.clone()]);

        let padded = MusicScore::new(
            vec![
                Note::rest(0.0, 0.5).unwrap(),
                note(60, 0.5, 0.5, "ka"),
                Note::rest(1.0, 0.5).unwrap(),
            ],
            c,
        )
        .unwrap();
        assert_eq!(segment_score(&padded).len(), 1);
        assert!(segment_score(&MusicScore::empty(c)).is_empty());
    }

    #[test]
    fn silence_syllables_split_like_rests() {
        let c = FrameClock::default();
        let score = MusicScore::new(
            vec![
                note(60, 0.0, 0.5, "ka"),
                note(60, 0.5, 0.2, "<br>"),
                note(60, 0.7, 0.5, "sa"),
            ],
            c,
        )
        .unwrap();
        assert_eq!(segment_score(&score).len(), 2);
    }

    #[test]
    fn score_rejects_overlap() {
        let c = FrameClock::default();
        assert!(MusicScore::new(vec![note(60, 0.0, 0.5, "ka"), note(60, 0.4, 0.5, "ka")], c).is_err());
    }

    #[test]
    fn note_invariants() {
        assert!(Note::new(Some(60), 0.0, 0.0, "ka").is_err());
        assert!(Note::new(Some(60), -1.0, 0.5, "ka").is_err());
        assert!(Note::new(Some(60), 0.0, 0.5, "").is_err());
        assert!(Note::rest(0.0, 0.5).is_ok());
    }

    #[test]
    fn lexicon_classes() {
        let lex = Lexicon::parse("@vowels a i\nka k a\nshi sh i\n# comment\nn n\n").unwrap();
        assert_eq!(lex.n_max(), 2);
        assert_eq!(lex.class_of("k"), Some(PhonemeClass::Consonant));
        assert_eq!(lex.class_of("i"), Some(PhonemeClass::Vowel));
        assert_eq!(lex.class_of("<pau>"), Some(PhonemeClass::Silence));
        assert_eq!(lex.class_of("zz"), None);
        let again = Lexicon::parse(&lex.to_text()).unwrap();
        assert_eq!(again, lex);
        assert!(Lexicon::parse("ka\n").is_err());
        assert!(Lexicon::parse("ka k a\nka k a\n").is_err());
    }

    #[test]
    fn phoneme_silence_class_reserved() {
        assert!(Phoneme::new("<sil>", PhonemeClass::Vowel).is_err());
        assert!(Phoneme::new("a", PhonemeClass::Silence).is_err());
        assert!(Phoneme::new("", PhonemeClass::Vowel).is_err());
    }

    #[test]
    fn annotation_rejects_overlap() {
        let ivs = vec![
            PhonemeInterval::new("k", 0.0, 0.2).unwrap(),
            PhonemeInterval::new("a", 0.1, 0.5).unwrap(),
        ];
        assert!(matches!(AnnotationTrack::new(ivs), Err(Error::Schema { .. })));
    }
}
