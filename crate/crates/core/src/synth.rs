//! Synthetic singing corpus with known ground truth. Every syllable is CV or
//! V; a CV note's consonant takes `true_consonant_proportion(pitch)` of the
//! note, rounded to whole frames, and the annotation records exactly that.
//! Waveforms put vowel harmonics at the note pitch and give each consonant a
//! fixed set of high partials with a little noise.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::write_wav;
use crate::error::{Error, Result};
use crate::ingest::{align_annotation, write_musicxml, write_textgrid, AlignedPair, DEFAULT_TEMPO_BPM};
use crate::score::{
    group_by_segment, pair_score, rint, AnnotationTrack, FrameClock, Lexicon, MusicScore, Note, PhonemeInterval,
};

const CONSONANTS: [(&str, [f64; 3]); 5] = [
    ("k", [2500.0, 3900.0, 6100.0]),
    ("s", [5200.0, 7300.0, 9100.0]),
    ("t", [3300.0, 4700.0, 8200.0]),
    ("n", [1900.0, 2800.0, 3600.0]),
    ("m", [1500.0, 2300.0, 4400.0]),
];

/// Vowels with their first two formants in Hz.
const VOWELS: [(&str, f64, f64); 5] = [
    ("a", 800.0, 1200.0),
    ("i", 300.0, 2300.0),
    ("u", 350.0, 900.0),
    ("e", 500.0, 1900.0),
    ("o", 500.0, 850.0),
];

const EDGE_SILENCE_FRAMES: u32 = 8;

/// Consonant share of a CV note at `pitch`.
pub fn true_consonant_proportion(pitch: u8) -> f64 {
    0.2 + 0.01 * (pitch % 12) as f64
}

/// Consonant frames of a CV note: `rint(proportion * d_note)`, clamped so
/// both phonemes keep at least one frame.
pub fn true_consonant_frames(pitch: u8, d_note: u32) -> u32 {
    let c = rint(true_consonant_proportion(pitch) * d_note as f64) as u32;
    c.clamp(1, d_note.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub songs: usize,
    pub segments_per_song: usize,
    pub notes_per_segment: (usize, usize),
    /// Inclusive note length range in frames.
    pub note_frames: (u32, u32),
    /// Inclusive MIDI range; keep it narrow so every pitch recurs.
    pub pitches: (u8, u8),
    /// Share of notes sung on a bare vowel.
    pub vowel_only: f64,
    pub rest_frames: (u32, u32),
    pub seed: u64,
    pub with_audio: bool,
    pub clock: FrameClock,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            songs: 4,
            segments_per_song: 3,
            notes_per_segment: (3, 6),
            note_frames: (20, 60),
            pitches: (60, 71),
            vowel_only: 0.15,
            rest_frames: (16, 24),
            seed: 0,
            with_audio: true,
            clock: FrameClock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSong {
    pub name: String,
    pub score: MusicScore,
    pub annotation: AnnotationTrack,
    /// Empty unless audio was requested.
    pub waveform: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub lexicon: Lexicon,
    pub songs: Vec<SynthSong>,
    pub clock: FrameClock,
}

/// The corpus lexicon: every CV combination plus the bare vowels.
pub fn synth_lexicon() -> Lexicon {
    let mut text = String::from("@vowels");
    for (v, ..) in VOWELS {
        text.push(' ');
        text.push_str(v);
    }
    text.push('\n');
    for (c, _) in CONSONANTS {
        for (v, ..) in VOWELS {
            text.push_str(&format!("{c}{v} {c} {v}\n"));
        }
    }
    for (v, ..) in VOWELS {
        text.push_str(&format!("{v} {v}\n"));
    }
    Lexicon::parse(&text).expect("static lexicon parses")
}

fn midi_hz(pitch: u8) -> f64 {
    440.0 * 2f64.powf((pitch as f64 - 69.0) / 12.0)
}

fn formant_gain(f: f64, f1: f64, f2: f64) -> f64 {
    let peak = |c: f64, w: f64| (-((f - c) / w).powi(2)).exp();
    0.15 + peak(f1, 150.0) + 0.7 * peak(f2, 250.0)
}

struct Renderer<'a> {
    out: &'a mut Vec<f64>,
    clock: FrameClock,
    rng: ChaCha8Rng,
}

impl Renderer<'_> {
    fn span(&self, start: u32, frames: u32) -> std::ops::Range<usize> {
        let a = start as usize * self.clock.hop;
        a..a + frames as usize * self.clock.hop
    }

    fn vowel(&mut self, start: u32, frames: u32, pitch: u8, f1: f64, f2: f64) {
        let sr = self.clock.sample_rate as f64;
        let f0 = midi_hz(pitch);
        let harmonics: Vec<(f64, f64)> = (1..)
            .map(|h| h as f64 * f0)
            .take_while(|f| *f < 10_000.0)
            .map(|f| (f, formant_gain(f, f1, f2) * f0 / f))
            .collect();
        let norm: f64 = harmonics.iter().map(|(_, a)| a).sum::<f64>().max(1e-9);
        for n in self.span(start, frames) {
            let t = n as f64 / sr;
            let s: f64 = harmonics.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum();
            self.out[n] += 0.4 * s / norm;
        }
    }

    fn consonant(&mut self, start: u32, frames: u32, partials: [f64; 3]) {
        let sr = self.clock.sample_rate as f64;
        for n in self.span(start, frames) {
            let t = n as f64 / sr;
            let s: f64 = partials.iter().map(|f| (2.0 * PI * f * t).sin()).sum();
            self.out[n] += 0.03 * s + self.rng.gen_range(-0.005..0.005);
        }
    }

    fn dither(&mut self) {
        for v in self.out.iter_mut() {
            *v += self.rng.gen_range(-1e-4..1e-4);
        }
    }
}

fn gen_song(index: usize, cfg: &SynthConfig, lexicon: &Lexicon, rng: &mut ChaCha8Rng) -> Result<SynthSong> {
    let fs = cfg.clock.frame_seconds();
    let secs = |f: u32| f as f64 * fs;
    let mut notes = Vec::new();
    let mut intervals = Vec::new();
    // (start frame, frames, phoneme symbol, pitch)
    let mut spans: Vec<(u32, u32, String, u8)> = Vec::new();
    let mut frame = EDGE_SILENCE_FRAMES;
    intervals.push(PhonemeInterval::new("<sil>", 0.0, secs(frame))?);
    for seg in 0..cfg.segments_per_song {
        if seg > 0 {
            let r = rng.gen_range(cfg.rest_frames.0..=cfg.rest_frames.1);
            notes.push(Note::rest(secs(frame), secs(r))?);
            intervals.push(PhonemeInterval::new("<sil>", secs(frame), secs(frame + r))?);
            frame += r;
        }
        let n = rng.gen_range(cfg.notes_per_segment.0..=cfg.notes_per_segment.1);
        for _ in 0..n {
            let d = rng.gen_range(cfg.note_frames.0..=cfg.note_frames.1);
            let pitch = rng.gen_range(cfg.pitches.0..=cfg.pitches.1);
            let v = rng.gen_range(0..VOWELS.len());
            let syllable = if rng.gen_bool(cfg.vowel_only) {
                VOWELS[v].0.to_owned()
            } else {
                format!("{}{}", CONSONANTS[rng.gen_range(0..CONSONANTS.len())].0, VOWELS[v].0)
            };
            let phonemes = lexicon.get(&syllable).expect("lexicon covers generated syllables");
            notes.push(Note::new(Some(pitch), secs(frame), secs(d), syllable.clone())?);
            let mut at = frame;
            let lens = if phonemes.len() == 2 {
                let c = true_consonant_frames(pitch, d);
                vec![c, d - c]
            } else {
                vec![d]
            };
            for (ph, len) in phonemes.iter().zip(lens) {
                intervals.push(PhonemeInterval::new(ph.symbol.clone(), secs(at), secs(at + len))?);
                spans.push((at, len, ph.symbol.clone(), pitch));
                at += len;
            }
            frame += d;
        }
    }
    intervals.push(PhonemeInterval::new("<sil>", secs(frame), secs(frame + EDGE_SILENCE_FRAMES))?);
    let total_frames = frame + EDGE_SILENCE_FRAMES;

    let mut waveform = Vec::new();
    if cfg.with_audio {
        // room for the last analysis window
        waveform = vec![0.0; total_frames as usize * cfg.clock.hop + cfg.clock.window - cfg.clock.hop];
        let mut r = Renderer {
            out: &mut waveform,
            clock: cfg.clock,
            rng: ChaCha8Rng::seed_from_u64(rng.gen()),
        };
        for (start, len, sym, pitch) in &spans {
            if let Some((_, f1, f2)) = VOWELS.iter().find(|(v, ..)| v == sym) {
                r.vowel(*start, *len, *pitch, *f1, *f2);
            } else if let Some((_, p)) = CONSONANTS.iter().find(|(c, _)| c == sym) {
                r.consonant(*start, *len, *p);
            }
        }
        r.dither();
    }

    Ok(SynthSong {
        name: format!("song{index:03}"),
        score: MusicScore::new(notes, cfg.clock)?,
        annotation: AnnotationTrack::new(intervals)?,
        waveform,
    })
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        if cfg.notes_per_segment.0 == 0
            || cfg.notes_per_segment.0 > cfg.notes_per_segment.1
            || cfg.note_frames.0 < 2
            || cfg.note_frames.0 > cfg.note_frames.1
            || cfg.pitches.0 > cfg.pitches.1
            || cfg.pitches.1 > 127
            || cfg.rest_frames.0 == 0
            || cfg.rest_frames.0 > cfg.rest_frames.1
            || !(0.0..=1.0).contains(&cfg.vowel_only)
        {
            return Err(Error::InvalidArgument(format!("bad synthetic corpus settings: {cfg:?}")));
        }
        let lexicon = synth_lexicon();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let songs = (0..cfg.songs)
            .map(|i| gen_song(i, cfg, &lexicon, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lexicon,
            songs,
            clock: cfg.clock,
        })
    }

    /// Aligned pairs per segment, over all songs in order.
    pub fn aligned_segments(&self) -> Result<Vec<Vec<AlignedPair>>> {
        let mut out = Vec::new();
        for song in &self.songs {
            let pairs = pair_score(&song.score, &self.lexicon)?;
            for seg in group_by_segment(&pairs) {
                let (first, last) = (seg[0].onset, seg[seg.len() - 1].end());
                let within: Vec<PhonemeInterval> = song
                    .annotation
                    .intervals()
                    .iter()
                    .filter(|iv| iv.midpoint() > first && iv.midpoint() < last)
                    .cloned()
                    .collect();
                let (aligned, _) = align_annotation(&seg, &AnnotationTrack::new(within)?, &self.clock)?;
                out.push(aligned);
            }
        }
        Ok(out)
    }

    /// Writes `lexicon.txt`, `scores/*.musicxml`, `annotations/*.TextGrid`
    /// and, with audio, `wav/*.wav` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let sub = |name: &str| -> Result<std::path::PathBuf> {
            let p = dir.join(name);
            std::fs::create_dir_all(&p).map_err(|e| Error::from(e).at_path(&p))?;
            Ok(p)
        };
        let write = |path: std::path::PathBuf, text: String| -> Result<()> {
            std::fs::write(&path, text).map_err(|e| Error::from(e).at_path(&path))
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
        write(dir.join("lexicon.txt"), self.lexicon.to_text())?;
        let scores = sub("scores")?;
        let annotations = sub("annotations")?;
        let wav = if self.songs.iter().any(|s| !s.waveform.is_empty()) {
            Some(sub("wav")?)
        } else {
            None
        };
        for song in &self.songs {
            write(
                scores.join(format!("{}.musicxml", song.name)),
                write_musicxml(&song.score, DEFAULT_TEMPO_BPM),
            )?;
            write(
                annotations.join(format!("{}.TextGrid", song.name)),
                write_textgrid(&song.annotation, "phones"),
            )?;
            if let Some(w) = &wav {
                write_wav(&w.join(format!("{}.wav", song.name)), &song.waveform, self.clock.sample_rate)?;
            }
        }
        Ok(())
    }
}
