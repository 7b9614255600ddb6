use roxmltree::{Document, Node, ParsingOptions};

use crate::error::{Error, Result};
use crate::score::{FrameClock, MusicScore, Note, TIME_EPSILON};

pub const DEFAULT_TEMPO_BPM: f64 = 120.0;

/// Divisions per quarter note used when writing.
const WRITE_DIVISIONS: u32 = 480;

/// A parsed score together with the non-fatal issues met while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScore {
    pub score: MusicScore,
    pub warnings: Vec<String>,
}

fn step_offset(step: &str) -> Option<i32> {
    Some(match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    })
}

/// Spells a MIDI number as (step, alter, octave), preferring sharps.
pub fn midi_to_pitch_spelling(midi: u8) -> (&'static str, i32, i32) {
    const NAMES: [(&str, i32); 12] = [
        ("C", 0),
        ("C", 1),
        ("D", 0),
        ("D", 1),
        ("E", 0),
        ("F", 0),
        ("F", 1),
        ("G", 0),
        ("G", 1),
        ("A", 0),
        ("A", 1),
        ("B", 0),
    ];
    let (step, alter) = NAMES[(midi % 12) as usize];
    (step, alter, midi as i32 / 12 - 1)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

struct Reader<'a, 'input> {
    doc: &'a Document<'input>,
    warnings: Vec<String>,
}

impl<'a, 'input> Reader<'a, 'input> {
    fn line(&self, node: Node) -> usize {
        self.doc.text_pos_at(node.range().start).row as usize
    }

    fn number<T: std::str::FromStr>(&self, node: Node, name: &str) -> Result<Option<T>> {
        match child_text(node, name) {
            None => Ok(None),
            Some(text) => text.parse::<T>().map(Some).map_err(|_| {
                Error::schema_at(self.line(node), format!("<{name}> value {text:?} is not a number"))
            }),
        }
    }

    fn pitch(&mut self, pitch: Node) -> Result<u8> {
        let line = self.line(pitch);
        let step = child_text(pitch, "step")
            .ok_or_else(|| Error::schema_at(line, "<pitch> without <step>"))?;
        let offset = step_offset(step)
            .ok_or_else(|| Error::schema_at(line, format!("unknown step {step:?}")))?;
        let octave: i32 = self
            .number(pitch, "octave")?
            .ok_or_else(|| Error::schema_at(line, "<pitch> without <octave>"))?;
        let alter: f64 = self.number(pitch, "alter")?.unwrap_or(0.0);
        if alter.fract() != 0.0 {
            self.warnings
                .push(format!("line {line}: microtonal alter {alter} rounded"));
        }
        let midi = (octave + 1) * 12 + offset + alter.round() as i32;
        u8::try_from(midi)
            .ok()
            .filter(|m| *m <= 127)
            .ok_or_else(|| Error::schema_at(line, format!("pitch {step}{octave} outside MIDI range")))
    }
}

/// Parses the supported MusicXML subset (`score-partwise`, first part only).
///
/// Durations are converted with the current `<divisions>` and the latest
/// `sound@tempo`; a pitched note without lyric extends the previous pitched
/// note (slur or tie).
pub fn parse_musicxml_subset(document: &[u8], clock: FrameClock) -> Result<ParsedScore> {
    let text = std::str::from_utf8(document).map_err(|e| Error::Parse {
        line: 1 + document[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        column: 1,
        message: "document is not valid UTF-8".into(),
    })?;
    // exported scores usually carry a DOCTYPE; entity expansion stays bounded
    let options = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(text, options).map_err(|e| {
        let pos = e.pos();
        Error::Parse {
            line: pos.row as usize,
            column: pos.col as usize,
            message: e.to_string(),
        }
    })?;
    let mut reader = Reader {
        doc: &doc,
        warnings: Vec::new(),
    };
    let root = doc.root_element();
    if !root.has_tag_name("score-partwise") {
        return Err(Error::schema_at(
            reader.line(root),
            format!("root element <{}> is not <score-partwise>", root.tag_name().name()),
        ));
    }
    let parts: Vec<Node> = root.children().filter(|c| c.has_tag_name("part")).collect();
    if parts.len() > 1 {
        reader
            .warnings
            .push(format!("{} parts found; only the first is read", parts.len()));
    }
    let Some(part) = parts.first().copied() else {
        return Ok(ParsedScore {
            score: MusicScore::empty(clock),
            warnings: reader.warnings,
        });
    };

    let mut divisions: Option<f64> = None;
    let mut tempo: Option<f64> = None;
    let mut time = 0.0f64;
    let mut notes: Vec<Note> = Vec::new();

    for measure in part.children().filter(|c| c.is_element()) {
        if !measure.has_tag_name("measure") {
            reader.warnings.push(format!(
                "line {}: ignored <{}> in part",
                reader.line(measure),
                measure.tag_name().name()
            ));
            continue;
        }
        for el in measure.children().filter(|c| c.is_element()) {
            let line = reader.line(el);
            match el.tag_name().name() {
                "attributes" => {
                    if let Some(d) = reader.number::<f64>(el, "divisions")? {
                        if d <= 0.0 {
                            return Err(Error::schema_at(line, "divisions must be positive"));
                        }
                        divisions = Some(d);
                    }
                }
                "direction" => {
                    for sound in el.descendants().filter(|n| n.has_tag_name("sound")) {
                        read_tempo(&reader, sound, &mut tempo)?;
                    }
                }
                "sound" => read_tempo(&reader, el, &mut tempo)?,
                "backup" => {
                    reader
                        .warnings
                        .push(format!("line {line}: <backup> ignored (single voice only)"));
                }
                "forward" => {
                    let ticks: f64 = reader
                        .number(el, "duration")?
                        .ok_or_else(|| Error::schema_at(line, "<forward> without <duration>"))?;
                    time += ticks_to_seconds(ticks, divisions, tempo, &mut reader.warnings);
                }
                "note" => {
                    if child(el, "chord").is_some() {
                        reader
                            .warnings
                            .push(format!("line {line}: chord note ignored"));
                        continue;
                    }
                    if child(el, "grace").is_some() {
                        reader
                            .warnings
                            .push(format!("line {line}: grace note ignored"));
                        continue;
                    }
                    let ticks: f64 = reader
                        .number(el, "duration")?
                        .ok_or_else(|| Error::schema_at(line, "note missing <duration>"))?;
                    if ticks <= 0.0 {
                        return Err(Error::schema_at(line, "note duration must be positive"));
                    }
                    let seconds = ticks_to_seconds(ticks, divisions, tempo, &mut reader.warnings);
                    let onset = time;
                    time += seconds;
                    if child(el, "rest").is_some() {
                        notes.push(Note::rest(onset, seconds)?);
                        continue;
                    }
                    let pitch_node = child(el, "pitch").ok_or_else(|| {
                        Error::schema_at(line, "note has neither <pitch> nor <rest>")
                    })?;
                    let pitch = reader.pitch(pitch_node)?;
                    let lyric = child(el, "lyric")
                        .and_then(|l| child_text(l, "text"))
                        .filter(|t| !t.is_empty());
                    match lyric {
                        Some(syl) => notes.push(Note::new(Some(pitch), onset, seconds, syl)?),
                        None => match notes.last_mut() {
                            Some(prev) if !prev.is_rest() && (prev.end() - onset).abs() < TIME_EPSILON => {
                                prev.duration += seconds;
                                reader.warnings.push(format!(
                                    "line {line}: note without lyric merged into previous syllable {:?}",
                                    prev.syllable
                                ));
                            }
                            _ => {
                                return Err(Error::schema_at(
                                    line,
                                    "pitched note without lyric and no preceding syllable",
                                ))
                            }
                        },
                    }
                }
                "barline" | "print" | "harmony" => {}
                other => reader
                    .warnings
                    .push(format!("line {line}: ignored <{other}>")),
            }
        }
    }
    if tempo.is_none() && !notes.is_empty() {
        reader
            .warnings
            .push(format!("no tempo given; assuming {DEFAULT_TEMPO_BPM} BPM"));
    }
    Ok(ParsedScore {
        score: MusicScore::new(notes, clock)?,
        warnings: reader.warnings,
    })
}

fn read_tempo(reader: &Reader, sound: Node, tempo: &mut Option<f64>) -> Result<()> {
    if let Some(t) = sound.attribute("tempo") {
        let bpm: f64 = t.trim().parse().map_err(|_| {
            Error::schema_at(reader.line(sound), format!("tempo {t:?} is not a number"))
        })?;
        if !(bpm > 0.0) {
            return Err(Error::schema_at(reader.line(sound), "tempo must be positive"));
        }
        *tempo = Some(bpm);
    }
    Ok(())
}

fn ticks_to_seconds(
    ticks: f64,
    divisions: Option<f64>,
    tempo: Option<f64>,
    warnings: &mut Vec<String>,
) -> f64 {
    let divisions = divisions.unwrap_or_else(|| {
        if !warnings.iter().any(|w| w.starts_with("no <divisions>")) {
            warnings.push("no <divisions> before first note; assuming 1".into());
        }
        1.0
    });
    ticks / divisions * 60.0 / tempo.unwrap_or(DEFAULT_TEMPO_BPM)
}

/// Writes a score as single-part, single-measure MusicXML at the given tempo.
pub fn write_musicxml(score: &MusicScore, tempo_bpm: f64) -> String {
    let ticks = |seconds: f64| -> u64 {
        (seconds * tempo_bpm / 60.0 * WRITE_DIVISIONS as f64).round() as u64
    };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<score-partwise version=\"3.1\">\n");
    out.push_str("  <part-list><score-part id=\"P1\"><part-name>Voice</part-name></score-part></part-list>\n");
    out.push_str("  <part id=\"P1\">\n    <measure number=\"1\">\n");
    out.push_str(&format!(
        "      <attributes><divisions>{WRITE_DIVISIONS}</divisions></attributes>\n"
    ));
    out.push_str(&format!(
        "      <direction><sound tempo=\"{tempo_bpm}\"/></direction>\n"
    ));
    let mut time = 0.0;
    for note in score.notes() {
        if note.onset > time + TIME_EPSILON {
            out.push_str(&format!(
                "      <forward><duration>{}</duration></forward>\n",
                ticks(note.onset - time)
            ));
        }
        time = note.end();
        out.push_str("      <note>\n");
        match note.pitch {
            None => out.push_str("        <rest/>\n"),
            Some(midi) => {
                let (step, alter, octave) = midi_to_pitch_spelling(midi);
                out.push_str("        <pitch><step>");
                out.push_str(step);
                out.push_str("</step>");
                if alter != 0 {
                    out.push_str(&format!("<alter>{alter}</alter>"));
                }
                out.push_str(&format!("<octave>{octave}</octave></pitch>\n"));
            }
        }
        out.push_str(&format!(
            "        <duration>{}</duration>\n",
            ticks(note.duration)
        ));
        if !note.is_rest() {
            out.push_str(&format!(
                "        <lyric><text>{}</text></lyric>\n",
                xml_escape(&note.syllable)
            ));
        }
        out.push_str("      </note>\n");
    }
    out.push_str("    </measure>\n  </part>\n</score-partwise>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
