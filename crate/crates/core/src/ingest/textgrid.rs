//! Praat TextGrid reader for both the long ("full") and short text layouts.
//!
//! Both layouts carry the same sequence of numbers, strings and flags; the
//! long layout only adds `key =` labels and `[n]` indices. The tokenizer keeps
//! the significant tokens and drops the rest, so one grammar reads both.

use crate::error::{Error, Result};
use crate::score::{silence_mark, AnnotationTrack, PhonemeInterval, TIME_EPSILON};

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<Tier>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub kind: TierKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TierKind {
    /// `(xmin, xmax, text, source line)`
    Interval(Vec<(f64, f64, String, usize)>),
    /// `(time, mark, source line)`
    Point(Vec<(f64, String, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Flag(String),
    /// A value that is neither number, string nor flag.
    Bad(String),
}

/// True when the line starting at `rest` has a `key =` label, i.e. an `=`
/// before any string literal.
fn has_label(rest: &str) -> bool {
    let line = rest.split('\n').next().unwrap_or("");
    match (line.find('='), line.find('"')) {
        (Some(eq), Some(q)) => eq < q,
        (Some(_), None) => true,
        _ => false,
    }
}

fn decode(document: &[u8]) -> Result<String> {
    let utf16 = |be: bool| -> Result<String> {
        let units: Vec<u16> = document[2..]
            .chunks_exact(2)
            .map(|c| if be { u16::from_be_bytes([c[0], c[1]]) } else { u16::from_le_bytes([c[0], c[1]]) })
            .collect();
        String::from_utf16(&units).map_err(|_| Error::Parse {
            line: 1,
            column: 1,
            message: "invalid UTF-16 text".into(),
        })
    };
    match document {
        [0xFE, 0xFF, ..] => utf16(true),
        [0xFF, 0xFE, ..] => utf16(false),
        _ => {
            let body = document.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(document);
            String::from_utf8(body.to_vec()).map_err(|e| Error::Parse {
                line: 1 + body[..e.utf8_error().valid_up_to()]
                    .iter()
                    .filter(|b| **b == b'\n')
                    .count(),
                column: 1,
                message: "document is not valid UTF-8".into(),
            })
        }
    }
}

/// Splits a document into value tokens with their lines. Key labels (words
/// left of `=`, words ending in `:` or `?`, and words right before `[`) are
/// dropped; any other word that is not a number becomes [`Tok::Bad`].
fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut label = has_label(text);
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => {
                line += 1;
                i += 1;
                label = has_label(&text[i..]);
            }
            b'=' => {
                label = false;
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'!' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                let start = line;
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    let Some(rel) = text[j..].find('"') else {
                        return Err(Error::Parse {
                            line: start,
                            column: 1,
                            message: "unterminated string".into(),
                        });
                    };
                    s.push_str(&text[j..j + rel]);
                    j += rel + 1;
                    if bytes.get(j) == Some(&b'"') {
                        s.push('"');
                        j += 1;
                    } else {
                        break;
                    }
                }
                line += s.matches('\n').count();
                toks.push((Tok::Str(s), start));
                i = j;
            }
            b'[' => {
                i = text[i..].find(']').map_or(bytes.len(), |r| i + r + 1);
            }
            b'<' => {
                let end = text[i..].find('>').map_or(bytes.len(), |r| i + r + 1);
                toks.push((Tok::Flag(text[i..end].to_owned()), line));
                i = end;
            }
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !b"\"[=".contains(&bytes[i]) {
                    i += 1;
                }
                let word = &text[start..i];
                let before_bracket = text[i..].trim_start_matches([' ', '\t']).starts_with('[');
                if let Ok(v) = word.parse::<f64>() {
                    toks.push((Tok::Num(v), line));
                } else if !(label || word.ends_with(':') || word.ends_with('?') || before_bracket) {
                    toks.push((Tok::Bad(word.to_owned()), line));
                }
            }
        }
    }
    Ok(toks)
}

struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.1)
            .unwrap_or(1)
    }

    fn err(&self, what: &str) -> Error {
        let message = match self.toks.get(self.pos) {
            Some((Tok::Bad(word), _)) => format!("expected {what}, found {word:?}"),
            None => format!("expected {what}, found end of file"),
            _ => format!("expected {what}"),
        };
        Error::Parse {
            line: self.line(),
            column: 1,
            message,
        }
    }

    fn num(&mut self, what: &str) -> Result<f64> {
        match self.toks.get(self.pos) {
            Some((Tok::Num(v), _)) => {
                self.pos += 1;
                Ok(*v)
            }
            _ => Err(self.err(what)),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let v = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            self.pos -= 1;
            return Err(self.err(what));
        }
        Ok(v as usize)
    }

    fn string(&mut self, what: &str) -> Result<(String, usize)> {
        match self.toks.get(self.pos) {
            Some((Tok::Str(s), line)) => {
                self.pos += 1;
                Ok((s.clone(), *line))
            }
            _ => Err(self.err(what)),
        }
    }

    fn flag(&mut self) -> Option<String> {
        match self.toks.get(self.pos) {
            Some((Tok::Flag(s), _)) => {
                self.pos += 1;
                Some(s.clone())
            }
            _ => None,
        }
    }
}

/// Parses a whole TextGrid document.
pub fn parse_textgrid(document: &[u8]) -> Result<TextGrid> {
    let text = decode(document)?;
    let mut cur = Cursor {
        toks: tokenize(&text)?,
        pos: 0,
    };
    let (file_type, _) = cur.string("file type \"ooTextFile\"")?;
    if file_type != "ooTextFile" {
        cur.pos -= 1;
        return Err(cur.err("file type \"ooTextFile\""));
    }
    let (class, _) = cur.string("object class \"TextGrid\"")?;
    if class != "TextGrid" {
        cur.pos -= 1;
        return Err(cur.err("object class \"TextGrid\""));
    }
    let xmin = cur.num("xmin")?;
    let xmax = cur.num("xmax")?;
    let mut grid = TextGrid {
        xmin,
        xmax,
        tiers: Vec::new(),
    };
    if cur.flag().as_deref() == Some("<absent>") {
        return Ok(grid);
    }
    let n_tiers = cur.count("tier count")?;
    for _ in 0..n_tiers {
        let (class, _) = cur.string("tier class")?;
        let (name, _) = cur.string("tier name")?;
        let txmin = cur.num("tier xmin")?;
        let txmax = cur.num("tier xmax")?;
        let n = cur.count("interval count")?;
        let kind = match class.as_str() {
            "IntervalTier" => {
                let mut ivs = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = cur.line();
                    let a = cur.num("interval xmin")?;
                    let b = cur.num("interval xmax")?;
                    let (label, _) = cur.string("interval text")?;
                    ivs.push((a, b, label, line));
                }
                TierKind::Interval(ivs)
            }
            "TextTier" => {
                let mut pts = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = cur.line();
                    let t = cur.num("point time")?;
                    let (mark, _) = cur.string("point mark")?;
                    pts.push((t, mark, line));
                }
                TierKind::Point(pts)
            }
            other => {
                return Err(Error::schema_at(cur.line(), format!("unknown tier class {other:?}")))
            }
        };
        grid.tiers.push(Tier {
            name,
            xmin: txmin,
            xmax: txmax,
            kind,
        });
    }
    Ok(grid)
}

const PHONEME_TIER_NAMES: [&str; 5] = ["phones", "phone", "phonemes", "phoneme", "phn"];

impl TextGrid {
    /// Picks the named interval tier, or the phoneme-looking one, or the first interval tier.
    pub fn interval_tier(&self, name: Option<&str>) -> Result<&Tier> {
        let intervals = || self.tiers.iter().filter(|t| matches!(t.kind, TierKind::Interval(_)));
        match name {
            Some(n) => intervals()
                .find(|t| t.name == n)
                .ok_or_else(|| Error::MissingTier(n.to_owned())),
            None => intervals()
                .find(|t| PHONEME_TIER_NAMES.contains(&t.name.to_lowercase().as_str()))
                .or_else(|| intervals().next())
                .ok_or_else(|| Error::MissingTier("<any interval tier>".to_owned())),
        }
    }

    /// Converts one interval tier into an annotation track. Empty labels and
    /// bare silence spellings become canonical silence marks.
    pub fn annotation(&self, tier: Option<&str>) -> Result<AnnotationTrack> {
        let tier = self.interval_tier(tier)?;
        let TierKind::Interval(ivs) = &tier.kind else {
            unreachable!("interval_tier only returns interval tiers")
        };
        let mut out = Vec::with_capacity(ivs.len());
        let mut prev_end = f64::NEG_INFINITY;
        for (a, b, label, line) in ivs {
            if !(b > a) {
                return Err(Error::schema_at(*line, format!("interval [{a}, {b}] is empty or reversed")));
            }
            if *a + TIME_EPSILON < prev_end {
                return Err(Error::schema_at(
                    *line,
                    format!("interval starting at {a} overlaps or precedes the previous one ending at {prev_end}"),
                ));
            }
            prev_end = *b;
            let label = label.trim();
            let phoneme = silence_mark(label).unwrap_or(label);
            out.push(PhonemeInterval::new(phoneme, *a, *b)?);
        }
        AnnotationTrack::new(out)
    }
}

/// Parses a TextGrid and returns the requested phoneme tier as an annotation track.
pub fn parse_textgrid_subset(document: &[u8], tier: Option<&str>) -> Result<AnnotationTrack> {
    parse_textgrid(document)?.annotation(tier)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Writes a single interval tier in the long text layout.
pub fn write_textgrid(track: &AnnotationTrack, tier_name: &str) -> String {
    let (xmin, xmax) = track.span().map(|(_, b)| (0.0, b)).unwrap_or((0.0, 0.0));
    let mut out = String::new();
    out.push_str("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    out.push_str(&format!("xmin = {xmin}\nxmax = {xmax}\ntiers? <exists>\nsize = 1\nitem []:\n"));
    out.push_str("    item [1]:\n        class = \"IntervalTier\"\n");
    out.push_str(&format!("        name = {}\n", quote(tier_name)));
    out.push_str(&format!("        xmin = {xmin}\n        xmax = {xmax}\n"));
    out.push_str(&format!(
        "        intervals: size = {}\n",
        track.intervals().len()
    ));
    for (i, iv) in track.intervals().iter().enumerate() {
        out.push_str(&format!(
            "        intervals [{}]:\n            xmin = {}\n            xmax = {}\n            text = {}\n",
            i + 1,
            iv.start,
            iv.end,
            quote(&iv.phoneme)
        ));
    }
    out
}
