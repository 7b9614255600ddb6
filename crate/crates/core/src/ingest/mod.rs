//! Score and annotation ingestion: MusicXML and TextGrid readers, annotation
//! alignment, and the manifest that ties a corpus together.

mod align;
mod manifest;
mod musicxml;
mod textgrid;

pub use align::{align_annotation, AlignFlag, AlignedPair, MisalignmentReport};
pub use manifest::{
    Manifest, PairEntry, SegmentEntry, SongEntry, MANIFEST_SCHEMA,
};
pub use musicxml::{
    midi_to_pitch_spelling, parse_musicxml_subset, write_musicxml, ParsedScore, DEFAULT_TEMPO_BPM,
};
pub use textgrid::{
    parse_textgrid, parse_textgrid_subset, write_textgrid, TextGrid, Tier, TierKind,
};
