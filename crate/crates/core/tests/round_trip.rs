use proptest::prelude::*;

use phonemix_core::dsp::{read_feature_dump, write_feature_dump, FeatureMatrix};
use phonemix_core::ingest::{parse_musicxml_subset, parse_textgrid_subset, write_musicxml, write_textgrid};
use phonemix_core::model::{AfpModel, ModelConfig, Vocab};
use phonemix_core::nn::{Checkpoint, OptimizerState};
use phonemix_core::score::{AnnotationTrack, FrameClock, MusicScore, Note, PhonemeInterval};
use phonemix_core::synth::synth_lexicon;

/// Note or rest lengths in 1/64 s, with optional gaps; no two rests in a row.
fn score_strategy() -> impl Strategy<Value = MusicScore> {
    prop::collection::vec((0u32..4, 1u32..80, prop::option::of(0u8..=127), "[a-z]{1,4}"), 1..12).prop_map(|raw| {
        let mut t = 0u32;
        let mut notes = Vec::new();
        let mut last_rest = true;
        for (gap, len, pitch, syl) in raw {
            t += gap;
            let onset = t as f64 / 64.0;
            let duration = len as f64 / 64.0;
            let note = match pitch {
                None if !last_rest => Note::rest(onset, duration).unwrap(),
                _ => Note::new(Some(pitch.unwrap_or(60)), onset, duration, syl).unwrap(),
            };
            last_rest = note.is_rest();
            notes.push(note);
            t += len;
        }
        MusicScore::new(notes, FrameClock::default()).unwrap()
    })
}

fn track_strategy() -> impl Strategy<Value = AnnotationTrack> {
    prop::collection::vec((0.001f64..2.0, "[a-z][a-z =:\"?\\[\\]<>!]{0,5}[a-z]"), 1..15).prop_map(|raw| {
        let mut t = 0.0;
        let intervals = raw
            .into_iter()
            .map(|(len, label)| {
                let iv = PhonemeInterval::new(label, t, t + len).unwrap();
                t += len;
                iv
            })
            .collect();
        AnnotationTrack::new(intervals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn musicxml_write_parse_is_identity(score in score_strategy()) {
        let xml = write_musicxml(&score, 120.0);
        let back = parse_musicxml_subset(xml.as_bytes(), FrameClock::default()).unwrap();
        prop_assert_eq!(back.score, score);
    }

    #[test]
    fn textgrid_write_parse_keeps_times_and_settles_labels(track in track_strategy()) {
        let once = parse_textgrid_subset(write_textgrid(&track, "phones").as_bytes(), None).unwrap();
        prop_assert_eq!(once.intervals().len(), track.intervals().len());
        for (a, b) in once.intervals().iter().zip(track.intervals()) {
            prop_assert_eq!((a.start, a.end), (b.start, b.end));
        }
        let twice = parse_textgrid_subset(write_textgrid(&once, "phones").as_bytes(), None).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn feature_dump_keeps_f32_values(rows in 1usize..20, seed in any::<u64>()) {
        let dims = 7;
        let data: Vec<f64> = (0..rows * dims).map(|i| ((i as u64 ^ seed) % 1000) as f64 / 37.0 - 13.0).collect();
        let m = FeatureMatrix::new(data.iter().map(|v| *v as f32 as f64).collect(), dims, FrameClock::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &m).unwrap();
        prop_assert_eq!(read_feature_dump(buf.as_slice(), FrameClock::default()).unwrap(), m);
    }
}

#[test]
fn checkpoint_bytes_round_trip() {
    let lexicon = synth_lexicon();
    let config = ModelConfig {
        n_max: lexicon.n_max(),
        ..ModelConfig::default()
    };
    let model = AfpModel::new(config, Vocab::from_lexicon(&lexicon)).unwrap();
    let ckpt = Checkpoint {
        metadata: "{\"note\": \"opaque to the container\"}".into(),
        params: model.init_params(3),
        optimizer: Some(OptimizerState::adam(1e-3)),
    };
    let bytes = ckpt.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.metadata, ckpt.metadata);
    assert_eq!(back.params.len(), ckpt.params.len());
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}
