use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn phonemix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonemix"))
        .args(args)
        .env("PHONEMIX_LOG", "error")
        .output()
        .expect("phonemix runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A small generated corpus, ingested, with a short training schedule.
fn corpus(songs: usize, epochs: usize) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("c");
    ok(phonemix(&[
        "synth",
        "--out",
        root.to_str().unwrap(),
        "--songs",
        &songs.to_string(),
        "--segments-per-song",
        "2",
        "--epochs",
        &epochs.to_string(),
    ]));
    let cfg = root.join("run.toml").display().to_string();
    ok(phonemix(&["--config", &cfg, "ingest"]));
    (dir, cfg)
}

fn run_dir(cfg: &str) -> PathBuf {
    Path::new(cfg).parent().unwrap().join("run")
}

#[test]
fn ingest_lists_every_song_and_is_reproducible() {
    let (_dir, cfg) = corpus(3, 1);
    let manifest_path = run_dir(&cfg).join("manifest.json");
    let first = std::fs::read(&manifest_path).unwrap();
    let manifest: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(manifest["schema"], "phonemix-manifest/1");
    assert_eq!(manifest["songs"].as_array().unwrap().len(), 3);
    assert!(run_dir(&cfg).join("misalignment.json").exists());
    ok(phonemix(&["--config", &cfg, "ingest"]));
    assert_eq!(std::fs::read(&manifest_path).unwrap(), first);
}

#[test]
fn ingest_of_two_fixture_songs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for sub in ["scores", "annotations"] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    let f = fixtures();
    std::fs::copy(f.join("lexicon.txt"), root.join("lexicon.txt")).unwrap();
    std::fs::copy(f.join("good/phrase.musicxml"), root.join("scores/phrase.musicxml")).unwrap();
    std::fs::copy(f.join("good/phrase.TextGrid"), root.join("annotations/phrase.TextGrid")).unwrap();
    std::fs::copy(f.join("good/minimal.musicxml"), root.join("scores/minimal.musicxml")).unwrap();
    std::fs::write(
        root.join("run.toml"),
        "[paths]\nscores = \"scores\"\nannotations = \"annotations\"\nlexicon = \"lexicon.txt\"\n",
    )
    .unwrap();
    let out = ok(phonemix(&["--config", root.join("run.toml").to_str().unwrap(), "--json", "ingest"]));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.is_object());
    let manifest: Value = serde_json::from_slice(&std::fs::read(root.join("out/manifest.json")).unwrap()).unwrap();
    let songs = manifest["songs"].as_array().unwrap();
    assert_eq!(songs.len(), 2);
    let phrase = songs.iter().find(|s| s["name"] == "phrase").unwrap();
    // the slurred A4 merges into "mi"; the rest splits the phrase
    assert_eq!(phrase["segments"].as_array().unwrap().len(), 2);
    let first = &phrase["segments"][0]["pairs"];
    assert_eq!(first[0]["syllable"], "sa");
    assert_eq!(first[0]["annotated"], serde_json::json!([9, 15]));
    assert_eq!(first[3]["d_note"], 96);
}

#[test]
fn bad_textgrid_exits_2_naming_the_file() {
    let (_dir, cfg) = corpus(3, 1);
    let grid = Path::new(&cfg).parent().unwrap().join("annotations/song001.TextGrid");
    std::fs::write(&grid, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\nxmin = oops\n").unwrap();
    let out = phonemix(&["--config", &cfg, "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("song001.TextGrid"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let (_dir, cfg) = corpus(3, 1);
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[extra]\nvalue = 1\n");
    std::fs::write(&cfg, text).unwrap();
    let out = phonemix(&["--config", &cfg, "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(phonemix(&["--config", "/no/such/file.toml", "ingest"]).status.code() == Some(2));
    assert_eq!(phonemix(&["--strategy", "type3", "train"]).status.code(), Some(2));
    assert_eq!(phonemix(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn train_lowers_the_loss_and_writes_artifacts() {
    let (_dir, cfg) = corpus(3, 8);
    let out = ok(phonemix(&["--config", &cfg, "--strategy", "type2", "--json", "train"]));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["strategy"], "type2");
    let run = run_dir(&cfg);
    assert!(run.join("checkpoints/type2.ckpt").exists());
    let log: Value = serde_json::from_slice(&std::fs::read(run.join("logs/type2.json")).unwrap()).unwrap();
    let epochs = log["epochs"].as_array().unwrap();
    assert_eq!(epochs.len(), 8);
    let first = epochs[0]["train"]["total"].as_f64().unwrap();
    let last = epochs[7]["train"]["total"].as_f64().unwrap();
    assert!(last < first, "{first} -> {last}");
    assert!(epochs[0]["valid"].is_object());
    assert_eq!(log["config"]["train"]["strategy"], "type2");
}

#[test]
fn train_without_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = phonemix(&["--out", dir.path().to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}

#[test]
fn compare_eval_and_duration_inference() {
    let (_dir, cfg) = corpus(3, 3);
    let run = run_dir(&cfg);

    let missing = phonemix(&["--config", &cfg, "compare"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("checkpoint"));

    for s in ["type1", "type2", "phoneix"] {
        ok(phonemix(&["--config", &cfg, "--strategy", s, "train"]));
    }
    let table = ok(phonemix(&["--config", &cfg, "compare"]));
    let text = String::from_utf8(table.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Method,MCD,VUV_E,SA"));
    assert!(lines[1].starts_with("Type1,") && lines[2].starts_with("Type2,") && lines[3].starts_with("PHONEix,"));
    let saved = std::fs::read(run.join("compare.json")).unwrap();
    ok(phonemix(&["--config", &cfg, "compare"]));
    assert_eq!(std::fs::read(run.join("compare.json")).unwrap(), saved);

    let empty = phonemix(&["--config", &cfg, "compare", "--strategies"]);
    assert_eq!(empty.status.code(), Some(2));

    let eval = ok(phonemix(&["--config", &cfg, "--strategy", "phoneix", "--json", "eval"]));
    let report: Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["schema"], "phonemix-eval/1");
    assert_eq!(report["method"], "PHONEix");
    assert!(run.join("eval/phoneix.json").exists());

    // one note: one line per phoneme, seconds = frames * 0.0125
    let score = fixtures().join("good/minimal.musicxml");
    let score = score.to_str().unwrap();
    let listing = ok(phonemix(&["--config", &cfg, "infer-durations", "--score", score]));
    let text = String::from_utf8(listing.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][2], rows[1][2]), ("k", "a"));
    let frames: Vec<u32> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    for (r, f) in rows.iter().zip(&frames) {
        assert_eq!(r[4], format!("{:.4}", *f as f64 * 0.0125));
    }
    // a quarter note at 120 bpm is 40 frames; two phonemes round within 1
    assert!((frames.iter().sum::<u32>() as i64 - 40).abs() <= 1, "{frames:?}");

    let json = ok(phonemix(&["--config", &cfg, "--json", "infer-durations", "--score", score]));
    let doc: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(doc["schema"], "phonemix-durations/1");
    let phonemes = doc["notes"][0]["phonemes"].as_array().unwrap();
    assert_eq!(phonemes[0]["frames"].as_u64().unwrap() as u32, frames[0]);
    let p: f64 = phonemes.iter().map(|p| p["proportion"].as_f64().unwrap()).sum();
    assert!((p - 1.0).abs() < 1e-9);

    let type1 = run.join("checkpoints/type1.ckpt");
    let wrong = phonemix(&["--config", &cfg, "infer-durations", "--score", score, "--checkpoint", type1.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(2));

    let odd = Path::new(&cfg).parent().unwrap().join("odd.musicxml");
    std::fs::write(&odd, std::fs::read_to_string(fixtures().join("good/minimal.musicxml")).unwrap().replace(">ka<", ">zzz<"))
        .unwrap();
    let out = phonemix(&["--config", &cfg, "infer-durations", "--score", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"zzz\""));
}
