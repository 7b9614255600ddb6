//! Declarative run configuration. Relative paths resolve against the
//! directory of the config file; command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use phonemix_core::model::{ModelConfig, StrategyKind, DEFAULT_CONSONANT_CAP, DEFAULT_CONSONANT_FRACTION};
use phonemix_core::score::Lexicon;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub split: Split,
    pub model: ModelConfig,
    pub train: TrainSettings,
    pub compare: CompareSettings,
    pub features: FeatureSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of `*.musicxml` / `*.xml` scores.
    pub scores: PathBuf,
    /// Directory of `<stem>.TextGrid` files.
    pub annotations: Option<PathBuf>,
    /// Directory of `<stem>.wav` files.
    pub wavs: Option<PathBuf>,
    pub lexicon: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            scores: "scores".into(),
            annotations: None,
            wavs: None,
            lexicon: "lexicon.txt".into(),
            out: "out".into(),
        }
    }
}

/// Song names held out for validation and test; everything else trains.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Split {
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub strategy: String,
    pub seed: u64,
    pub epochs: usize,
    pub consonant_fraction: f64,
    pub consonant_cap: u32,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            strategy: "phoneix".into(),
            seed: 0,
            epochs: 30,
            consonant_fraction: DEFAULT_CONSONANT_FRACTION,
            consonant_cap: DEFAULT_CONSONANT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    pub strategies: Vec<String>,
    /// Largest boundary shift, in frames, injected into Type 2 inference
    /// durations. Zero disables the perturbation.
    pub misalignment_frames: u32,
    pub griffin_lim_iterations: usize,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            strategies: vec!["type1".into(), "type2".into(), "phoneix".into()],
            misalignment_frames: 3,
            griffin_lim_iterations: phonemix_core::dsp::DEFAULT_GRIFFIN_LIM_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub voicing_threshold: f64,
    /// Annotation tier; by default a tier named like "phones", else the first.
    pub tier: Option<String>,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            voicing_threshold: phonemix_core::dsp::DEFAULT_VOICING_THRESHOLD,
            tier: None,
        }
    }
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.scores);
        fix(&mut self.paths.lexicon);
        fix(&mut self.paths.out);
        if let Some(p) = self.paths.annotations.as_mut() {
            fix(p);
        }
        if let Some(p) = self.paths.wavs.as_mut() {
            fix(p);
        }
    }

    pub fn strategy(&self, name: &str) -> Result<StrategyKind> {
        let kind = StrategyKind::parse(name)?;
        let (consonant_fraction, consonant_cap) = (self.train.consonant_fraction, self.train.consonant_cap);
        Ok(match kind {
            StrategyKind::Type1 { .. } => StrategyKind::Type1 {
                consonant_fraction,
                consonant_cap,
            },
            StrategyKind::Type2 { .. } => StrategyKind::Type2 {
                consonant_fraction,
                consonant_cap,
            },
            StrategyKind::Phoneix => kind,
        })
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        let path = &self.paths.lexicon;
        let text = std::fs::read_to_string(path).map_err(|e| phonemix_core::Error::from(e).at_path(path))?;
        Ok(Lexicon::parse(&text).map_err(|e| e.at_path(path))?)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths.out.join("manifest.json")
    }

    pub fn checkpoint_path(&self, strategy: &StrategyKind) -> PathBuf {
        self.paths.out.join("checkpoints").join(format!("{}.ckpt", strategy.name()))
    }
}
