use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Lexicon;

/// Token ids for syllables and phonemes, in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    syllables: Vec<String>,
    phonemes: Vec<String>,
    #[serde(skip)]
    syllable_ids: BTreeMap<String, usize>,
    #[serde(skip)]
    phoneme_ids: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new(mut syllables: Vec<String>, mut phonemes: Vec<String>) -> Self {
        syllables.sort();
        syllables.dedup();
        phonemes.sort();
        phonemes.dedup();
        let mut v = Self {
            syllables,
            phonemes,
            syllable_ids: BTreeMap::new(),
            phoneme_ids: BTreeMap::new(),
        };
        v.reindex();
        v
    }

    pub fn from_lexicon(lexicon: &Lexicon) -> Self {
        Self::new(
            lexicon.syllables().map(str::to_owned).collect(),
            lexicon.phonemes().into_iter().map(|p| p.symbol).collect(),
        )
    }

    /// Rebuilds lookup tables; call after deserializing.
    pub fn reindex(&mut self) {
        self.syllable_ids = self.syllables.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        self.phoneme_ids = self.phonemes.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    }

    pub fn syllable_id(&self, s: &str) -> Result<usize> {
        self.syllable_ids.get(s).copied().ok_or_else(|| Error::Vocabulary {
            kind: "syllable",
            token: s.to_owned(),
        })
    }

    pub fn phoneme_id(&self, s: &str) -> Result<usize> {
        self.phoneme_ids.get(s).copied().ok_or_else(|| Error::Vocabulary {
            kind: "phoneme",
            token: s.to_owned(),
        })
    }

    pub fn n_syllables(&self) -> usize {
        self.syllables.len()
    }

    pub fn n_phonemes(&self) -> usize {
        self.phonemes.len()
    }
}
