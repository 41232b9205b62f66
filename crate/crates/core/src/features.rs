//! State featurization for the Q-network.
//!
//! Layout: `[robot moves][user moves][commands (7)][words (39)][temporal]`,
//! one move and temporal entry per cell, so 73 inputs for the 3x3 game and
//! 289 for the 9x9 one. Keys name each slot (`rob.draw.upperLeft`,
//! `cmd.hello`, `word.pepper`, `temporal.e5`); indices follow the layout.

use std::collections::HashMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::acts::CommandTag;
use crate::env::corpus::{Vocabulary, VOCABULARY_SIZE};
use crate::env::EpisodeState;
use crate::game::{CellId, Variant};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("line {line}: expected `<key> <index>`")]
    Malformed { line: usize },
    #[error("index {found} at line {line}, expected {expected}")]
    OutOfOrder { line: usize, expected: usize, found: usize },
    #[error("duplicate key {0}")]
    DuplicateKey(String),
}

/// Ordered feature keys with their positions in the state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    keys: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl FeatureIndex {
    pub fn for_variant(variant: Variant) -> Self {
        let n = variant.cell_count();
        let cell = |i: usize| CellId::new(variant, i).expect("in range").name(variant);
        let mut keys = Vec::with_capacity(3 * n + 7 + VOCABULARY_SIZE);
        keys.extend((0..n).map(|i| format!("rob.draw.{}", cell(i))));
        keys.extend((0..n).map(|i| format!("usr.draw.{}", cell(i))));
        keys.extend(CommandTag::ALL.iter().map(|t| format!("cmd.{}", t.name())));
        keys.extend(Vocabulary::builtin().words().iter().map(|w| format!("word.{w}")));
        keys.extend((0..n).map(|i| format!("temporal.{}", cell(i))));
        Self::from_keys(keys).expect("generated keys are unique")
    }

    fn from_keys(keys: Vec<String>) -> Result<Self, ManifestError> {
        let mut lookup = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if lookup.insert(k.clone(), i).is_some() {
                return Err(ManifestError::DuplicateKey(k.clone()));
            }
        }
        Ok(FeatureIndex { keys, lookup })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    /// Manifest text: `<key> <index>` per line.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        for (i, k) in self.keys.iter().enumerate() {
            s.push_str(k);
            s.push(' ');
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse_manifest(text: &str) -> Result<Self, ManifestError> {
        let mut keys = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(key), Some(idx), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ManifestError::Malformed { line: n + 1 });
            };
            let found: usize = idx.parse().map_err(|_| ManifestError::Malformed { line: n + 1 })?;
            if found != keys.len() {
                return Err(ManifestError::OutOfOrder {
                    line: n + 1,
                    expected: keys.len(),
                    found,
                });
            }
            keys.push(key.to_string());
        }
        Self::from_keys(keys)
    }

    /// Hex SHA-256 of the manifest text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_manifest().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Short identifier stored in model files next to the hash.
    pub fn name(&self) -> String {
        format!("features-{}", self.len())
    }
}

/// How late the move filling `cell` happened: its ordinal over the total
/// number of moves so far, or 0 for an empty cell.
pub fn temporal_info(state: &EpisodeState, cell: CellId) -> f64 {
    let history = state.game().history();
    history
        .iter()
        .find(|m| m.cell == cell)
        .map_or(0.0, |m| m.ordinal as f64 / history.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Featurizer {
    variant: Variant,
    temporal: bool,
    index: FeatureIndex,
}

impl Featurizer {
    /// With `temporal == false` the temporal block is kept but zeroed, so
    /// both settings share one input width.
    pub fn new(variant: Variant, temporal: bool) -> Self {
        Featurizer {
            variant,
            temporal,
            index: FeatureIndex::for_variant(variant),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn temporal(&self) -> bool {
        self.temporal
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn featurize(&self, state: &EpisodeState) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.featurize_into(state, &mut v);
        v
    }

    pub fn featurize_into(&self, state: &EpisodeState, out: &mut [f64]) {
        assert_eq!(state.variant(), self.variant, "featurizer variant mismatch");
        assert_eq!(out.len(), self.dim());
        out.fill(0.0);
        let n = self.variant.cell_count();
        let cmd = 2 * n;
        let words = cmd + CommandTag::ALL.len();
        let temporal = words + VOCABULARY_SIZE;

        let history = state.game().history();
        let total = history.len() as f64;
        for m in history {
            let c = m.cell.index();
            let base = if m.player == state.robot() { 0 } else { n };
            out[base + c] = 1.0;
            if self.temporal {
                out[temporal + c] = m.ordinal as f64 / total;
            }
        }
        for (i, &on) in state.commands().iter().enumerate() {
            if on {
                out[cmd + i] = 1.0;
            }
        }
        let (rob, usr) = (state.words_robot(), state.words_user());
        for i in 0..VOCABULARY_SIZE {
            out[words + i] = if rob[i] { 1.0 } else { usr[i] };
        }
    }
}
