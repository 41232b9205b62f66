//! Example dialogues and the word vocabulary.
//!
//! Corpus format: one turn per line as `<speaker>|<act-kind>|<verbalisation>`,
//! speakers `rob` / `usr`, one blank line between dialogues. The vocabulary
//! file holds one word per line; line order is the feature order.

use std::collections::HashMap;

use thiserror::Error;

use super::acts::{ActKind, DialogueAct};
use crate::game::{CellId, Variant};

pub const VOCABULARY_SIZE: usize = 39;

const VOCABULARY_TEXT: &str = include_str!("../../data/vocabulary.txt");
const STANDARD_DIALOGUES: &str = include_str!("../../data/dialogues_standard.txt");
const ULTIMATE_DIALOGUES: &str = include_str!("../../data/dialogues_ultimate.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("vocabulary must have exactly {VOCABULARY_SIZE} words, found {0}")]
    VocabularySize(usize),
    #[error("duplicate vocabulary word {0:?}")]
    DuplicateWord(String),
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

/// Lower-cased alphabetic tokens; apostrophes are dropped (`It's` -> `its`).
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_ascii_alphabetic() || c == '\''))
        .map(|t| t.chars().filter(|c| c.is_ascii_alphabetic()).collect::<String>())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let words: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if words.len() != VOCABULARY_SIZE {
            return Err(CorpusError::VocabularySize(words.len()));
        }
        let mut index = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::DuplicateWord(w.clone()));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn builtin() -> Self {
        Vocabulary::parse(VOCABULARY_TEXT).expect("bundled vocabulary is valid")
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Vocabulary indices of the known words in `text` (unknown words dropped).
    pub fn word_indices(&self, text: &str) -> Vec<usize> {
        let mut out: Vec<usize> = tokenize(text).filter_map(|t| self.index_of(&t)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = self.words.join("\n");
        s.push('\n');
        s
    }
}

/// What the (simulated or human) user does in one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserAct {
    Greeting,
    Acknowledge,
    ConfirmPlay,
    GameMove(CellId),
    Closing,
}

impl UserAct {
    pub fn label(self, variant: Variant) -> String {
        match self {
            UserAct::Greeting => "Salutation(greeting)".into(),
            UserAct::Acknowledge => "Inform(ack)".into(),
            UserAct::ConfirmPlay => "Reply(playGame=yes)".into(),
            UserAct::GameMove(c) => format!("GameMove(gridloc={})", c.name(variant)),
            UserAct::Closing => "Salutation(closing)".into(),
        }
    }

    pub fn parse_label(variant: Variant, label: &str) -> Option<UserAct> {
        match label {
            "Salutation(greeting)" => Some(UserAct::Greeting),
            "Inform(ack)" => Some(UserAct::Acknowledge),
            "Reply(playGame=yes)" => Some(UserAct::ConfirmPlay),
            "Salutation(closing)" => Some(UserAct::Closing),
            _ => {
                let name = label.strip_prefix("GameMove(gridloc=")?.strip_suffix(')')?;
                CellId::parse(variant, name).ok().map(UserAct::GameMove)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Turn {
    Robot { act: DialogueAct, text: String },
    User { act: UserAct, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dialogue {
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    variant: Variant,
    dialogues: Vec<Dialogue>,
    /// User utterances keyed by the robot act they answer.
    responses: HashMap<ActKind, Vec<String>>,
}

impl Corpus {
    pub fn parse(variant: Variant, text: &str) -> Result<Self, CorpusError> {
        let mut dialogues = Vec::new();
        let mut current = Dialogue::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                if !current.turns.is_empty() {
                    dialogues.push(std::mem::take(&mut current));
                }
                continue;
            }
            let bad = |reason: &str| CorpusError::BadLine {
                line: n + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.splitn(3, '|');
            let (Some(speaker), Some(kind), Some(text)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected <speaker>|<act-kind>|<verbalisation>"));
            };
            let turn = match speaker {
                "rob" => Turn::Robot {
                    act: DialogueAct::parse_label(variant, kind).ok_or_else(|| bad("unknown robot act"))?,
                    text: text.to_string(),
                },
                "usr" => Turn::User {
                    act: UserAct::parse_label(variant, kind).ok_or_else(|| bad("unknown user act"))?,
                    text: text.to_string(),
                },
                _ => return Err(bad("speaker must be rob or usr")),
            };
            current.turns.push(turn);
        }
        if !current.turns.is_empty() {
            dialogues.push(current);
        }

        let mut responses: HashMap<ActKind, Vec<String>> = HashMap::new();
        for d in &dialogues {
            let mut last_robot = None;
            for t in &d.turns {
                match t {
                    Turn::Robot { act, .. } => last_robot = Some(act.kind()),
                    Turn::User { text, .. } => {
                        if let Some(k) = last_robot {
                            responses.entry(k).or_default().push(text.clone());
                        }
                    }
                }
            }
        }
        Ok(Corpus {
            variant,
            dialogues,
            responses,
        })
    }

    pub fn builtin(variant: Variant) -> Self {
        let text = match variant {
            Variant::Standard => STANDARD_DIALOGUES,
            Variant::Ultimate => ULTIMATE_DIALOGUES,
        };
        Corpus::parse(variant, text).expect("bundled corpus is valid")
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    /// Observed user utterances answering a robot act of `kind`.
    pub fn responses_to(&self, kind: ActKind) -> &[String] {
        self.responses.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, d) in self.dialogues.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for t in &d.turns {
                let line = match t {
                    Turn::Robot { act, text } => format!("rob|{}|{}\n", act.label(self.variant), text),
                    Turn::User { act, text } => format!("usr|{}|{}\n", act.label(self.variant), text),
                };
                out.push_str(&line);
            }
        }
        out
    }
}
