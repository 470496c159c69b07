//! Dialogue corpora: record types, the line-delimited JSON file format, the
//! synthetic generator and dialogue-level splitting.

mod io;
mod split;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use io::{load_corpus, parse_corpus, save_corpus, write_corpus, CORPUS_FORMAT, CORPUS_VERSION};
pub use split::split_corpus;
pub use synth::{cue_tokens, generate_synthetic, synthetic_utterance, SynthConfig, DISTRACTORS, REFERENCE_PROPORTIONS};

use crate::error::{Error, Result};
use crate::features::{vectorize_state, SemanticDialogueState, SlotSchema, StateVector};
use crate::taxonomy::EmotionLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl Speaker {
    pub fn tag(self) -> &'static str {
        match self {
            Speaker::User => "usr",
            Speaker::System => "sys",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    /// Only user turns carry emotions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionLabel>,
    /// 1-5 user satisfaction rating, user turns only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<u8>,
    /// Dialogue state after this turn. Missing means nothing filled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<SemanticDialogueState>,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::User,
            text: text.into(),
            emotion: None,
            satisfaction: None,
            state: None,
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::System,
            ..Turn::user(text)
        }
    }

    pub fn with_emotion(mut self, emotion: EmotionLabel) -> Self {
        self.emotion = Some(emotion);
        self
    }

    pub fn with_state(mut self, state: SemanticDialogueState) -> Self {
        self.state = Some(state);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    #[serde(default)]
    pub domain: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Dialogue {
    /// Positions in `turns` of the user turns, in dialogue order. User turn
    /// `k` (0-based) is `turns[user_turn_positions()[k]]`.
    pub fn user_turn_positions(&self) -> Vec<usize> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::User)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn user_turn_count(&self) -> usize {
        self.turns.iter().filter(|t| t.speaker == Speaker::User).count()
    }

    pub fn user_turn(&self, k: usize) -> Option<&Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User).nth(k)
    }

    /// One state vector per user turn.
    pub fn user_state_vectors(&self, schema: &SlotSchema) -> Result<Vec<StateVector>> {
        let empty = BTreeMap::new();
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .map(|t| vectorize_state(t.state.as_ref().unwrap_or(&empty), schema))
            .collect()
    }

    /// Copy ending at user turn `k`, where only that turn keeps its labels.
    pub fn prefix_for_user_turn(&self, k: usize) -> Option<Dialogue> {
        let end = *self.user_turn_positions().get(k)?;
        let mut turns = self.turns[..=end].to_vec();
        for t in &mut turns[..end] {
            t.emotion = None;
            t.satisfaction = None;
        }
        Some(Dialogue {
            id: self.id.clone(),
            domain: self.domain.clone(),
            turns,
            provenance: self.provenance.clone(),
        })
    }
}

/// Which speaker opens every dialogue of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TurnOrder {
    #[default]
    UserFirst,
    SystemFirst,
}

impl TurnOrder {
    pub fn first(self) -> Speaker {
        match self {
            TurnOrder::UserFirst => Speaker::User,
            TurnOrder::SystemFirst => Speaker::System,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusHeader {
    pub schema: SlotSchema,
    pub turn_order: TurnOrder,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub dialogues: Vec<Dialogue>,
}

/// A single classification sample: user turn `user_turn` of dialogue
/// `dialogue`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleRef {
    pub dialogue: usize,
    pub user_turn: usize,
}

impl Corpus {
    pub fn new(schema: SlotSchema, dialogues: Vec<Dialogue>) -> Self {
        Corpus {
            header: CorpusHeader {
                schema,
                turn_order: TurnOrder::UserFirst,
                split: None,
            },
            dialogues,
        }
    }

    pub fn schema(&self) -> &SlotSchema {
        &self.header.schema
    }

    pub fn with_dialogues(&self, dialogues: Vec<Dialogue>) -> Corpus {
        Corpus {
            header: self.header.clone(),
            dialogues,
        }
    }

    /// Every user turn carrying an emotion label.
    pub fn emotion_samples(&self) -> Vec<(SampleRef, EmotionLabel)> {
        self.user_samples(|t| t.emotion)
    }

    /// Every user turn carrying a satisfaction rating.
    pub fn satisfaction_samples(&self) -> Vec<(SampleRef, u8)> {
        self.user_samples(|t| t.satisfaction)
    }

    fn user_samples<T>(&self, get: impl Fn(&Turn) -> Option<T>) -> Vec<(SampleRef, T)> {
        let mut out = Vec::new();
        for (d, dialogue) in self.dialogues.iter().enumerate() {
            let users = dialogue.turns.iter().filter(|t| t.speaker == Speaker::User);
            for (k, turn) in users.enumerate() {
                if let Some(v) = get(turn) {
                    out.push((
                        SampleRef {
                            dialogue: d,
                            user_turn: k,
                        },
                        v,
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.dialogues
            .iter()
            .try_for_each(|d| validate_dialogue(d, &self.header))
    }
}

pub(crate) fn validate_dialogue(d: &Dialogue, header: &CorpusHeader) -> Result<()> {
    let mut expected = header.turn_order.first();
    for (i, turn) in d.turns.iter().enumerate() {
        if turn.speaker != expected {
            return Err(Error::Data(format!(
                "dialogue `{}` turn {i}: expected a {:?} turn, turns must alternate",
                d.id, expected
            )));
        }
        expected = match expected {
            Speaker::User => Speaker::System,
            Speaker::System => Speaker::User,
        };
        if turn.speaker == Speaker::System && (turn.emotion.is_some() || turn.satisfaction.is_some()) {
            return Err(Error::Data(format!(
                "dialogue `{}` turn {i}: system turns cannot carry emotion or satisfaction labels",
                d.id
            )));
        }
        if let Some(r) = turn.satisfaction {
            if !(1..=5).contains(&r) {
                return Err(Error::Data(format!(
                    "dialogue `{}` turn {i}: satisfaction rating {r} outside 1-5",
                    d.id
                )));
            }
        }
        if let Some(state) = &turn.state {
            for slot in state.keys() {
                if header.schema.index_of(slot).is_none() {
                    return Err(Error::UnknownSlot {
                        slot: slot.clone(),
                        line: None,
                    });
                }
            }
        }
    }
    Ok(())
}
