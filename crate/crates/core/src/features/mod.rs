//! Model inputs: hashed dialogue-history text and dialogue-state windows,
//! fused by concatenation.

mod state;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use state::{
    contextual_state, is_filled, project_state, vectorize_state, ContextualStateVector, SemanticDialogueState,
    SlotSchema, StateEncoding, StateProjection, StateVector,
};
pub use text::{feature_bucket, featurize_text, tokenize, FeaturizerConfig, TextEncoding};

use crate::data::{Dialogue, Speaker};
use crate::error::{Error, Result};

/// Emotion recognition reads the current user turn; satisfaction prediction
/// stops at the system turn before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Erc,
    Satisfaction,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Erc => "erc",
            Mode::Satisfaction => "satisfaction",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erc" => Ok(Mode::Erc),
            "satisfaction" => Ok(Mode::Satisfaction),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected erc or satisfaction)"))),
        }
    }
}

/// Turns visible to the model, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueHistory {
    pub turns: Vec<(Speaker, String)>,
    pub mode: Mode,
}

impl DialogueHistory {
    /// History for user turn `user_turn` (0-based). In satisfaction mode the
    /// user turn itself is left out.
    pub fn from_dialogue(dialogue: &Dialogue, user_turn: usize, mode: Mode) -> Result<Self> {
        let positions = dialogue.user_turn_positions();
        let pos = *positions.get(user_turn).ok_or_else(|| {
            Error::Data(format!(
                "dialogue `{}` has no user turn {user_turn}",
                dialogue.id
            ))
        })?;
        let end = match mode {
            Mode::Erc => pos + 1,
            Mode::Satisfaction => pos,
        };
        let turns = dialogue.turns[..end]
            .iter()
            .rev()
            .map(|t| (t.speaker, t.text.clone()))
            .collect();
        Ok(DialogueHistory { turns, mode })
    }
}

/// Text encoding followed by state encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub text: TextEncoding,
    pub state: StateEncoding,
}

impl FusedFeatures {
    pub fn len(&self) -> usize {
        self.text.dim + self.state.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = self.text.to_dense();
        out.extend_from_slice(&self.state.0);
        out
    }
}

pub fn fuse(r: TextEncoding, s: StateEncoding) -> Result<FusedFeatures> {
    if r.values.iter().chain(&s.0).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    Ok(FusedFeatures { text: r, state: s })
}
