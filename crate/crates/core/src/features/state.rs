use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{Error, Result};

/// Slot name to filled value. An empty string or the literal `none` means
/// the slot is unfilled.
pub type SemanticDialogueState = BTreeMap<String, String>;

/// Ordered, unique slot names. A slot's position is its bit index in every
/// state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchema {
    slots: Vec<String>,
    index: HashMap<String, usize>,
}

impl SlotSchema {
    pub fn new(slots: Vec<String>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Config("slot schema needs at least one slot".into()));
        }
        let mut index = HashMap::with_capacity(slots.len());
        for (i, s) in slots.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate slot `{s}` in schema")));
            }
        }
        Ok(SlotSchema { slots, index })
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, slot: &str) -> Option<usize> {
        self.index.get(slot).copied()
    }
}

impl Serialize for SlotSchema {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.slots.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SlotSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let slots = Vec::<String>::deserialize(d)?;
        SlotSchema::new(slots).map_err(serde::de::Error::custom)
    }
}

/// One fill bit per schema slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector(Vec<u8>);

impl StateVector {
    pub fn zeros(len: usize) -> Self {
        StateVector(vec![0; len])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn filled_count(&self) -> usize {
        self.0.iter().filter(|b| **b == 1).count()
    }
}

pub fn is_filled(value: &str) -> bool {
    let v = value.trim();
    !v.is_empty() && !v.eq_ignore_ascii_case("none")
}

pub fn vectorize_state(state: &SemanticDialogueState, schema: &SlotSchema) -> Result<StateVector> {
    let mut bits = vec![0; schema.len()];
    for (slot, value) in state {
        let i = schema.index_of(slot).ok_or_else(|| Error::UnknownSlot {
            slot: slot.clone(),
            line: None,
        })?;
        bits[i] = u8::from(is_filled(value));
    }
    Ok(StateVector(bits))
}

/// Three consecutive state vectors, most recent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextualStateVector(Vec<u8>);

impl ContextualStateVector {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices of set bits, ascending.
    pub fn active(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Window over the per-user-turn states for user turn `turn` (0-based).
///
/// Recognition mode reads `V_t, V_{t-1}, V_{t-2}`; satisfaction mode shifts the
/// window back by one turn so the current turn's state is never read.
/// Positions before the first turn are zero vectors.
pub fn contextual_state(states: &[StateVector], turn: usize, mode: Mode, slots: usize) -> ContextualStateVector {
    let newest = match mode {
        Mode::Erc => turn as isize,
        Mode::Satisfaction => turn as isize - 1,
    };
    let mut bits = Vec::with_capacity(3 * slots);
    for back in 0..3 {
        let t = newest - back;
        match usize::try_from(t).ok().and_then(|t| states.get(t)) {
            Some(v) => bits.extend_from_slice(v.bits()),
            None => bits.extend(std::iter::repeat_n(0, slots)),
        }
    }
    ContextualStateVector(bits)
}

/// Fully connected `tanh` layer from a contextual state vector to the state
/// encoding. Weights are stored input-major: `weights[i * out_dim + o]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProjection {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl StateProjection {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        StateProjection {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim {
            return Err(Error::ShapeMismatch {
                what: "state projection weights",
                expected: self.in_dim * self.out_dim,
                actual: self.weights.len(),
            });
        }
        if self.bias.len() != self.out_dim {
            return Err(Error::ShapeMismatch {
                what: "state projection bias",
                expected: self.out_dim,
                actual: self.bias.len(),
            });
        }
        Ok(())
    }

    /// Pre-activation for a binary input given by its set indices.
    pub(crate) fn pre_activation(&self, active: &[usize]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for &i in active {
            let row = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
            z.iter_mut().zip(row).for_each(|(z, w)| *z += w);
        }
        z
    }
}

/// Output of the state projection; every entry lies in (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoding(pub Vec<f64>);

pub fn project_state(v: &ContextualStateVector, params: &StateProjection) -> Result<StateEncoding> {
    params.check()?;
    if v.len() != params.in_dim {
        return Err(Error::ShapeMismatch {
            what: "contextual state vector",
            expected: params.in_dim,
            actual: v.len(),
        });
    }
    let mut z = params.pre_activation(&v.active());
    z.iter_mut().for_each(|z| *z = z.tanh());
    Ok(StateEncoding(z))
}
