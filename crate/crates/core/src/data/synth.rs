//! Synthetic task-oriented corpus with controllable lexical and state cues.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Dialogue, Provenance, Turn};
use crate::error::{Error, Result};
use crate::features::SlotSchema;
use crate::metrics::SatisfactionMapping;
use crate::taxonomy::{EmotionLabel, NUM_EMOTIONS};

/// Label proportions of the reference corpus, canonical order. They are
/// rounded and sum to 1.001; sampling treats them as relative weights.
pub const REFERENCE_PROPORTIONS: [f64; NUM_EMOTIONS] = [0.701, 0.210, 0.061, 0.012, 0.010, 0.005, 0.002];

const SLOTS: [&str; 12] = [
    "hotel-area",
    "hotel-price",
    "hotel-stars",
    "hotel-parking",
    "restaurant-area",
    "restaurant-food",
    "restaurant-price",
    "restaurant-time",
    "taxi-departure",
    "taxi-destination",
    "train-day",
    "train-departure",
];

const DOMAINS: [&str; 4] = ["hotel", "restaurant", "taxi", "train"];

const VALUES: [&str; 9] = ["north", "south", "cheap", "4", "yes", "italian", "19:00", "cambridge", "monday"];

pub const DISTRACTORS: [&str; 50] = [
    "i", "need", "a", "the", "to", "for", "in", "on", "at", "is", "it", "that", "can", "you", "me", "book",
    "find", "hotel", "restaurant", "taxi", "train", "table", "room", "ticket", "north", "south", "east",
    "west", "centre", "cheap", "moderate", "expensive", "tonight", "tomorrow", "monday", "friday", "people",
    "two", "three", "four", "stars", "parking", "wifi", "area", "price", "time", "leave", "arrive", "from",
    "number",
];

/// Task requests built from distractor words only.
const USER_TEMPLATES: [&str; 16] = [
    "i need a hotel in the north",
    "book a table for two people",
    "i need a taxi from the centre",
    "can you find me a cheap restaurant",
    "i need a train on monday",
    "book a room for three people",
    "find me a hotel in the west",
    "i need to leave at four",
    "is it expensive",
    "can you book it for tomorrow",
    "the price is moderate",
    "i need a ticket for friday",
    "i need the number",
    "is that in the south",
    "i need parking at the hotel",
    "a train to arrive at two",
];

const SYSTEM_TEMPLATES: [&str; 10] = [
    "i can book that for you",
    "is that in the centre",
    "the price is cheap",
    "it is in the north",
    "i can book a table for two",
    "the train is on friday",
    "the taxi can leave at four",
    "it is in the area",
    "can i find you a room",
    "the number is in the ticket",
];

/// Three cue tokens per emotion, disjoint from each other and from the
/// distractor vocabulary.
pub fn cue_tokens(label: EmotionLabel) -> [&'static str; 3] {
    match label {
        EmotionLabel::Neutral => ["alright", "noted", "proceed"],
        EmotionLabel::Satisfied => ["thanks", "great", "perfect"],
        EmotionLabel::Dissatisfied => ["wrong", "useless", "mistake"],
        EmotionLabel::Excited => ["wonderful", "thrilled", "amazing"],
        EmotionLabel::Apologetic => ["sorry", "apologies", "oops"],
        EmotionLabel::Fearful => ["worried", "scared", "emergency"],
        EmotionLabel::Abusive => ["idiot", "stupid", "moron"],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub dialogues: usize,
    pub proportions: [f64; NUM_EMOTIONS],
    /// Probability that a user turn contains one of its label's cue tokens.
    pub cue_strength: f64,
    /// Unfill a slot right before every dissatisfied turn and fill one right
    /// before every satisfied turn.
    pub state_signal: bool,
    pub min_user_turns: usize,
    pub max_user_turns: usize,
    /// Attach a 1-5 satisfaction rating to every user turn, low for the
    /// emotions mapped to dissatisfaction.
    pub satisfaction_ratings: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 17,
            dialogues: 2000,
            proportions: REFERENCE_PROPORTIONS,
            cue_strength: 0.9,
            state_signal: true,
            min_user_turns: 4,
            max_user_turns: 10,
            satisfaction_ratings: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.proportions.iter().sum();
        if self.proportions.iter().any(|p| !(*p >= 0.0 && p.is_finite())) || total <= 0.0 {
            return Err(Error::Config(format!(
                "class proportions must be nonnegative with a positive sum, got {:?}",
                self.proportions
            )));
        }
        if !(0.0..=1.0).contains(&self.cue_strength) {
            return Err(Error::Config(format!("cue strength {} outside [0, 1]", self.cue_strength)));
        }
        if self.min_user_turns == 0 || self.min_user_turns > self.max_user_turns {
            return Err(Error::Config(format!(
                "invalid user turn range {}..={}",
                self.min_user_turns, self.max_user_turns
            )));
        }
        Ok(())
    }

    pub fn schema() -> SlotSchema {
        SlotSchema::new(SLOTS.iter().map(|s| s.to_string()).collect()).expect("static schema is valid")
    }
}

/// A user utterance for `label`: a task template, with one cue token for
/// `label` at its start or end with probability `cue_strength`.
pub fn synthetic_utterance(label: EmotionLabel, cue_strength: f64, rng: &mut impl Rng) -> String {
    let with_cue = rng.random::<f64>() < cue_strength;
    let mut words: Vec<&str> = USER_TEMPLATES.choose(rng).unwrap().split(' ').collect();
    if with_cue {
        let cue = *cue_tokens(label).choose(rng).unwrap();
        if rng.random::<bool>() {
            words.insert(0, cue);
        } else {
            words.push(cue);
        }
    }
    words.join(" ")
}

fn system_utterance(rng: &mut impl Rng) -> String {
    SYSTEM_TEMPLATES.choose(rng).unwrap().to_string()
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels = WeightedIndex::new(config.proportions).map_err(|e| Error::Config(e.to_string()))?;
    let mapping = SatisfactionMapping::default();
    let dialogues = (0..config.dialogues)
        .map(|i| {
            let n_user = rng.random_range(config.min_user_turns..=config.max_user_turns);
            let emotions: Vec<EmotionLabel> = (0..n_user)
                .map(|_| EmotionLabel::ALL[labels.sample(&mut rng)])
                .collect();
            let states = state_sequence(&emotions, config.state_signal, &mut rng);
            let mut turns = Vec::with_capacity(2 * n_user);
            for (k, (&emotion, state)) in emotions.iter().zip(states).enumerate() {
                if k > 0 {
                    turns.push(Turn::system(system_utterance(&mut rng)));
                }
                let mut turn = Turn::user(synthetic_utterance(emotion, config.cue_strength, &mut rng))
                    .with_emotion(emotion)
                    .with_state(state);
                if config.satisfaction_ratings {
                    let rating = if mapping.is_positive(emotion) {
                        rng.random_range(3..=5)
                    } else {
                        rng.random_range(1..=2)
                    };
                    turn.satisfaction = Some(rating);
                }
                turns.push(turn);
            }
            Dialogue {
                id: format!("synth-{}-{i:05}", config.seed),
                domain: DOMAINS.choose(&mut rng).unwrap().to_string(),
                turns,
                provenance: Some(Provenance {
                    source: "synthetic".into(),
                    confidence: None,
                }),
            }
        })
        .collect();
    Ok(Corpus::new(SynthConfig::schema(), dialogues))
}

/// States after each user turn. The change leading into user turn `k`
/// happens in the state of turn `k - 1`, so both the regular and the
/// shifted context window observe it.
fn state_sequence(
    emotions: &[EmotionLabel],
    state_signal: bool,
    rng: &mut impl Rng,
) -> Vec<BTreeMap<String, String>> {
    let mut filled: BTreeMap<String, String> = BTreeMap::new();
    let mut out = Vec::with_capacity(emotions.len());
    for k in 0..emotions.len() {
        let next = emotions.get(k + 1).copied();
        let unfilled: Vec<&str> = SLOTS.iter().copied().filter(|s| !filled.contains_key(*s)).collect();
        let fill = |filled: &mut BTreeMap<String, String>, rng: &mut dyn rand::RngCore| {
            if let Some(slot) = unfilled.choose(rng) {
                filled.insert(slot.to_string(), VALUES.choose(rng).unwrap().to_string());
            }
        };
        if k == 0 {
            fill(&mut filled, rng);
        } else if state_signal && next == Some(EmotionLabel::Dissatisfied) {
            let keys: Vec<String> = filled.keys().cloned().collect();
            if let Some(slot) = keys.choose(rng) {
                filled.remove(slot);
            }
        } else if state_signal && next == Some(EmotionLabel::Satisfied) {
            fill(&mut filled, rng);
        } else if rng.random::<f64>() < 0.5 {
            fill(&mut filled, rng);
        }
        out.push(filled.clone());
    }
    out
}
