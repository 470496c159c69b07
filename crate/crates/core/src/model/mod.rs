//! Multi-head classifier over fused text and dialogue-state features.
//!
//! ```text
//! contextual state --tanh FC--> S ─┐
//! hashed history text ---------> R ─┴─ R ⊕ S --tanh trunk--> h ─┬─ emotion  (7)
//!                                                               ├─ valence  (3)
//!                                                               ├─ elicitor (4)
//!                                                               └─ conduct  (2)
//! ```
//!
//! All weight matrices are stored input-major (`weights[i * out_dim + o]`), so
//! a sparse input touches contiguous rows.

mod adam;
mod backprop;
mod checkpoint;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConstants};
pub use backprop::{objective_and_gradient, objective_value, AspectTargets, Objective};
pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{
    label_distribution, labelled_inputs, train, train_with_progress, EmotionLoss, EpochLog, TrainConfig, TrainOutcome,
};

use crate::data::Dialogue;
use crate::error::{Error, Result};
use crate::features::{
    contextual_state, featurize_text, ContextualStateVector, DialogueHistory, FeaturizerConfig, FusedFeatures, Mode,
    SlotSchema, StateProjection, TextEncoding,
};
use crate::losses::ProbVector;
use crate::taxonomy::{Conduct, Elicitor, EmotionLabel, Valence, NUM_EMOTIONS};

/// Class counts of the emotion, valence, elicitor and conduct heads.
pub const HEAD_SIZES: [usize; 4] = [NUM_EMOTIONS, Valence::COUNT, Elicitor::COUNT, Conduct::COUNT];

/// Fully connected layer, input-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn check(&self, what: &'static str) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::ShapeMismatch {
                what,
                expected: self.in_dim * self.out_dim + self.out_dim,
                actual: self.weights.len() + self.bias.len(),
            });
        }
        Ok(())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.out_dim..(i + 1) * self.out_dim]
    }

    /// `bias + W x` for a dense input.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                axpy(&mut z, *xi, self.row(i));
            }
        }
        z
    }
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub text_dim: usize,
    /// Length of the contextual state vector (three windows of the schema).
    pub state_in: usize,
    pub state_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub projection: StateProjection,
    pub trunk: Dense,
    pub emotion: Dense,
    pub valence: Dense,
    pub elicitor: Dense,
    pub conduct: Dense,
}

impl ModelParameters {
    pub fn zeros(dims: ModelDims) -> Self {
        ModelParameters {
            projection: StateProjection::zeros(dims.state_in, dims.state_dim),
            trunk: Dense::zeros(dims.text_dim + dims.state_dim, dims.hidden),
            emotion: Dense::zeros(dims.hidden, HEAD_SIZES[0]),
            valence: Dense::zeros(dims.hidden, HEAD_SIZES[1]),
            elicitor: Dense::zeros(dims.hidden, HEAD_SIZES[2]),
            conduct: Dense::zeros(dims.hidden, HEAD_SIZES[3]),
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut params = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.iter_mut().for_each(|w| *w = rng.random_range(-limit..limit));
        };
        let p = &mut params.projection;
        fill(&mut p.weights, p.in_dim, p.out_dim);
        for layer in [
            &mut params.trunk,
            &mut params.emotion,
            &mut params.valence,
            &mut params.elicitor,
            &mut params.conduct,
        ] {
            fill(&mut layer.weights, layer.in_dim, layer.out_dim);
        }
        params
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            text_dim: self.trunk.in_dim - self.projection.out_dim,
            state_in: self.projection.in_dim,
            state_dim: self.projection.out_dim,
            hidden: self.trunk.out_dim,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn check(&self) -> Result<()> {
        self.projection.check()?;
        self.trunk.check("trunk")?;
        if self.trunk.in_dim < self.projection.out_dim {
            return Err(Error::ShapeMismatch {
                what: "trunk input",
                expected: self.projection.out_dim,
                actual: self.trunk.in_dim,
            });
        }
        for (head, size, name) in [
            (&self.emotion, HEAD_SIZES[0], "emotion head"),
            (&self.valence, HEAD_SIZES[1], "valence head"),
            (&self.elicitor, HEAD_SIZES[2], "elicitor head"),
            (&self.conduct, HEAD_SIZES[3], "conduct head"),
        ] {
            head.check(name)?;
            if head.in_dim != self.trunk.out_dim || head.out_dim != size {
                return Err(Error::ShapeMismatch {
                    what: name,
                    expected: self.trunk.out_dim * size,
                    actual: head.in_dim * head.out_dim,
                });
            }
        }
        if self.blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(())
    }

    pub(crate) fn heads(&self) -> [&Dense; 4] {
        [&self.emotion, &self.valence, &self.elicitor, &self.conduct]
    }

    pub(crate) fn heads_mut(&mut self) -> [&mut Dense; 4] {
        [&mut self.emotion, &mut self.valence, &mut self.elicitor, &mut self.conduct]
    }

    /// Every parameter block in a fixed order: projection, trunk, then the
    /// four heads, weights before bias.
    pub fn blocks(&self) -> [&[f64]; 12] {
        [
            &self.projection.weights,
            &self.projection.bias,
            &self.trunk.weights,
            &self.trunk.bias,
            &self.emotion.weights,
            &self.emotion.bias,
            &self.valence.weights,
            &self.valence.bias,
            &self.elicitor.weights,
            &self.elicitor.bias,
            &self.conduct.weights,
            &self.conduct.bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.projection.weights,
            &mut self.projection.bias,
            &mut self.trunk.weights,
            &mut self.trunk.bias,
            &mut self.emotion.weights,
            &mut self.emotion.bias,
            &mut self.valence.weights,
            &mut self.valence.bias,
            &mut self.elicitor.weights,
            &mut self.elicitor.bias,
            &mut self.conduct.weights,
            &mut self.conduct.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

/// Pre-projection model input for one user turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub text: TextEncoding,
    pub state: ContextualStateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub emotion: ProbVector,
    pub valence: ProbVector,
    pub elicitor: ProbVector,
    pub conduct: ProbVector,
}

impl PredictionOutput {
    /// Lowest index wins ties.
    pub fn emotion_label(&self) -> EmotionLabel {
        EmotionLabel::ALL[self.emotion.argmax()]
    }

    pub fn argmax(&self) -> [usize; 4] {
        [
            self.emotion.argmax(),
            self.valence.argmax(),
            self.elicitor.argmax(),
            self.conduct.argmax(),
        ]
    }

    fn from_logits(logits: &[Vec<f64>; 4]) -> Result<Self> {
        Ok(PredictionOutput {
            emotion: ProbVector::from_logits(&logits[0])?,
            valence: ProbVector::from_logits(&logits[1])?,
            elicitor: ProbVector::from_logits(&logits[2])?,
            conduct: ProbVector::from_logits(&logits[3])?,
        })
    }
}

/// Trunk and heads applied to already fused features.
pub fn forward(f: &FusedFeatures, params: &ModelParameters) -> Result<PredictionOutput> {
    params.check()?;
    let dims = params.dims();
    if f.text.dim != dims.text_dim || f.state.0.len() != dims.state_dim {
        return Err(Error::ShapeMismatch {
            what: "fused features",
            expected: dims.text_dim + dims.state_dim,
            actual: f.len(),
        });
    }
    let hidden = trunk_hidden(params, &f.text, &f.state.0);
    PredictionOutput::from_logits(&head_logits(params, &hidden))
}

pub(crate) fn trunk_hidden(params: &ModelParameters, text: &TextEncoding, state: &[f64]) -> Vec<f64> {
    let trunk = &params.trunk;
    let mut z = trunk.bias.clone();
    for (i, v) in text.indices.iter().zip(&text.values) {
        axpy(&mut z, *v, trunk.row(*i as usize));
    }
    let offset = text.dim;
    for (j, s) in state.iter().enumerate() {
        axpy(&mut z, *s, trunk.row(offset + j));
    }
    z.iter_mut().for_each(|z| *z = z.tanh());
    z
}

pub(crate) fn head_logits(params: &ModelParameters, hidden: &[f64]) -> [Vec<f64>; 4] {
    params.heads().map(|h| h.apply(hidden))
}

pub(crate) fn state_encoding(params: &ModelParameters, state: &ContextualStateVector, use_state: bool) -> Vec<f64> {
    if !use_state {
        return vec![0.0; params.projection.out_dim];
    }
    let mut s = params.projection.pre_activation(&state.active());
    s.iter_mut().for_each(|s| *s = s.tanh());
    s
}

/// Full inference path from a model input.
pub fn forward_input(params: &ModelParameters, input: &ModelInput, use_state: bool) -> Result<PredictionOutput> {
    let s = state_encoding(params, &input.state, use_state);
    let hidden = trunk_hidden(params, &input.text, &s);
    PredictionOutput::from_logits(&head_logits(params, &hidden))
}

/// A trained classifier with everything needed to featurize raw dialogues.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    pub schema: SlotSchema,
    pub params: ModelParameters,
}

impl Model {
    pub fn new(config: TrainConfig, schema: SlotSchema, seed: u64) -> Self {
        let dims = model_dims(&config, &schema);
        Model {
            params: ModelParameters::init(dims, seed),
            config,
            schema,
        }
    }

    pub fn featurizer(&self) -> &FeaturizerConfig {
        &self.config.featurizer
    }

    pub fn input(&self, dialogue: &Dialogue, user_turn: usize, mode: Mode) -> Result<ModelInput> {
        let states = dialogue.user_state_vectors(&self.schema)?;
        let history = DialogueHistory::from_dialogue(dialogue, user_turn, mode)?;
        Ok(ModelInput {
            text: featurize_text(&history, self.featurizer()),
            state: contextual_state(&states, user_turn, mode, self.schema.len()),
        })
    }

    /// Inputs for every user turn of a dialogue.
    pub fn dialogue_inputs(&self, dialogue: &Dialogue, mode: Mode) -> Result<Vec<ModelInput>> {
        dialogue_inputs(dialogue, &self.schema, self.featurizer(), mode)
    }

    pub fn predict(&self, dialogue: &Dialogue, user_turn: usize, mode: Mode) -> Result<PredictionOutput> {
        let input = self.input(dialogue, user_turn, mode)?;
        forward_input(&self.params, &input, self.config.use_state_features)
    }

    pub fn predict_input(&self, input: &ModelInput) -> Result<PredictionOutput> {
        forward_input(&self.params, input, self.config.use_state_features)
    }
}

pub(crate) fn model_dims(config: &TrainConfig, schema: &SlotSchema) -> ModelDims {
    ModelDims {
        text_dim: config.featurizer.hash_dim,
        state_in: 3 * schema.len(),
        state_dim: config.state_dim,
        hidden: config.hidden,
    }
}

pub fn dialogue_inputs(
    dialogue: &Dialogue,
    schema: &SlotSchema,
    featurizer: &FeaturizerConfig,
    mode: Mode,
) -> Result<Vec<ModelInput>> {
    let states = dialogue.user_state_vectors(schema)?;
    (0..states.len())
        .map(|k| {
            let history = DialogueHistory::from_dialogue(dialogue, k, mode)?;
            Ok(ModelInput {
                text: featurize_text(&history, featurizer),
                state: contextual_state(&states, k, mode, schema.len()),
            })
        })
        .collect()
}

/// Standalone prediction for one user turn.
pub fn predict(dialogue: &Dialogue, user_turn: usize, model: &Model, mode: Mode) -> Result<PredictionOutput> {
    model.predict(dialogue, user_turn, mode)
}
