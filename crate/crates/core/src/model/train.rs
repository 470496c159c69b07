use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConstants};
use super::backprop::{backward, forward_train, Objective};
use super::{dialogue_inputs, forward_input, Model, ModelInput, ModelParameters};
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::features::{FeaturizerConfig, Mode, SlotSchema};
use crate::losses::{MtlWeights, PROB_CLAMP_EPS};
use crate::metrics::EvalReport;
use crate::taxonomy::{DistanceMatrix, EmotionLabel, NUM_EMOTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum EmotionLoss {
    /// Distance-weighted penalty on probability mass given to wrong labels.
    #[default]
    #[serde(rename = "emodist")]
    EmoDist,
    #[serde(rename = "ce")]
    CrossEntropy,
}

impl fmt::Display for EmotionLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmotionLoss::EmoDist => "emodist",
            EmotionLoss::CrossEntropy => "ce",
        })
    }
}

impl FromStr for EmotionLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "emodist" => Ok(EmotionLoss::EmoDist),
            "ce" | "cross-entropy" => Ok(EmotionLoss::CrossEntropy),
            _ => Err(Error::Config(format!("unknown loss `{s}` (expected emodist or ce)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the emotion head; each aspect head gets `(1 - alpha) / 3`.
    pub alpha: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub hidden: usize,
    pub state_dim: usize,
    pub clamp_eps: f64,
    pub loss: EmotionLoss,
    /// Drop probability on the trunk output during training.
    pub dropout: f64,
    pub use_state_features: bool,
    /// Decoupled weight decay on weight matrices.
    pub weight_decay: f64,
    pub optimizer: AdamConstants,
    pub featurizer: FeaturizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.4,
            seed: 0,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            hidden: 128,
            state_dim: 256,
            clamp_eps: PROB_CLAMP_EPS,
            loss: EmotionLoss::EmoDist,
            dropout: 0.0,
            use_state_features: true,
            weight_decay: 0.0,
            optimizer: AdamConstants::default(),
            featurizer: FeaturizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        MtlWeights::new(self.alpha)?;
        self.featurizer.validate()?;
        let positive = [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("hidden", self.hidden),
            ("state_dim", self.state_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.learning_rate * self.weight_decay < 1.0) {
            return Err(Error::Config(format!("weight decay {} out of range", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 1.0) {
            return Err(Error::Config(format!("clamp epsilon {} outside (0, 1)", self.clamp_eps)));
        }
        let o = self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || o.epsilon <= 0.0 {
            return Err(Error::Config("optimizer constants out of range".into()));
        }
        Ok(())
    }

    pub fn mtl_weights(&self) -> Result<MtlWeights> {
        MtlWeights::new(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Macro F1 over non-neutral classes; NaN without a dev set.
    pub dev_macro_f1: f64,
    /// Norm of the emotion-head parameter gradients, summed over batches in
    /// quadrature.
    pub emotion_grad_norm: f64,
    /// Same for the valence, elicitor and conduct heads together.
    pub aspect_grad_norm: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best epoch.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Model inputs for every emotion-labelled user turn.
pub fn labelled_inputs(
    corpus: &Corpus,
    schema: &SlotSchema,
    featurizer: &FeaturizerConfig,
) -> Result<Vec<(ModelInput, EmotionLabel)>> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        let inputs = dialogue_inputs(d, schema, featurizer, Mode::Erc)?;
        let labels = d.user_turn_positions().into_iter().map(|p| d.turns[p].emotion);
        out.extend(inputs.into_iter().zip(labels).filter_map(|(x, e)| Some((x, e?))));
    }
    Ok(out)
}

pub(crate) fn dev_macro_f1(
    params: &ModelParameters,
    samples: &[(ModelInput, EmotionLabel)],
    use_state: bool,
    dm: &DistanceMatrix,
) -> Result<f64> {
    let pairs = samples
        .iter()
        .map(|(x, gold)| Ok((*gold, forward_input(params, x, use_state)?.emotion_label())))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_pairs(&pairs, dm).macro_f1)
}

/// Trains on the labelled user turns of `train`, keeping the parameters with
/// the best dev macro F1. With an empty dev set the lowest training loss is
/// kept instead.
pub fn train(train: &Corpus, dev: &Corpus, config: &TrainConfig, dm: &DistanceMatrix) -> Result<TrainOutcome> {
    train_with_progress(train, dev, config, dm, |_| {})
}

pub fn train_with_progress(
    train: &Corpus,
    dev: &Corpus,
    config: &TrainConfig,
    dm: &DistanceMatrix,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let schema = train.schema().clone();
    if dev.schema() != &schema {
        return Err(Error::Data("train and dev corpora use different slot schemas".into()));
    }
    let train_set = labelled_inputs(train, &schema, &config.featurizer)?;
    if train_set.is_empty() {
        return Err(Error::EmptyCorpus("training corpus has no labelled user turns".into()));
    }
    let dev_set = labelled_inputs(dev, &schema, &config.featurizer)?;

    let objective = Objective {
        distances: dm,
        weights: config.mtl_weights()?,
        loss: config.loss,
        clamp_eps: config.clamp_eps,
        use_state_features: config.use_state_features,
    };
    let mut model = Model::new(config.clone(), schema, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_da7a);
    let mut adam = Adam::new(&model.params, config.learning_rate, config.optimizer);
    adam.weight_decay = config.weight_decay;
    let mut grads = model.params.zeros_like();
    let keep = 1.0 - config.dropout;
    let hidden = config.hidden;
    let mut mask = vec![1.0; hidden];

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ModelParameters, usize)> = None;
    let mut log = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let (mut emo_sq, mut aspect_sq) = (0.0, 0.0);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grads.blocks_mut().into_iter().for_each(|g| g.fill(0.0));
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (input, label) = &train_set[i];
                let dropout = if config.dropout > 0.0 {
                    mask.iter_mut()
                        .for_each(|m| *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                    Some(mask.as_slice())
                } else {
                    None
                };
                let acts = forward_train(&model.params, input, config.use_state_features, dropout)?;
                let loss = objective.head_loss(&acts.output, *label)?;
                if !loss.value.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, batch {}", b + 1)));
                }
                loss_sum += loss.value;
                backward(
                    &model.params,
                    input,
                    &acts,
                    &loss.grad_wrt_logits,
                    dropout,
                    config.use_state_features,
                    scale,
                    &mut grads,
                );
            }
            let sq = |v: &[f64]| v.iter().map(|g| g * g).sum::<f64>();
            emo_sq += sq(&grads.emotion.weights) + sq(&grads.emotion.bias);
            for head in [&grads.valence, &grads.elicitor, &grads.conduct] {
                aspect_sq += sq(&head.weights) + sq(&head.bias);
            }
            adam.update(&mut model.params, &grads);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (score, dev_macro_f1) = if dev_set.is_empty() {
            (-train_loss, f64::NAN)
        } else {
            let f1 = dev_macro_f1(&model.params, &dev_set, config.use_state_features, dm)?;
            (f1, f1)
        };
        let improved = best.as_ref().is_none_or(|(s, _, _)| score > *s);
        if improved {
            best = Some((score, model.params.clone(), epoch));
        }
        let entry = EpochLog {
            epoch,
            train_loss,
            dev_macro_f1,
            emotion_grad_norm: emo_sq.sqrt(),
            aspect_grad_norm: aspect_sq.sqrt(),
            improved,
        };
        progress(&entry);
        log.push(entry);
        let best_epoch = best.as_ref().map_or(epoch, |b| b.2);
        if epoch - best_epoch >= config.patience && epoch < config.max_epochs {
            stopped_early = true;
            break;
        }
    }

    let (_, params, best_epoch) = best.expect("at least one epoch runs");
    model.params = params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        stopped_early,
    })
}

/// Share of labelled samples per emotion.
pub fn label_distribution(samples: &[(ModelInput, EmotionLabel)]) -> [f64; NUM_EMOTIONS] {
    let mut out = [0.0; NUM_EMOTIONS];
    for (_, e) in samples {
        out[e.index()] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}
