//! Per-sample objective and its exact gradient with respect to every
//! parameter block.

use super::{axpy, dot, head_logits, state_encoding, trunk_hidden, ModelInput, ModelParameters, PredictionOutput};
use crate::error::{Error, Result};
use crate::losses::{cross_entropy_loss, emo_dist_loss_with_eps, mtl_combine, LossResult, MtlWeights, ProbVector};
use crate::model::train::EmotionLoss;
use crate::taxonomy::{DistanceMatrix, EmotionLabel};

/// Aspect class indices implied by an emotion label. The elicitor target is
/// masked for neutral samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AspectTargets {
    pub valence: usize,
    pub elicitor: usize,
    pub conduct: usize,
    pub mask_elicitor: bool,
}

impl AspectTargets {
    pub fn of(label: EmotionLabel) -> Self {
        let p = label.profile();
        AspectTargets {
            valence: p.valence.index(),
            elicitor: p.elicitor.index(),
            conduct: p.conduct.index(),
            mask_elicitor: label == EmotionLabel::Neutral,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub distances: &'a DistanceMatrix,
    pub weights: MtlWeights,
    pub loss: EmotionLoss,
    pub clamp_eps: f64,
    pub use_state_features: bool,
}

impl Objective<'_> {
    /// Combined loss over the four heads, gradient w.r.t. the concatenated
    /// logits.
    pub fn head_loss(&self, out: &PredictionOutput, label: EmotionLabel) -> Result<LossResult> {
        let t = AspectTargets::of(label);
        let emo = match self.loss {
            EmotionLoss::EmoDist => emo_dist_loss_with_eps(&out.emotion, label, self.distances, self.clamp_eps)?,
            EmotionLoss::CrossEntropy => cross_entropy_loss(&out.emotion, label.index(), false)?,
        };
        let val = cross_entropy_loss(&out.valence, t.valence, false)?;
        let eli = cross_entropy_loss(&out.elicitor, t.elicitor, t.mask_elicitor)?;
        let con = cross_entropy_loss(&out.conduct, t.conduct, false)?;
        Ok(mtl_combine(&emo, &val, &eli, &con, self.weights))
    }
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct Activations {
    pub state: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Hidden after dropout; equal to `hidden` without a mask.
    pub hidden_out: Vec<f64>,
    pub output: PredictionOutput,
}

pub(crate) fn forward_train(
    params: &ModelParameters,
    input: &ModelInput,
    use_state: bool,
    dropout: Option<&[f64]>,
) -> Result<Activations> {
    let state = state_encoding(params, &input.state, use_state);
    let hidden = trunk_hidden(params, &input.text, &state);
    let hidden_out = match dropout {
        Some(mask) => hidden.iter().zip(mask).map(|(h, m)| h * m).collect(),
        None => hidden.clone(),
    };
    let logits = head_logits(params, &hidden_out);
    let output = PredictionOutput {
        emotion: ProbVector::from_logits(&logits[0])?,
        valence: ProbVector::from_logits(&logits[1])?,
        elicitor: ProbVector::from_logits(&logits[2])?,
        conduct: ProbVector::from_logits(&logits[3])?,
    };
    Ok(Activations {
        state,
        hidden,
        hidden_out,
        output,
    })
}

/// Accumulates `scale * dL/dθ` into `grads` given the logit gradient.
pub(crate) fn backward(
    params: &ModelParameters,
    input: &ModelInput,
    acts: &Activations,
    grad_logits: &[f64],
    dropout: Option<&[f64]>,
    use_state: bool,
    scale: f64,
    grads: &mut ModelParameters,
) {
    let hidden_dim = params.trunk.out_dim;
    let mut d_hidden = vec![0.0; hidden_dim];
    let mut offset = 0;
    for (head, g_head) in params.heads().into_iter().zip(grads.heads_mut()) {
        let n = head.out_dim;
        let g: Vec<f64> = grad_logits[offset..offset + n].iter().map(|g| g * scale).collect();
        offset += n;
        for (j, h) in acts.hidden_out.iter().enumerate() {
            if *h != 0.0 {
                axpy(&mut g_head.weights[j * n..(j + 1) * n], *h, &g);
            }
            d_hidden[j] += dot(head.row(j), &g);
        }
        axpy(&mut g_head.bias, 1.0, &g);
    }
    if let Some(mask) = dropout {
        d_hidden.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
    }
    let d_pre: Vec<f64> = d_hidden
        .iter()
        .zip(&acts.hidden)
        .map(|(d, h)| d * (1.0 - h * h))
        .collect();

    let trunk = &params.trunk;
    let g_trunk = &mut grads.trunk;
    for (i, v) in input.text.indices.iter().zip(&input.text.values) {
        let i = *i as usize;
        axpy(&mut g_trunk.weights[i * hidden_dim..(i + 1) * hidden_dim], *v, &d_pre);
    }
    axpy(&mut g_trunk.bias, 1.0, &d_pre);
    if !use_state {
        return;
    }
    let text_dim = input.text.dim;
    let state_dim = acts.state.len();
    let mut d_state_pre = vec![0.0; state_dim];
    for (j, s) in acts.state.iter().enumerate() {
        let r = text_dim + j;
        axpy(&mut g_trunk.weights[r * hidden_dim..(r + 1) * hidden_dim], *s, &d_pre);
        d_state_pre[j] = dot(trunk.row(r), &d_pre) * (1.0 - s * s);
    }
    let g_proj = &mut grads.projection;
    for i in input.state.active() {
        axpy(&mut g_proj.weights[i * state_dim..(i + 1) * state_dim], 1.0, &d_state_pre);
    }
    axpy(&mut g_proj.bias, 1.0, &d_state_pre);
}

fn check_input(params: &ModelParameters, input: &ModelInput) -> Result<()> {
    params.check()?;
    let dims = params.dims();
    if input.text.dim != dims.text_dim || input.state.len() != dims.state_in {
        return Err(Error::ShapeMismatch {
            what: "model input",
            expected: dims.text_dim + dims.state_in,
            actual: input.text.dim + input.state.len(),
        });
    }
    Ok(())
}

/// Training objective of one sample (no dropout).
pub fn objective_value(
    params: &ModelParameters,
    input: &ModelInput,
    label: EmotionLabel,
    objective: &Objective<'_>,
) -> Result<f64> {
    check_input(params, input)?;
    let acts = forward_train(params, input, objective.use_state_features, None)?;
    Ok(objective.head_loss(&acts.output, label)?.value)
}

/// Training objective of one sample and its gradient for every parameter.
pub fn objective_and_gradient(
    params: &ModelParameters,
    input: &ModelInput,
    label: EmotionLabel,
    objective: &Objective<'_>,
) -> Result<(f64, ModelParameters)> {
    check_input(params, input)?;
    let acts = forward_train(params, input, objective.use_state_features, None)?;
    let loss = objective.head_loss(&acts.output, label)?;
    let mut grads = params.zeros_like();
    backward(
        params,
        input,
        &acts,
        &loss.grad_wrt_logits,
        None,
        objective.use_state_features,
        1.0,
        &mut grads,
    );
    Ok((loss.value, grads))
}
