//! Emotion-distance weighted loss, masked softmax cross-entropy and the
//! multi-task combiner.
//!
//! Every loss returns its value together with the gradient with respect to the
//! logits that produced the probability vector, so the model can backpropagate
//! without re-deriving the softmax Jacobian.

use crate::error::{Error, Result};
use crate::taxonomy::{DistanceMatrix, EmotionLabel, NUM_EMOTIONS};

/// Probabilities are clamped to at most `1 - PROB_CLAMP_EPS` before `ln(1 - p)`.
pub const PROB_CLAMP_EPS: f64 = 1e-7;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A validated categorical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
            return Err(Error::InvalidProbabilities(format!("entry {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        Ok(ProbVector(probs))
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric(format!("non-finite logits: {logits:?}")));
        }
        let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
        Ok(ProbVector(out))
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.0.iter().enumerate().skip(1) {
            if *p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_wrt_logits: Vec<f64>,
}

impl LossResult {
    pub fn zero(n: usize) -> Self {
        LossResult {
            value: 0.0,
            grad_wrt_logits: vec![0.0; n],
        }
    }
}

/// Head weighting `alpha` for the emotion loss, `(1 - alpha) / 3` for each
/// aspect loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtlWeights {
    alpha: f64,
}

impl MtlWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(MtlWeights { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `[emotion, valence, elicitor, conduct]`
    pub fn head_weights(&self) -> [f64; 4] {
        let aspect = (1.0 - self.alpha) / 3.0;
        [self.alpha, aspect, aspect, aspect]
    }
}

impl Default for MtlWeights {
    fn default() -> Self {
        MtlWeights { alpha: 0.4 }
    }
}

/// Distance row of `label` normalized to sum to one. The label's own weight
/// is zero.
pub fn emo_dist_weights(label: EmotionLabel, dm: &DistanceMatrix) -> [f64; NUM_EMOTIONS] {
    let row = dm.smoothed_row(label);
    let total: f64 = row.iter().sum();
    let mut w = [0.0; NUM_EMOTIONS];
    for (w, d) in w.iter_mut().zip(row) {
        *w = d / total;
    }
    w
}

/// `-sum_i w_i ln(1 - p_i)` with the weights of [`emo_dist_weights`].
pub fn emo_dist_loss(p: &ProbVector, label: EmotionLabel, dm: &DistanceMatrix) -> Result<LossResult> {
    emo_dist_loss_with_eps(p, label, dm, PROB_CLAMP_EPS)
}

pub fn emo_dist_loss_with_eps(
    p: &ProbVector,
    label: EmotionLabel,
    dm: &DistanceMatrix,
    eps: f64,
) -> Result<LossResult> {
    if p.len() != NUM_EMOTIONS {
        return Err(Error::ShapeMismatch {
            what: "emotion probabilities",
            expected: NUM_EMOTIONS,
            actual: p.len(),
        });
    }
    let w = emo_dist_weights(label, dm);
    let p = p.as_slice();
    let ceiling = 1.0 - eps;
    let mut value = 0.0;
    // dL/dp_i, zero where the clamp is active
    let mut dp = [0.0; NUM_EMOTIONS];
    for i in 0..NUM_EMOTIONS {
        if w[i] == 0.0 {
            continue;
        }
        let clamped = p[i].min(ceiling);
        value -= w[i] * (1.0 - clamped).ln();
        if p[i] < ceiling {
            dp[i] = w[i] / (1.0 - p[i]);
        }
    }
    Ok(LossResult {
        value,
        grad_wrt_logits: softmax_backward(p, &dp),
    })
}

/// Softmax cross-entropy on one head. A masked sample contributes nothing.
pub fn cross_entropy_loss(p: &ProbVector, label_index: usize, mask: bool) -> Result<LossResult> {
    if label_index >= p.len() {
        return Err(Error::LabelOutOfRange {
            index: label_index,
            classes: p.len(),
        });
    }
    if mask {
        return Ok(LossResult::zero(p.len()));
    }
    let probs = p.as_slice();
    let value = -probs[label_index].max(PROB_CLAMP_EPS).ln();
    let mut grad = probs.to_vec();
    grad[label_index] -= 1.0;
    Ok(LossResult {
        value,
        grad_wrt_logits: grad,
    })
}

/// Weighted sum of the four head losses. The gradient is the concatenation
/// `[emotion | valence | elicitor | conduct]` of the scaled head gradients.
pub fn mtl_combine(
    l_emo: &LossResult,
    l_val: &LossResult,
    l_eli: &LossResult,
    l_con: &LossResult,
    w: MtlWeights,
) -> LossResult {
    let weights = w.head_weights();
    let parts = [l_emo, l_val, l_eli, l_con];
    let value = parts.iter().zip(weights).map(|(l, k)| k * l.value).sum();
    let grad_wrt_logits = parts
        .iter()
        .zip(weights)
        .flat_map(|(l, k)| l.grad_wrt_logits.iter().map(move |g| k * g))
        .collect();
    LossResult {
        value,
        grad_wrt_logits,
    }
}

/// Arithmetic mean over samples, applied to values and gradients alike.
pub fn mean_reduce(results: &[LossResult]) -> Option<LossResult> {
    let first = results.first()?;
    let n = results.len() as f64;
    let mut out = LossResult::zero(first.grad_wrt_logits.len());
    for r in results {
        out.value += r.value / n;
        for (o, g) in out.grad_wrt_logits.iter_mut().zip(&r.grad_wrt_logits) {
            *o += g / n;
        }
    }
    Some(out)
}

/// Chain rule through softmax: `dL/dz_k = p_k (g_k - sum_i g_i p_i)`.
fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(p, g)| p * g).sum();
    p.iter().zip(dp).map(|(p, g)| p * (g - inner)).collect()
}
