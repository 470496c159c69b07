//! Evaluation: per-class precision/recall/F1, macro and weighted F1 over the
//! non-neutral classes, average emotion distance (AED) and binary satisfaction
//! F1 through an emotion-to-satisfaction mapping.
//!
//! Zero denominators yield a score of 0. Macro averages run over the
//! non-neutral classes present in either the gold labels or the predictions;
//! weighted averages use gold support as weights.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{DistanceMatrix, EmotionLabel, Valence, NUM_EMOTIONS};

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_EMOTIONS]; NUM_EMOTIONS],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (EmotionLabel, EmotionLabel)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (gold, pred) in pairs {
            cm.add(gold, pred);
        }
        cm
    }

    pub fn add(&mut self, gold: EmotionLabel, pred: EmotionLabel) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    /// Sum of two shards.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, e: EmotionLabel) -> u64 {
        self.counts[e.index()].iter().sum()
    }

    pub fn predicted(&self, e: EmotionLabel) -> u64 {
        self.counts.iter().map(|row| row[e.index()]).sum()
    }

    pub fn correct(&self, e: EmotionLabel) -> u64 {
        self.counts[e.index()][e.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: [ClassF1; NUM_EMOTIONS],
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_scores(cm: &ConfusionMatrix) -> F1Report {
    let per_class = EmotionLabel::ALL.map(|e| {
        let precision = ratio(cm.correct(e), cm.predicted(e));
        let recall = ratio(cm.correct(e), cm.support(e));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassF1 { precision, recall, f1 }
    });

    let present: Vec<EmotionLabel> = EmotionLabel::NON_NEUTRAL
        .into_iter()
        .filter(|e| cm.support(*e) > 0 || cm.predicted(*e) > 0)
        .collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|e| per_class[e.index()].f1).sum::<f64>() / present.len() as f64
    };
    let support: u64 = EmotionLabel::NON_NEUTRAL.iter().map(|e| cm.support(*e)).sum();
    let weighted_f1 = if support == 0 {
        0.0
    } else {
        EmotionLabel::NON_NEUTRAL
            .iter()
            .map(|e| cm.support(*e) as f64 * per_class[e.index()].f1)
            .sum::<f64>()
            / support as f64
    };
    F1Report {
        per_class,
        macro_f1,
        weighted_f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AedReport {
    /// `None` for classes without gold samples.
    pub per_class: [Option<f64>; NUM_EMOTIONS],
    /// Over non-neutral classes with gold samples.
    pub macro_aed: Option<f64>,
    pub weighted_aed: Option<f64>,
}

/// Mean smoothed distance from the gold label to the prediction, per gold
/// class. Lower is better.
pub fn aed(cm: &ConfusionMatrix, dm: &DistanceMatrix) -> AedReport {
    let per_class = EmotionLabel::ALL.map(|gold| {
        let support = cm.support(gold);
        (support > 0).then(|| {
            EmotionLabel::ALL
                .iter()
                .map(|pred| cm.counts[gold.index()][pred.index()] as f64 * dm.smoothed(gold, *pred))
                .sum::<f64>()
                / support as f64
        })
    });
    let present: Vec<(EmotionLabel, f64)> = EmotionLabel::NON_NEUTRAL
        .iter()
        .filter_map(|e| per_class[e.index()].map(|a| (*e, a)))
        .collect();
    let macro_aed = (!present.is_empty()).then(|| present.iter().map(|(_, a)| a).sum::<f64>() / present.len() as f64);
    let support: u64 = present.iter().map(|(e, _)| cm.support(*e)).sum();
    let weighted_aed = (support > 0).then(|| {
        present
            .iter()
            .map(|(e, a)| cm.support(*e) as f64 * a)
            .sum::<f64>()
            / support as f64
    });
    AedReport {
        per_class,
        macro_aed,
        weighted_aed,
    }
}

pub fn aed_from_pairs(pairs: &[(EmotionLabel, EmotionLabel)], dm: &DistanceMatrix) -> AedReport {
    aed(&ConfusionMatrix::from_pairs(pairs.iter().copied()), dm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: EmotionLabel,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub aed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: u64,
    pub classes: Vec<ClassReport>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub macro_aed: Option<f64>,
    pub weighted_aed: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix, dm: &DistanceMatrix) -> Self {
        let f1 = f1_scores(&cm);
        let aed = aed(&cm, dm);
        let classes = EmotionLabel::ALL
            .iter()
            .map(|e| {
                let s = f1.per_class[e.index()];
                ClassReport {
                    label: *e,
                    support: cm.support(*e),
                    predicted: cm.predicted(*e),
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                    aed: aed.per_class[e.index()],
                }
            })
            .collect();
        EvalReport {
            samples: cm.total(),
            classes,
            macro_f1: f1.macro_f1,
            weighted_f1: f1.weighted_f1,
            macro_aed: aed.macro_aed,
            weighted_aed: aed.weighted_aed,
            confusion: cm,
        }
    }

    pub fn from_pairs(pairs: &[(EmotionLabel, EmotionLabel)], dm: &DistanceMatrix) -> Self {
        Self::from_confusion(ConfusionMatrix::from_pairs(pairs.iter().copied()), dm)
    }

    pub fn class(&self, e: EmotionLabel) -> &ClassReport {
        &self.classes[e.index()]
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or("na".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(out, "samples = {}", self.samples);
        for c in &self.classes {
            let n = c.label.name();
            let _ = writeln!(out, "support.{n} = {}", c.support);
            let _ = writeln!(out, "predicted.{n} = {}", c.predicted);
            let _ = writeln!(out, "precision.{n} = {:.6}", c.precision);
            let _ = writeln!(out, "recall.{n} = {:.6}", c.recall);
            let _ = writeln!(out, "f1.{n} = {:.6}", c.f1);
            let _ = writeln!(out, "aed.{n} = {}", opt(c.aed));
        }
        let _ = writeln!(out, "macro_f1 = {:.6}", self.macro_f1);
        let _ = writeln!(out, "weighted_f1 = {:.6}", self.weighted_f1);
        let _ = writeln!(out, "macro_aed = {}", opt(self.macro_aed));
        let _ = writeln!(out, "weighted_aed = {}", opt(self.weighted_aed));
        out
    }

    /// Classes as rows with F1 and AED columns, averages at the bottom.
    pub fn grid(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>8}{:>8}{:>8}", "emotion", "support", "F1", "AED");
        for c in &self.classes {
            let aed = c.aed.map_or("-".to_string(), |a| format!("{a:.3}"));
            let _ = writeln!(out, "{:<14}{:>8}{:>8.3}{:>8}", c.label.name(), c.support, c.f1, aed);
        }
        let avg = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{a:.3}"));
        let _ = writeln!(out, "{:<14}{:>8}{:>8.3}{:>8}", "macro", "", self.macro_f1, avg(self.macro_aed));
        let _ = writeln!(out, "{:<14}{:>8}{:>8.3}{:>8}", "weighted", "", self.weighted_f1, avg(self.weighted_aed));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Satisfaction {
    Positive,
    Negative,
}

impl Satisfaction {
    /// Ratings 1-2 are negative, 3-5 positive.
    pub fn from_rating(rating: u8) -> Self {
        if rating <= 2 {
            Satisfaction::Negative
        } else {
            Satisfaction::Positive
        }
    }
}

/// Emotion to binary satisfaction. The default sends negative-valence
/// emotions to `Negative`, except apologetic (the user blames themself),
/// and neutral to `Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfactionMapping {
    positive: [bool; NUM_EMOTIONS],
}

impl SatisfactionMapping {
    pub fn new(positive: [bool; NUM_EMOTIONS]) -> Self {
        SatisfactionMapping { positive }
    }

    pub fn is_positive(&self, e: EmotionLabel) -> bool {
        self.positive[e.index()]
    }
}

impl Default for SatisfactionMapping {
    fn default() -> Self {
        SatisfactionMapping {
            positive: EmotionLabel::ALL
                .map(|e| e.profile().valence != Valence::Negative || e == EmotionLabel::Apologetic),
        }
    }
}

pub fn map_to_satisfaction(pred: EmotionLabel, mapping: &SatisfactionMapping) -> Satisfaction {
    if mapping.is_positive(pred) {
        Satisfaction::Positive
    } else {
        Satisfaction::Negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryF1 {
    /// Dissatisfaction detection; the headline number.
    pub negative_f1: f64,
    pub positive_f1: f64,
    pub samples: usize,
}

pub fn binary_f1(gold: &[Satisfaction], pred: &[Satisfaction]) -> Result<BinaryF1> {
    if gold.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            what: "satisfaction predictions",
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    let f1_for = |class: Satisfaction| {
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == class && **p == class).count() as u64;
        let predicted = pred.iter().filter(|p| **p == class).count() as u64;
        let support = gold.iter().filter(|g| **g == class).count() as u64;
        let (p, r) = (ratio(tp, predicted), ratio(tp, support));
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    };
    Ok(BinaryF1 {
        negative_f1: f1_for(Satisfaction::Negative),
        positive_f1: f1_for(Satisfaction::Positive),
        samples: gold.len(),
    })
}
