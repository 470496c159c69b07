//! The seven-class emotion label set for task-oriented dialogues.
//!
//! Every emotion is described by an [`AspectProfile`]: the valence of the
//! reaction, what elicited it, and whether it was expressed politely. Distances
//! between emotions are the sum of per-aspect distances, smoothed with
//! `ln(d + 1)` so identical labels stay at zero.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_EMOTIONS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Satisfied,
    Dissatisfied,
    Excited,
    Apologetic,
    Fearful,
    Abusive,
}

impl EmotionLabel {
    /// Canonical ordering. Every vector, matrix and serialized table indexes
    /// emotions in this order.
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Neutral,
        EmotionLabel::Satisfied,
        EmotionLabel::Dissatisfied,
        EmotionLabel::Excited,
        EmotionLabel::Apologetic,
        EmotionLabel::Fearful,
        EmotionLabel::Abusive,
    ];

    /// The six classes macro/weighted averages are taken over.
    pub const NON_NEUTRAL: [EmotionLabel; 6] = [
        EmotionLabel::Satisfied,
        EmotionLabel::Dissatisfied,
        EmotionLabel::Excited,
        EmotionLabel::Apologetic,
        EmotionLabel::Fearful,
        EmotionLabel::Abusive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Satisfied => "satisfied",
            EmotionLabel::Dissatisfied => "dissatisfied",
            EmotionLabel::Excited => "excited",
            EmotionLabel::Apologetic => "apologetic",
            EmotionLabel::Fearful => "fearful",
            EmotionLabel::Abusive => "abusive",
        }
    }

    pub fn profile(self) -> AspectProfile {
        use Conduct::*;
        use Elicitor::*;
        let (valence, elicitor, conduct) = match self {
            EmotionLabel::Neutral => (Valence::Neutral, DontCare, Polite),
            EmotionLabel::Satisfied => (Valence::Positive, Operator, Polite),
            EmotionLabel::Dissatisfied => (Valence::Negative, Operator, Polite),
            EmotionLabel::Excited => (Valence::Positive, EventFact, Polite),
            EmotionLabel::Apologetic => (Valence::Negative, User, Polite),
            EmotionLabel::Fearful => (Valence::Negative, EventFact, Polite),
            EmotionLabel::Abusive => (Valence::Negative, Operator, Impolite),
        };
        AspectProfile {
            valence,
            elicitor,
            conduct,
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::BadLabel {
                label: s.to_string(),
                line: None,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Valence {
    Neutral,
    Positive,
    Negative,
}

impl Valence {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Elicitor {
    DontCare,
    Operator,
    User,
    EventFact,
}

impl Elicitor {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Conduct {
    Polite,
    Impolite,
}

impl Conduct {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AspectProfile {
    pub valence: Valence,
    pub elicitor: Elicitor,
    pub conduct: Conduct,
}

/// Positive and negative are the two poles, neutral sits in the middle.
pub fn aspect_distance_valence(a: Valence, b: Valence) -> f64 {
    use Valence::*;
    match (a, b) {
        _ if a == b => 0.0,
        (Positive, Negative) | (Negative, Positive) => 2.0,
        _ => 1.0,
    }
}

/// "Don't care" sits half a unit from every specific elicitor, which puts any
/// two specific elicitors one unit apart.
pub fn aspect_distance_elicitor(a: Elicitor, b: Elicitor) -> f64 {
    match (a, b) {
        _ if a == b => 0.0,
        (Elicitor::DontCare, _) | (_, Elicitor::DontCare) => 0.5,
        _ => 1.0,
    }
}

pub fn aspect_distance_conduct(a: Conduct, b: Conduct) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Per-pair aspect distance sums (`raw`) and their log-smoothed form.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    raw: [[f64; NUM_EMOTIONS]; NUM_EMOTIONS],
    smoothed: [[f64; NUM_EMOTIONS]; NUM_EMOTIONS],
}

impl DistanceMatrix {
    /// Natural-log smoothing.
    pub fn build() -> Self {
        Self::build_with(f64::ln)
    }

    /// Smoothing with `log_base(raw + 1)`. Only used to check that normalized
    /// loss weights do not depend on the base.
    pub fn build_with_log_base(base: f64) -> Self {
        Self::build_with(|x| x.log(base))
    }

    fn build_with(log: impl Fn(f64) -> f64) -> Self {
        let mut raw = [[0.0; NUM_EMOTIONS]; NUM_EMOTIONS];
        let mut smoothed = [[0.0; NUM_EMOTIONS]; NUM_EMOTIONS];
        for a in EmotionLabel::ALL {
            for b in EmotionLabel::ALL {
                let (pa, pb) = (a.profile(), b.profile());
                let d = aspect_distance_valence(pa.valence, pb.valence)
                    + aspect_distance_elicitor(pa.elicitor, pb.elicitor)
                    + aspect_distance_conduct(pa.conduct, pb.conduct);
                raw[a.index()][b.index()] = d;
                smoothed[a.index()][b.index()] = log(d + 1.0);
            }
        }
        DistanceMatrix { raw, smoothed }
    }

    pub fn raw(&self, a: EmotionLabel, b: EmotionLabel) -> f64 {
        self.raw[a.index()][b.index()]
    }

    pub fn smoothed(&self, a: EmotionLabel, b: EmotionLabel) -> f64 {
        self.smoothed[a.index()][b.index()]
    }

    pub fn smoothed_row(&self, label: EmotionLabel) -> &[f64; NUM_EMOTIONS] {
        &self.smoothed[label.index()]
    }

    pub fn raw_rows(&self) -> &[[f64; NUM_EMOTIONS]; NUM_EMOTIONS] {
        &self.raw
    }

    pub fn smoothed_rows(&self) -> &[[f64; NUM_EMOTIONS]; NUM_EMOTIONS] {
        &self.smoothed
    }

    /// Comma-separated 7x7 table with a header row and a leading label
    /// column, both in canonical label order.
    pub fn to_csv(&self, smoothed: bool) -> String {
        let rows = if smoothed { &self.smoothed } else { &self.raw };
        let mut out = String::from("label");
        for e in EmotionLabel::ALL {
            out.push(',');
            out.push_str(e.name());
        }
        out.push('\n');
        for e in EmotionLabel::ALL {
            out.push_str(e.name());
            for v in rows[e.index()] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, smoothed: bool) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv(smoothed)).map_err(|e| Error::io(path, e))
    }
}

impl Default for DistanceMatrix {
    fn default() -> Self {
        Self::build()
    }
}
