//! Emotion recognition for task-oriented dialogues.
//!
//! The crate covers the whole experiment loop:
//!
//! - [`taxonomy`]: seven emotions defined by valence, elicitor and conduct,
//!   and the distance matrix derived from them.
//! - [`losses`]: the distance-weighted emotion loss, masked cross-entropy and
//!   the multi-task combination, each with analytic gradients.
//! - [`features`]: hashed history text and dialogue-state windows.
//! - [`model`]: a shared trunk with emotion and aspect heads, trained with
//!   Adam and dev-set early stopping.
//! - [`augment`]: utterance replacement and ensemble-vote selection.
//! - [`metrics`]: per-class, macro and weighted F1, average emotion distance
//!   and zero-shot satisfaction scores.
//! - [`data`]: the corpus file format, a synthetic corpus generator and
//!   dialogue-level splits.
//! - [`cli`]: the `tod-emotion` command line.

pub mod augment;
pub mod cli;
pub mod data;
pub mod error;
pub mod features;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod taxonomy;

pub use error::{Error, Result};
pub use taxonomy::{DistanceMatrix, EmotionLabel};
