//! Both augmentation strategies on a small synthetic corpus.
//!
//! Replacement takes abusive utterances from another corpus and drops them
//! into abusive contexts of the training data. Ensemble selection trains a
//! few models with dropout, lets them vote on unlabelled dialogue prefixes
//! and keeps the rare-emotion candidates they agree on.
//!
//! ```text
//! cargo run --release --example augmentation
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tod_emotion::augment::{
    append_samples, labelled_samples, pair_with_contexts, select_candidates, train_ensemble, unlabelled_candidates,
    AugmentConfig, ReplacementPool,
};
use tod_emotion::data::{generate_synthetic, split_corpus, SynthConfig};
use tod_emotion::model::TrainConfig;
use tod_emotion::{DistanceMatrix, EmotionLabel};

fn main() -> tod_emotion::Result<()> {
    let corpus = generate_synthetic(&SynthConfig {
        seed: 5,
        dialogues: 600,
        ..SynthConfig::default()
    })?;
    let (train, dev, _) = split_corpus(&corpus, [0.8, 0.1, 0.1], 5)?;
    let external = generate_synthetic(&SynthConfig {
        seed: 6,
        dialogues: 3000,
        ..SynthConfig::default()
    })?;

    let pool = ReplacementPool::from_corpus(&external, EmotionLabel::Abusive, "external");
    let contexts = labelled_samples(&train, EmotionLabel::Abusive);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let replaced = pair_with_contexts(&pool, &contexts, 1000, &mut rng)?;
    println!(
        "replacement: {} pool utterances over {} abusive contexts -> {} samples",
        pool.len(),
        contexts.len(),
        replaced.len()
    );
    if let Some(s) = replaced.first() {
        println!("  e.g. {:?}", s.turns.last().map(|t| &t.text));
    }

    let dm = DistanceMatrix::build();
    let base = TrainConfig {
        max_epochs: 8,
        ..TrainConfig::default()
    };
    let models = train_ensemble(&train, &dev, &base, 5, 0.3, &dm)?;
    let candidates = unlabelled_candidates(&external.with_dialogues(external.dialogues[..300].to_vec()));
    let config = AugmentConfig {
        theta: 0.8,
        ..AugmentConfig::default()
    };
    let selection = select_candidates(&candidates, &models, &config)?;
    println!(
        "ensemble of {}: {} candidates, {} unusable ties",
        models.len(),
        candidates.len(),
        selection.unusable
    );
    for e in &config.targets {
        let c = selection.counts[e.index()];
        println!("  {e:<12} kept {:>3}, below theta {:>3}, over cap {}", c.kept, c.below_theta, c.over_cap);
    }

    let augmented = append_samples(&train, replaced.into_iter().chain(selection.selected.into_iter().map(|s| s.sample)));
    println!(
        "training set: {} -> {} dialogues",
        train.dialogues.len(),
        augmented.dialogues.len()
    );
    Ok(())
}
