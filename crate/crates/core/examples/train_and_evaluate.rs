//! Generate a synthetic corpus, train with the distance-weighted loss and
//! report held-out scores.
//!
//! ```text
//! cargo run --release --example train_and_evaluate -- [dialogues] [seed]
//! ```

use std::time::Instant;

use tod_emotion::cli::evaluate_emotions;
use tod_emotion::data::{generate_synthetic, split_corpus, SynthConfig};
use tod_emotion::model::{train_with_progress, TrainConfig};
use tod_emotion::DistanceMatrix;

fn main() -> tod_emotion::Result<()> {
    let mut args = std::env::args().skip(1);
    let dialogues = args.next().map_or(2000, |a| a.parse().expect("dialogue count"));
    let seed = args.next().map_or(17, |a| a.parse().expect("seed"));

    let corpus = generate_synthetic(&SynthConfig {
        seed,
        dialogues,
        ..SynthConfig::default()
    })?;
    let (train, dev, test) = split_corpus(&corpus, [0.7, 0.1, 0.2], seed)?;
    println!(
        "{} train / {} dev / {} test dialogues",
        train.dialogues.len(),
        dev.dialogues.len(),
        test.dialogues.len()
    );

    let dm = DistanceMatrix::build();
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train_with_progress(&train, &dev, &config, &dm, |log| {
        println!(
            "epoch {:>2}  loss {:.4}  dev macro F1 {:.3}  ({:.1}s)",
            log.epoch,
            log.train_loss,
            log.dev_macro_f1,
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("best epoch {}", outcome.best_epoch);

    let report = evaluate_emotions(&outcome.model, &test, &dm)?;
    print!("{}", report.grid());
    Ok(())
}
