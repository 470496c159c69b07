//! Train the same corpus with and without the distance-weighted loss and
//! the dialogue-state features, and compare per-class scores.
//!
//! ```text
//! cargo run --release --example ablation -- [seed]
//! ```

use tod_emotion::cli::evaluate_emotions;
use tod_emotion::data::{generate_synthetic, split_corpus, SynthConfig};
use tod_emotion::metrics::EvalReport;
use tod_emotion::model::{train, EmotionLoss, TrainConfig};
use tod_emotion::{DistanceMatrix, EmotionLabel};

fn main() -> tod_emotion::Result<()> {
    let seed = std::env::args().nth(1).map_or(17, |a| a.parse().expect("seed"));
    let corpus = generate_synthetic(&SynthConfig::default())?;
    let (train_set, dev, test) = split_corpus(&corpus, [0.7, 0.1, 0.2], 17)?;
    let dm = DistanceMatrix::build();
    let base = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let variants = [
        ("full", base.clone()),
        (
            "ce loss",
            TrainConfig {
                loss: EmotionLoss::CrossEntropy,
                ..base.clone()
            },
        ),
        (
            "no state",
            TrainConfig {
                use_state_features: false,
                ..base.clone()
            },
        ),
    ];
    let mut reports: Vec<(&str, EvalReport)> = Vec::new();
    for (name, config) in variants {
        let model = train(&train_set, &dev, &config, &dm)?.model;
        reports.push((name, evaluate_emotions(&model, &test, &dm)?));
        eprintln!("trained {name}");
    }

    print!("{:<14}", "F1 / AED");
    for (name, _) in &reports {
        print!("{name:>18}");
    }
    println!();
    for e in EmotionLabel::NON_NEUTRAL {
        print!("{:<14}", e.name());
        for (_, r) in &reports {
            let c = r.class(e);
            print!("{:>10.3}{:>8}", c.f1, c.aed.map_or("-".into(), |a| format!("{a:.3}")));
        }
        println!();
    }
    print!("{:<14}", "macro");
    for (_, r) in &reports {
        print!("{:>10.3}{:>8}", r.macro_f1, r.macro_aed.map_or("-".into(), |a| format!("{a:.3}")));
    }
    println!();
    Ok(())
}
