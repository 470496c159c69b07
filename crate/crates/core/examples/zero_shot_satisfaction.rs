//! Train an emotion recognizer, then reuse it unchanged to predict user
//! satisfaction before the user speaks.
//!
//! In satisfaction mode the model sees the dialogue only up to the system
//! turn, with the state window shifted back one turn. The predicted emotion
//! is mapped to a binary satisfaction label.
//!
//! ```text
//! cargo run --release --example zero_shot_satisfaction
//! ```

use tod_emotion::cli::{evaluate_emotions, evaluate_satisfaction};
use tod_emotion::data::{generate_synthetic, split_corpus, SynthConfig};
use tod_emotion::features::Mode;
use tod_emotion::metrics::SatisfactionMapping;
use tod_emotion::model::{train, TrainConfig};
use tod_emotion::DistanceMatrix;

fn main() -> tod_emotion::Result<()> {
    let corpus = generate_synthetic(&SynthConfig {
        seed: 3,
        dialogues: 1000,
        ..SynthConfig::default()
    })?;
    let (train_set, dev, test) = split_corpus(&corpus, [0.7, 0.1, 0.2], 3)?;
    let dm = DistanceMatrix::build();
    let model = train(&train_set, &dev, &TrainConfig::default(), &dm)?.model;

    let erc = evaluate_emotions(&model, &test, &dm)?;
    println!("emotion recognition, macro F1 {:.3}", erc.macro_f1);

    let sat = evaluate_satisfaction(&model, &test, &SatisfactionMapping::default())?;
    println!(
        "zero-shot satisfaction on {} turns: negative F1 {:.3}, positive F1 {:.3}",
        sat.samples, sat.negative_f1, sat.positive_f1
    );

    let d = &test.dialogues[0];
    println!("\n{}", d.id);
    for k in 0..d.user_turn_count() {
        let turn = d.user_turn(k).expect("user turn");
        let before = model.predict(d, k, Mode::Satisfaction)?.emotion_label();
        let after = model.predict(d, k, Mode::Erc)?.emotion_label();
        println!(
            "  turn {k}: expected before speaking {before:<12} recognized {after:<12} gold {}",
            turn.emotion.map_or("-".into(), |e| e.to_string())
        );
    }
    Ok(())
}
