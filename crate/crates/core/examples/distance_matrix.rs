//! Print the aspect profiles, the raw and smoothed emotion distances and the
//! loss weights derived from them.
//!
//! ```text
//! cargo run --example distance_matrix
//! ```

use tod_emotion::losses::emo_dist_weights;
use tod_emotion::{DistanceMatrix, EmotionLabel};

fn main() {
    println!("{:<14}{:<10}{:<11}{}", "emotion", "valence", "elicitor", "conduct");
    for e in EmotionLabel::ALL {
        let p = e.profile();
        println!(
            "{:<14}{:<10}{:<11}{}",
            e.name(),
            format!("{:?}", p.valence),
            format!("{:?}", p.elicitor),
            format!("{:?}", p.conduct)
        );
    }

    let dm = DistanceMatrix::build();
    println!("\nraw distances\n{}", dm.to_csv(false));
    println!("smoothed distances, ln(raw + 1)\n{}", dm.to_csv(true));

    println!("loss weights per gold label");
    for e in EmotionLabel::ALL {
        let w = emo_dist_weights(e, &dm);
        let row: Vec<String> = w.iter().map(|v| format!("{v:.3}")).collect();
        println!("{:<14}{}", e.name(), row.join(" "));
    }
}
