//! Compare the distance-weighted loss with cross-entropy on mistakes of
//! different severity.
//!
//! Cross-entropy only looks at the probability of the gold label, so all
//! wrong guesses made with the same confidence cost the same. The
//! distance-weighted loss charges more when the mass sits on a distant
//! emotion.
//!
//! ```text
//! cargo run --example emodist_loss
//! ```

use tod_emotion::losses::{cross_entropy_loss, emo_dist_loss, ProbVector};
use tod_emotion::taxonomy::NUM_EMOTIONS;
use tod_emotion::{DistanceMatrix, EmotionLabel};

fn confident(on: EmotionLabel, mass: f64) -> ProbVector {
    let mut p = vec![(1.0 - mass) / (NUM_EMOTIONS - 1) as f64; NUM_EMOTIONS];
    p[on.index()] = mass;
    ProbVector::new(p).expect("valid distribution")
}

fn main() -> tod_emotion::Result<()> {
    let dm = DistanceMatrix::build();
    let gold = EmotionLabel::Satisfied;
    println!("gold label: {gold}");
    println!("{:<14}{:>10}{:>10}{:>10}", "predicted", "distance", "emodist", "ce");
    for guess in EmotionLabel::ALL {
        let p = confident(guess, 0.8);
        let emo = emo_dist_loss(&p, gold, &dm)?;
        let ce = cross_entropy_loss(&p, gold.index(), false)?;
        println!(
            "{:<14}{:>10.3}{:>10.4}{:>10.4}",
            guess.name(),
            dm.smoothed(gold, guess),
            emo.value,
            ce.value
        );
    }

    let uniform = emo_dist_loss(&ProbVector::uniform(NUM_EMOTIONS), gold, &dm)?;
    println!("\nuniform prediction: {:.6} (= -ln(6/7) for every gold label)", uniform.value);
    Ok(())
}
