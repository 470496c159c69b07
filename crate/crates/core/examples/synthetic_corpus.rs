//! Generate a synthetic corpus, save it as JSON lines and show what it
//! contains.
//!
//! ```text
//! cargo run --example synthetic_corpus -- [out.jsonl] [dialogues] [seed]
//! ```

use tod_emotion::data::{generate_synthetic, load_corpus, save_corpus, SynthConfig};
use tod_emotion::taxonomy::NUM_EMOTIONS;
use tod_emotion::EmotionLabel;

fn main() -> tod_emotion::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic.jsonl".into());
    let dialogues = args.next().map_or(500, |a| a.parse().expect("dialogue count"));
    let seed = args.next().map_or(17, |a| a.parse().expect("seed"));

    let config = SynthConfig {
        seed,
        dialogues,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic(&config)?;
    save_corpus(&corpus, &out)?;
    let reloaded = load_corpus(&out)?;
    assert_eq!(reloaded, corpus);
    println!("wrote {} dialogues to {out}", corpus.dialogues.len());

    let mut counts = [0usize; NUM_EMOTIONS];
    for (_, e) in corpus.emotion_samples() {
        counts[e.index()] += 1;
    }
    let total: usize = counts.iter().sum();
    println!("{total} labelled user turns");
    for e in EmotionLabel::ALL {
        let n = counts[e.index()];
        println!("  {:<14}{n:>6}  {:>5.1}%", e.name(), 100.0 * n as f64 / total as f64);
    }

    let d = &corpus.dialogues[0];
    println!("\n{} ({})", d.id, d.domain);
    for t in &d.turns {
        let label = t.emotion.map_or(String::new(), |e| format!("  [{e}]"));
        let filled = t.state.as_ref().map_or(0, |s| s.len());
        println!("  {}: {}{label}  ({filled} slots filled)", t.speaker.tag(), t.text);
    }
    Ok(())
}
