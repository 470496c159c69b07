use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Split};
use crate::error::{Error, Result};

/// Dialogue-level train/dev/test partition. Split sizes are `round(r * n)`
/// for train and dev, the remainder goes to test.
pub fn split_corpus(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let n = corpus.dialogues.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_dev = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let n_test = n - n_train - n_dev;
    if n >= 3 && (n_train == 0 || n_dev == 0 || n_test == 0) {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} leave an empty split for {n} dialogues"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let part = |idx: &[usize], split: Split| {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let mut c = corpus.with_dialogues(sorted.iter().map(|&i| corpus.dialogues[i].clone()).collect());
        c.header.split = Some(split);
        c
    };
    Ok((
        part(&order[..n_train], Split::Train),
        part(&order[n_train..n_train + n_dev], Split::Dev),
        part(&order[n_train + n_dev..], Split::Test),
    ))
}
