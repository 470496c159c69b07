//! Two ways of growing rare emotion classes.
//!
//! *Context-independent replacement* swaps the final user utterance of a
//! labelled sample for another utterance with the same label. It suits
//! emotions whose wording does not depend on the task flow, such as abuse.
//!
//! *Ensemble selection* scores unlabelled candidate samples with several
//! models and keeps those whose plurality vote is confident enough.
//!
//! A sample here is a dialogue prefix ending at the user turn being
//! classified (see [`Dialogue::prefix_for_user_turn`]).

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Corpus, Dialogue, Provenance, Speaker};
use crate::error::{Error, Result};
use crate::features::Mode;
use crate::losses::ProbVector;
use crate::model::{train, Model, TrainConfig};
use crate::taxonomy::{DistanceMatrix, EmotionLabel, NUM_EMOTIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolUtterance {
    pub text: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementPool {
    pub target: EmotionLabel,
    pub utterances: Vec<PoolUtterance>,
}

impl ReplacementPool {
    pub fn new(target: EmotionLabel, utterances: Vec<PoolUtterance>) -> Self {
        ReplacementPool { target, utterances }
    }

    /// User utterances labelled `target` anywhere in `corpus`, tagged with
    /// `source`.
    pub fn from_corpus(corpus: &Corpus, target: EmotionLabel, source: &str) -> Self {
        let utterances = corpus
            .dialogues
            .iter()
            .flat_map(|d| &d.turns)
            .filter(|t| t.speaker == Speaker::User && t.emotion == Some(target))
            .map(|t| PoolUtterance {
                text: t.text.clone(),
                source: source.to_string(),
            })
            .collect();
        ReplacementPool { target, utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// Prefixes ending at every user turn labelled `label`.
pub fn labelled_samples(corpus: &Corpus, label: EmotionLabel) -> Vec<Dialogue> {
    corpus
        .emotion_samples()
        .into_iter()
        .filter(|(_, e)| *e == label)
        .filter_map(|(r, _)| corpus.dialogues[r.dialogue].prefix_for_user_turn(r.user_turn))
        .collect()
}

/// Prefixes ending at every user turn, labels of the final turn removed.
pub fn unlabelled_candidates(corpus: &Corpus) -> Vec<Dialogue> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        for k in 0..d.user_turn_count() {
            let mut prefix = d.prefix_for_user_turn(k).expect("k is a user turn");
            let last = prefix.turns.last_mut().expect("prefix ends at a user turn");
            last.emotion = None;
            last.satisfaction = None;
            prefix.id = format!("{}#{k}", d.id);
            out.push(prefix);
        }
    }
    out
}

fn final_user_turn(sample: &Dialogue) -> Result<usize> {
    match sample.turns.last() {
        Some(t) if t.speaker == Speaker::User => Ok(sample.turns.len() - 1),
        _ => Err(Error::Data(format!("sample `{}` does not end with a user turn", sample.id))),
    }
}

/// Replaces the final user utterance with one drawn uniformly from `pool`.
/// Everything else, including the label, is kept.
pub fn replace_context_independent(sample: &Dialogue, pool: &ReplacementPool, rng: &mut impl Rng) -> Result<Dialogue> {
    if pool.is_empty() {
        return Err(Error::Data(format!("replacement pool for {} is empty", pool.target)));
    }
    let last = final_user_turn(sample)?;
    let label = sample.turns[last].emotion;
    if label != Some(pool.target) {
        return Err(Error::Data(format!(
            "sample `{}` is labelled {} but the pool targets {}",
            sample.id,
            label.map_or("nothing".to_string(), |l| l.to_string()),
            pool.target
        )));
    }
    let pick = &pool.utterances[rng.random_range(0..pool.len())];
    let mut out = sample.clone();
    out.turns[last].text = pick.text.clone();
    Ok(out)
}

/// Pairs each pool utterance, in order, with one uniformly drawn context
/// from `contexts`, stopping after `cap` samples.
pub fn pair_with_contexts(
    pool: &ReplacementPool,
    contexts: &[Dialogue],
    cap: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Dialogue>> {
    if pool.is_empty() {
        return Err(Error::Data(format!("replacement pool for {} is empty", pool.target)));
    }
    if contexts.is_empty() {
        return Err(Error::Data(format!("no {} contexts to pair with", pool.target)));
    }
    pool.utterances
        .iter()
        .take(cap)
        .enumerate()
        .map(|(i, utt)| {
            let ctx = &contexts[rng.random_range(0..contexts.len())];
            let single = ReplacementPool::new(pool.target, vec![utt.clone()]);
            let mut out = replace_context_independent(ctx, &single, rng)?;
            out.id = format!("{}+ci{i}", ctx.id);
            out.provenance = Some(Provenance {
                source: utt.source.clone(),
                confidence: None,
            });
            Ok(out)
        })
        .collect()
}

/// Anything that assigns emotion probabilities to the final user turn of a
/// sample.
pub trait EmotionScorer: Sync {
    fn score(&self, sample: &Dialogue) -> Result<ProbVector>;
}

impl EmotionScorer for Model {
    fn score(&self, sample: &Dialogue) -> Result<ProbVector> {
        final_user_turn(sample)?;
        let k = sample.user_turn_count() - 1;
        Ok(self.predict(sample, k, Mode::Erc)?.emotion)
    }
}

/// Per-model predictions for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleVote {
    pub votes: Vec<EmotionLabel>,
    pub mean_probs: [f64; NUM_EMOTIONS],
}

impl EnsembleVote {
    /// Each model votes for its argmax label.
    pub fn from_probs(probs: &[ProbVector]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("an ensemble needs at least one model".into()));
        }
        let mut mean_probs = [0.0; NUM_EMOTIONS];
        let mut votes = Vec::with_capacity(probs.len());
        for p in probs {
            if p.len() != NUM_EMOTIONS {
                return Err(Error::ShapeMismatch {
                    what: "ensemble member probabilities",
                    expected: NUM_EMOTIONS,
                    actual: p.len(),
                });
            }
            votes.push(EmotionLabel::ALL[p.argmax()]);
            for (m, v) in mean_probs.iter_mut().zip(p.as_slice()) {
                *m += v;
            }
        }
        let m = probs.len() as f64;
        mean_probs.iter_mut().for_each(|v| *v /= m);
        Ok(EnsembleVote { votes, mean_probs })
    }

    pub fn size(&self) -> usize {
        self.votes.len()
    }

    pub fn counts(&self) -> [usize; NUM_EMOTIONS] {
        let mut c = [0; NUM_EMOTIONS];
        self.votes.iter().for_each(|v| c[v.index()] += 1);
        c
    }

    /// Plurality label with confidence `count / M`. Count ties go to the
    /// higher mean probability; a tie there too leaves no label.
    pub fn decide(&self) -> VoteDecision {
        let counts = self.counts();
        let top = counts.iter().copied().max().unwrap_or(0);
        let tied: Vec<usize> = (0..NUM_EMOTIONS).filter(|&i| counts[i] == top).collect();
        let best = tied.iter().map(|&i| self.mean_probs[i]).fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = tied.into_iter().filter(|&i| self.mean_probs[i] == best).collect();
        VoteDecision {
            label: (winners.len() == 1).then(|| EmotionLabel::ALL[winners[0]]),
            confidence: top as f64 / self.size().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteDecision {
    /// `None` marks an unusable candidate.
    pub label: Option<EmotionLabel>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfidence {
    pub label: Option<EmotionLabel>,
    pub confidence: f64,
    pub mean_probs: [f64; NUM_EMOTIONS],
}

pub fn ensemble_vote<S: EmotionScorer>(candidate: &Dialogue, models: &[S]) -> Result<EnsembleVote> {
    let probs = models.iter().map(|m| m.score(candidate)).collect::<Result<Vec<_>>>()?;
    EnsembleVote::from_probs(&probs)
}

pub fn ensemble_confidence<S: EmotionScorer>(candidate: &Dialogue, models: &[S]) -> Result<EnsembleConfidence> {
    let vote = ensemble_vote(candidate, models)?;
    let d = vote.decide();
    Ok(EnsembleConfidence {
        label: d.label,
        confidence: d.confidence,
        mean_probs: vote.mean_probs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Minimum vote share, inclusive.
    pub theta: f64,
    /// Most samples kept per emotion.
    pub cap: usize,
    pub targets: Vec<EmotionLabel>,
    /// Allowed candidate domains; empty allows all.
    pub domains: Vec<String>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            theta: 0.7,
            cap: 1000,
            targets: vec![EmotionLabel::Fearful, EmotionLabel::Apologetic, EmotionLabel::Excited],
            domains: Vec::new(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta {} outside [0, 1]", self.theta)));
        }
        Ok(())
    }

    fn domain_allowed(&self, domain: &str) -> bool {
        self.domains.is_empty() || self.domains.iter().any(|d| d == domain)
    }
}

/// A candidate accepted by [`select_candidates`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    /// Position in the candidate list.
    pub index: usize,
    pub label: EmotionLabel,
    pub confidence: f64,
    pub mean_prob: f64,
    /// The candidate with its final user turn labelled and provenance set.
    pub sample: Dialogue,
}

/// Per-emotion bookkeeping of a selection run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectionCounts {
    pub kept: usize,
    /// Passed the filters but cut by the cap.
    pub over_cap: usize,
    pub below_theta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Grouped by emotion in label order, each group in rank order.
    pub selected: Vec<Selected>,
    pub counts: [SelectionCounts; NUM_EMOTIONS],
    pub unusable: usize,
    pub filtered_domain: usize,
}

/// Selection from precomputed votes; `votes[i]` belongs to `candidates[i]`.
pub fn select_from_votes(candidates: &[Dialogue], votes: &[EnsembleVote], config: &AugmentConfig) -> Result<Selection> {
    config.validate()?;
    if candidates.len() != votes.len() {
        return Err(Error::ShapeMismatch {
            what: "candidate votes",
            expected: candidates.len(),
            actual: votes.len(),
        });
    }
    let mut counts = [SelectionCounts::default(); NUM_EMOTIONS];
    let mut unusable = 0;
    let mut filtered_domain = 0;
    let mut groups: Vec<Vec<Selected>> = vec![Vec::new(); NUM_EMOTIONS];
    for (index, (cand, vote)) in candidates.iter().zip(votes).enumerate() {
        if !config.domain_allowed(&cand.domain) {
            filtered_domain += 1;
            continue;
        }
        let decision = vote.decide();
        let Some(label) = decision.label else {
            unusable += 1;
            continue;
        };
        if !config.targets.contains(&label) {
            continue;
        }
        if decision.confidence < config.theta {
            counts[label.index()].below_theta += 1;
            continue;
        }
        let last = final_user_turn(cand)?;
        let mut sample = cand.clone();
        sample.turns[last].emotion = Some(label);
        sample.provenance = Some(Provenance {
            source: cand.provenance.as_ref().map_or("ensemble".to_string(), |p| p.source.clone()),
            confidence: Some(decision.confidence),
        });
        groups[label.index()].push(Selected {
            index,
            label,
            confidence: decision.confidence,
            mean_prob: vote.mean_probs[label.index()],
            sample,
        });
    }
    let mut selected = Vec::new();
    for (e, mut group) in groups.into_iter().enumerate() {
        group.sort_by(|a, b| {
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap_or(Ordering::Equal)
                .then(b.mean_prob.partial_cmp(&a.mean_prob).unwrap_or(Ordering::Equal))
                .then(a.index.cmp(&b.index))
        });
        let keep = group.len().min(config.cap);
        counts[e].kept = keep;
        counts[e].over_cap = group.len() - keep;
        group.truncate(keep);
        selected.extend(group);
    }
    Ok(Selection {
        selected,
        counts,
        unusable,
        filtered_domain,
    })
}

/// Scores every candidate with every model, then keeps the confident
/// ones. Scoring runs on all available cores; the result does not depend on
/// the thread count.
pub fn select_candidates<S: EmotionScorer>(
    candidates: &[Dialogue],
    models: &[S],
    config: &AugmentConfig,
) -> Result<Selection> {
    config.validate()?;
    if models.is_empty() {
        return Err(Error::Config("an ensemble needs at least one model".into()));
    }
    let votes = score_all(candidates, models)?;
    select_from_votes(candidates, &votes, config)
}

fn score_all<S: EmotionScorer>(candidates: &[Dialogue], models: &[S]) -> Result<Vec<EnsembleVote>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = candidates.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|c| ensemble_vote(c, models)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(candidates.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread panicked")?);
        }
        Ok(out)
    })
}

/// Corpus with `samples` appended after the existing dialogues.
pub fn append_samples(corpus: &Corpus, samples: impl IntoIterator<Item = Dialogue>) -> Corpus {
    let mut dialogues = corpus.dialogues.clone();
    dialogues.extend(samples);
    corpus.with_dialogues(dialogues)
}

/// `size` models with seeds `base.seed + i` and trunk dropout `dropout`.
pub fn train_ensemble(
    train_set: &Corpus,
    dev: &Corpus,
    base: &TrainConfig,
    size: usize,
    dropout: f64,
    dm: &DistanceMatrix,
) -> Result<Vec<Model>> {
    (0..size as u64)
        .map(|i| {
            let cfg = TrainConfig {
                seed: base.seed.wrapping_add(i),
                dropout,
                ..base.clone()
            };
            Ok(train(train_set, dev, &cfg, dm)?.model)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Turn;
    use crate::features::SlotSchema;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(label: EmotionLabel) -> Dialogue {
        Dialogue {
            id: "s".into(),
            domain: "hotel".into(),
            turns: vec![
                Turn::user("find me a hotel"),
                Turn::system("which area"),
                Turn::user("you are useless").with_emotion(label),
            ],
            provenance: None,
        }
    }

    fn pool(texts: &[&str]) -> ReplacementPool {
        ReplacementPool::new(
            EmotionLabel::Abusive,
            texts
                .iter()
                .map(|t| PoolUtterance {
                    text: t.to_string(),
                    source: "other".into(),
                })
                .collect(),
        )
    }

    fn one_hot(i: usize) -> ProbVector {
        // dyadic values keep the ensemble means exact
        let mut p = vec![0.0625; NUM_EMOTIONS];
        p[i] = 0.625;
        ProbVector::new(p).unwrap()
    }

    #[test]
    fn self_replacement_is_identity() {
        let s = sample(EmotionLabel::Abusive);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = replace_context_independent(&s, &pool(&["you are useless"]), &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn replacement_keeps_context() {
        let s = sample(EmotionLabel::Abusive);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = replace_context_independent(&s, &pool(&["idiot machine", "stupid bot"]), &mut rng).unwrap();
        assert_eq!(out.turns[..2], s.turns[..2]);
        assert_eq!(out.turns[2].emotion, Some(EmotionLabel::Abusive));
        assert_ne!(out.turns[2].text, s.turns[2].text);
    }

    #[test]
    fn replacement_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample(EmotionLabel::Abusive);
        assert!(replace_context_independent(&s, &pool(&[]), &mut rng).is_err());
        let wrong = sample(EmotionLabel::Fearful);
        assert!(replace_context_independent(&wrong, &pool(&["x"]), &mut rng).is_err());
    }

    #[test]
    fn pairing_yields_one_sample_per_utterance_up_to_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = pool(&["a", "b", "c", "d", "e"]);
        let ctx = vec![sample(EmotionLabel::Abusive); 3];
        assert_eq!(pair_with_contexts(&p, &ctx, 1000, &mut rng).unwrap().len(), 5);
        assert_eq!(pair_with_contexts(&p, &ctx, 2, &mut rng).unwrap().len(), 2);
        assert!(pair_with_contexts(&p, &[], 10, &mut rng).is_err());
    }

    #[test]
    fn vote_examples() {
        let fearful = EmotionLabel::Fearful.index();
        let all = EnsembleVote::from_probs(&vec![one_hot(fearful); 10]).unwrap();
        assert_eq!(
            all.decide(),
            VoteDecision {
                label: Some(EmotionLabel::Fearful),
                confidence: 1.0
            }
        );
        let mut probs = vec![one_hot(fearful); 7];
        probs.extend(vec![one_hot(0); 3]);
        let d = EnsembleVote::from_probs(&probs).unwrap().decide();
        assert_eq!(d.label, Some(EmotionLabel::Fearful));
        assert!((d.confidence - 0.7).abs() < 1e-15);

        let mut probs = vec![one_hot(fearful); 5];
        probs.extend(vec![one_hot(EmotionLabel::Excited.index()); 5]);
        assert_eq!(EnsembleVote::from_probs(&probs).unwrap().decide().label, None);
        assert!(EnsembleVote::from_probs(&[]).is_err());
    }

    #[test]
    fn count_tie_broken_by_mean_probability() {
        let mut strong = vec![0.0; NUM_EMOTIONS];
        strong[5] = 0.9;
        strong[0] = 0.1;
        let mut weak = vec![0.0; NUM_EMOTIONS];
        weak[3] = 0.6;
        weak[0] = 0.4;
        let vote = EnsembleVote::from_probs(&[ProbVector::new(strong).unwrap(), ProbVector::new(weak).unwrap()]).unwrap();
        assert_eq!(vote.decide().label, Some(EmotionLabel::Fearful));
    }

    struct Fixed(Vec<ProbVector>);

    impl EmotionScorer for Fixed {
        fn score(&self, sample: &Dialogue) -> Result<ProbVector> {
            let i: usize = sample.id.parse().unwrap();
            Ok(self.0[i].clone())
        }
    }

    #[test]
    fn selection_threshold_cap_and_order() {
        // candidate i gets `votes[i]` fearful votes out of 10, rest neutral
        let votes = [6, 7, 10, 8, 7];
        let candidates: Vec<Dialogue> = (0..votes.len())
            .map(|i| Dialogue {
                id: i.to_string(),
                ..sample(EmotionLabel::Neutral)
            })
            .collect();
        let models: Vec<Fixed> = (0..10)
            .map(|m| {
                Fixed(
                    votes
                        .iter()
                        .map(|&v| one_hot(if m < v { EmotionLabel::Fearful.index() } else { 0 }))
                        .collect(),
                )
            })
            .collect();
        let cfg = AugmentConfig::default();
        let sel = select_candidates(&candidates, &models, &cfg).unwrap();
        let order: Vec<usize> = sel.selected.iter().map(|s| s.index).collect();
        assert_eq!(order, [2, 3, 1, 4]);
        assert_eq!(sel.counts[EmotionLabel::Fearful.index()].below_theta, 1);
        assert!(sel.selected.iter().all(|s| s.sample.turns[2].emotion == Some(EmotionLabel::Fearful)));

        let capped = select_candidates(&candidates, &models, &AugmentConfig { cap: 0, ..cfg.clone() }).unwrap();
        assert!(capped.selected.is_empty());
        let other_domain = AugmentConfig {
            domains: vec!["train".into()],
            ..cfg
        };
        let filtered = select_candidates(&candidates, &models, &other_domain).unwrap();
        assert_eq!(filtered.filtered_domain, 5);
    }

    #[test]
    fn appending_keeps_existing_samples() {
        let schema = SlotSchema::new(vec!["area".into()]).unwrap();
        let corpus = Corpus::new(schema, vec![sample(EmotionLabel::Neutral)]);
        let out = append_samples(&corpus, vec![sample(EmotionLabel::Abusive); 2]);
        assert_eq!(out.dialogues.len(), 3);
        assert_eq!(out.dialogues[0], corpus.dialogues[0]);
    }
}
