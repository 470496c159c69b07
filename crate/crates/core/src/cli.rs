//! The `tod-emotion` command line.
//!
//! Values come from flags first, then the optional `--config` TOML file, then
//! built-in defaults. Exit codes: 0 success, 1 usage or configuration error,
//! 2 data error, 3 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{
    append_samples, labelled_samples, pair_with_contexts, select_candidates, unlabelled_candidates, AugmentConfig,
    ReplacementPool,
};
use crate::data::{generate_synthetic, load_corpus, save_corpus, split_corpus, Corpus, Split, SynthConfig};
use crate::error::{Error, Result};
use crate::features::Mode;
use crate::metrics::{binary_f1, map_to_satisfaction, BinaryF1, EvalReport, Satisfaction, SatisfactionMapping};
use crate::model::{train_with_progress, EmotionLoss, Model, TrainConfig};
use crate::taxonomy::{DistanceMatrix, EmotionLabel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tod-emotion", version, about = "Emotion recognition for task-oriented dialogues")]
pub struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled corpus.
    GenSynth(GenSynthArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a predictions file.
    Eval(EvalArgs),
    /// Add augmented samples to a corpus.
    Augment(AugmentArgs),
    /// Print the emotion distance matrix as CSV.
    Distances(DistancesArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Corpus file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dialogues: Option<usize>,
    /// Chance that a labelled user turn carries an emotion cue word.
    #[arg(long)]
    pub cue_strength: Option<f64>,
    /// Leave dialogue states free of emotion-correlated changes.
    #[arg(long)]
    pub no_state_signal: bool,
    /// Also write train/dev/test files into this directory.
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
    /// Train, dev and test shares, comma separated.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split_ratios: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Dev corpus for model selection; without it the lowest training loss wins.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Emotion loss: `emodist` or `ce`.
    #[arg(long)]
    pub loss: Option<EmotionLoss>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub no_state_features: bool,
    /// Per-epoch metrics as JSON lines.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `erc` (default) or `satisfaction`.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Key-value report path; a JSON copy is written next to it.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Tab-separated `gold<TAB>predicted` label pairs, evaluated without a
    /// checkpoint.
    #[arg(long, conflicts_with_all = ["checkpoint", "corpus"])]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    /// Swap utterances from a pool into labelled contexts.
    Replace,
    /// Keep unlabelled candidates an ensemble agrees on.
    Ensemble,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Corpus to extend.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus file whose user turns labelled `--target` form the pool.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value = "abusive")]
    pub target: EmotionLabel,
    /// Corpus file of unlabelled candidate dialogues.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Ensemble member checkpoint; repeat once per model.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Minimum share of members that must agree.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Most samples added per target emotion.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Seed for drawing pool utterances.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated target emotions for ensemble selection.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<EmotionLabel>,
    /// Keep only candidates from these domains.
    #[arg(long, value_delimiter = ',')]
    pub domains: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Unsmoothed distances instead of log-smoothed ones.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub paths: PathsConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) | Error::InvalidProbabilities(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_output<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenSynth(a) => cmd_gen_synth(&a, &config, out),
        Command::Train(a) => cmd_train(&a, &config, out, err),
        Command::Eval(a) => cmd_eval(&a, &config, out),
        Command::Augment(a) => cmd_augment(&a, &config, out),
        Command::Distances(a) => cmd_distances(&a, out),
    }
}

fn required(flag: Option<&PathBuf>, file: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(file)
        .cloned()
        .ok_or_else(|| Error::Config(format!("missing --{name} (or paths.{name} in the config file)")))
}

fn console(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn parse_ratios(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad split ratios `{text}`")))?;
    parts
        .try_into()
        .map_err(|_| Error::Config(format!("split ratios need three values, got `{text}`")))
}

pub fn cmd_gen_synth(a: &GenSynthArgs, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let mut synth = config.synth.clone();
    if let Some(seed) = a.seed {
        synth.seed = seed;
    }
    if let Some(n) = a.dialogues {
        synth.dialogues = n;
    }
    if let Some(c) = a.cue_strength {
        synth.cue_strength = c;
    }
    if a.no_state_signal {
        synth.state_signal = false;
    }
    if a.out.is_none() && a.split_dir.is_none() {
        return Err(Error::Config("gen-synth needs --out or --split-dir".into()));
    }
    let corpus = generate_synthetic(&synth)?;
    if let Some(path) = &a.out {
        save_corpus(&corpus, path)?;
        writeln!(out, "wrote {} dialogues to {}", corpus.dialogues.len(), path.display()).map_err(console)?;
    }
    if let Some(dir) = &a.split_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (train, dev, test) = split_corpus(&corpus, parse_ratios(&a.split_ratios)?, synth.seed)?;
        for (mut part, split, name) in [
            (train, Split::Train, "train"),
            (dev, Split::Dev, "dev"),
            (test, Split::Test, "test"),
        ] {
            part.header.split = Some(split);
            let path = dir.join(format!("{name}.jsonl"));
            save_corpus(&part, &path)?;
            writeln!(out, "wrote {} dialogues to {}", part.dialogues.len(), path.display()).map_err(console)?;
        }
    }
    Ok(())
}

pub fn train_config(a: &TrainArgs, config: &RunConfig) -> TrainConfig {
    let mut t = config.train.clone();
    if let Some(v) = a.loss {
        t.loss = v;
    }
    if let Some(v) = a.alpha {
        t.alpha = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    if let Some(v) = a.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.dropout {
        t.dropout = v;
    }
    if a.no_state_features {
        t.use_state_features = false;
    }
    t
}

pub fn cmd_train(a: &TrainArgs, config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = train_config(a, config);
    cfg.validate()?;
    let corpus_path = required(a.corpus.as_ref(), config.paths.corpus.as_ref(), "corpus")?;
    let checkpoint = required(a.checkpoint.as_ref(), config.paths.checkpoint.as_ref(), "checkpoint")?;
    let train = load_corpus(&corpus_path)?;
    let dev = match a.dev.as_ref().or(config.paths.dev.as_ref()) {
        Some(p) => load_corpus(p)?,
        None => train.with_dialogues(Vec::new()),
    };
    let dm = DistanceMatrix::build();
    let mut lines = Vec::new();
    let outcome = train_with_progress(&train, &dev, &cfg, &dm, |log| {
        let _ = writeln!(
            err,
            "epoch {:>3}  loss {:.5}  dev_macro_f1 {:.4}  emotion_grad {:.3e}  aspect_grad {:.3e}{}",
            log.epoch,
            log.train_loss,
            log.dev_macro_f1,
            log.emotion_grad_norm,
            log.aspect_grad_norm,
            if log.improved { "  *" } else { "" }
        );
        lines.push(serde_json::to_string(log).expect("epoch log serializes"));
    })?;
    outcome.model.save(&checkpoint)?;
    if let Some(path) = &a.log {
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    writeln!(
        out,
        "best epoch {} of {}; checkpoint written to {}",
        outcome.best_epoch,
        outcome.log.len(),
        checkpoint.display()
    )
    .map_err(console)
}

/// `gold<TAB>predicted` lines; blank lines are ignored.
pub fn parse_prediction_pairs(text: &str) -> Result<Vec<(EmotionLabel, EmotionLabel)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut parts = line.split('\t');
            let (Some(g), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `gold<TAB>predicted`".into(),
                });
            };
            let label = |s: &str| {
                s.parse::<EmotionLabel>().map_err(|_| Error::BadLabel {
                    label: s.to_string(),
                    line: Some(i + 1),
                })
            };
            Ok((label(g)?, label(p)?))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SatisfactionReport {
    mode: Mode,
    #[serde(flatten)]
    scores: BinaryF1,
}

fn write_reports(path: &Path, key_value: &str, json: &str) -> Result<()> {
    fs::write(path, key_value).map_err(|e| Error::io(path, e))?;
    let json_path = path.with_extension("json");
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}

/// Zero-shot satisfaction scores of an emotion model on rated user turns.
pub fn evaluate_satisfaction(model: &Model, corpus: &Corpus, mapping: &SatisfactionMapping) -> Result<BinaryF1> {
    let samples = corpus.satisfaction_samples();
    if samples.is_empty() {
        return Err(Error::Data("satisfaction mode needs user turns with satisfaction ratings".into()));
    }
    let mut gold = Vec::with_capacity(samples.len());
    let mut pred = Vec::with_capacity(samples.len());
    for (r, rating) in samples {
        let p = model.predict(&corpus.dialogues[r.dialogue], r.user_turn, Mode::Satisfaction)?;
        gold.push(Satisfaction::from_rating(rating));
        pred.push(map_to_satisfaction(p.emotion_label(), mapping));
    }
    binary_f1(&gold, &pred)
}

/// Emotion report of a model on every labelled user turn.
pub fn evaluate_emotions(model: &Model, corpus: &Corpus, dm: &DistanceMatrix) -> Result<EvalReport> {
    let samples = corpus.emotion_samples();
    if samples.is_empty() {
        return Err(Error::Data("emotion evaluation needs user turns with emotion labels".into()));
    }
    let pairs = samples
        .into_iter()
        .map(|(r, gold)| {
            let p = model.predict(&corpus.dialogues[r.dialogue], r.user_turn, Mode::Erc)?;
            Ok((gold, p.emotion_label()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_pairs(&pairs, dm))
}

pub fn cmd_eval(a: &EvalArgs, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dm = DistanceMatrix::build();
    let mode = a.mode.unwrap_or(config.mode);
    let report_path = a.report.as_ref().or(config.paths.report.as_ref());

    if let Some(path) = &a.predictions {
        if mode != Mode::Erc {
            return Err(Error::Config("--predictions holds emotion labels; use --mode erc".into()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pairs = parse_prediction_pairs(&text)?;
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus(format!("{} has no predictions", path.display())));
        }
        return emit_emotion_report(&EvalReport::from_pairs(&pairs, &dm), report_path, out);
    }

    let checkpoint = required(a.checkpoint.as_ref(), config.paths.checkpoint.as_ref(), "checkpoint")?;
    let corpus_path = required(
        a.corpus.as_ref(),
        config.paths.test.as_ref().or(config.paths.corpus.as_ref()),
        "corpus",
    )?;
    let model = Model::load(&checkpoint)?;
    let corpus = load_corpus(&corpus_path)?;
    if corpus.schema() != &model.schema {
        return Err(Error::Data(format!(
            "{} uses a different slot schema than the checkpoint",
            corpus_path.display()
        )));
    }
    match mode {
        Mode::Erc => emit_emotion_report(&evaluate_emotions(&model, &corpus, &dm)?, report_path, out),
        Mode::Satisfaction => {
            let scores = evaluate_satisfaction(&model, &corpus, &SatisfactionMapping::default())?;
            let kv = format!(
                "mode = satisfaction\nsamples = {}\nnegative_f1 = {:.6}\npositive_f1 = {:.6}\n",
                scores.samples, scores.negative_f1, scores.positive_f1
            );
            write!(out, "{kv}").map_err(console)?;
            if let Some(path) = report_path {
                let json = serde_json::to_string_pretty(&SatisfactionReport { mode, scores })
                    .expect("report serializes");
                write_reports(path, &kv, &json)?;
            }
            Ok(())
        }
    }
}

fn emit_emotion_report(report: &EvalReport, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    write!(out, "{}", report.grid()).map_err(console)?;
    if let Some(path) = path {
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        write_reports(path, &format!("mode = erc\n{}", report.to_key_value()), &json)?;
    }
    Ok(())
}

pub fn augment_config(a: &AugmentArgs, config: &RunConfig) -> AugmentConfig {
    let mut c = config.augment.clone();
    if let Some(v) = a.theta {
        c.theta = v;
    }
    if let Some(v) = a.cap {
        c.cap = v;
    }
    if !a.targets.is_empty() {
        c.targets = a.targets.clone();
    }
    if !a.domains.is_empty() {
        c.domains = a.domains.clone();
    }
    c
}

pub fn cmd_augment(a: &AugmentArgs, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let cfg = augment_config(a, config);
    cfg.validate()?;
    let base_path = a.corpus.as_ref().or(config.paths.corpus.as_ref());
    match a.strategy {
        Strategy::Replace => {
            let base_path = required(base_path, None, "corpus")?;
            let pool_path = a
                .pool
                .as_ref()
                .ok_or_else(|| Error::Config("--strategy replace needs --pool".into()))?;
            let base = load_corpus(&base_path)?;
            let source = pool_path.file_stem().map_or("pool".into(), |s| s.to_string_lossy().into_owned());
            let pool = ReplacementPool::from_corpus(&load_corpus(pool_path)?, a.target, &source);
            let contexts = labelled_samples(&base, a.target);
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(config.train.seed));
            let added = pair_with_contexts(&pool, &contexts, cfg.cap, &mut rng)?;
            writeln!(
                out,
                "{}: kept {} of {} pool utterances over {} contexts",
                a.target,
                added.len(),
                pool.len(),
                contexts.len()
            )
            .map_err(console)?;
            save_corpus(&append_samples(&base, added), &a.out)
        }
        Strategy::Ensemble => {
            if a.checkpoint.is_empty() {
                return Err(Error::Config("--strategy ensemble needs at least one --checkpoint".into()));
            }
            let cand_path = a
                .candidates
                .as_ref()
                .ok_or_else(|| Error::Config("--strategy ensemble needs --candidates".into()))?;
            let models = a.checkpoint.iter().map(Model::load).collect::<Result<Vec<_>>>()?;
            let cand_corpus = load_corpus(cand_path)?;
            if models.iter().any(|m| &m.schema != cand_corpus.schema()) {
                return Err(Error::Data("candidates and checkpoints use different slot schemas".into()));
            }
            let base = match base_path {
                Some(p) => load_corpus(p)?,
                None => cand_corpus.with_dialogues(Vec::new()),
            };
            let candidates = unlabelled_candidates(&cand_corpus);
            let sel = select_candidates(&candidates, &models, &cfg)?;
            for e in &cfg.targets {
                let c = sel.counts[e.index()];
                writeln!(
                    out,
                    "{e}: kept {}, below theta {}, over cap {}",
                    c.kept, c.below_theta, c.over_cap
                )
                .map_err(console)?;
            }
            writeln!(
                out,
                "candidates {}, unusable ties {}, outside domains {}",
                candidates.len(),
                sel.unusable,
                sel.filtered_domain
            )
            .map_err(console)?;
            save_corpus(&append_samples(&base, sel.selected.into_iter().map(|s| s.sample)), &a.out)
        }
    }
}

pub fn cmd_distances(a: &DistancesArgs, out: &mut dyn Write) -> Result<()> {
    let dm = DistanceMatrix::build();
    match &a.out {
        Some(path) => dm.write_csv(path, !a.raw),
        None => write!(out, "{}", dm.to_csv(!a.raw)).map_err(console),
    }
}
