use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use miad_core::atomic::write_atomic;
use miad_core::corpus::{
    align_span, build_embeddings, dataset_stats, parse_semeval_xml, reference_counts, render_stats_csv, render_stats_table, tokenize,
    Domain, ParsedSplit, SentenceRecord, Split, Vocabulary,
};
use miad_core::evaluation::{evaluate, render_report, render_report_csv, EvalReport};
use miad_core::model::{predict_sentence, EncodedAspect, EncodedSentence, Variant};
use miad_core::training::{encode_all, load_checkpoint, parse_config_text, train, TrainConfig, TrainError};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => CliError::Usage(c.to_string()),
            TrainError::Diverged { .. } => CliError::Diverged(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "miad", version, about = "Aspect-level sentiment classification with gated inter-aspect fusion and focal loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print per-class single/multi-aspect counts and compare to published counts.
    Stats(StatsArgs),
    /// Train one variant and write a checkpoint, training log and config.
    Train(TrainCmd),
    /// Evaluate a checkpoint on a test file.
    Eval(EvalArgs),
    /// Predict polarities for given aspect spans of a raw sentence.
    Predict(PredictArgs),
    /// Train and evaluate all five variants over a list of seeds.
    Ablation(AblationArgs),
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    train_xml: Option<PathBuf>,
    #[arg(long)]
    test_xml: Option<PathBuf>,
    #[arg(long, default_value = "restaurant")]
    domain: Domain,
    /// Directory for stats.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Hyperparameters. Flags override `--config`, which overrides built-in defaults.
#[derive(Args, Debug, Default, Clone)]
struct HyperArgs {
    /// key=value file with any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// restaurant or laptop [default: restaurant]
    #[arg(long)]
    domain: Option<String>,
    /// Focusing parameter [default: 2.0 for focal variants, 0 otherwise]
    #[arg(long)]
    gamma: Option<f64>,
    /// Neighbor loss weight [default: 0.4 restaurant, 0.2 laptop for neighbor-aware variants, 0 otherwise]
    #[arg(long)]
    lambda: Option<f64>,
    /// Adam learning rate [default: 0.01]
    #[arg(long)]
    lr: Option<f64>,
    /// Per-direction GRU size [default: 150; no published value]
    #[arg(long)]
    hidden: Option<usize>,
    /// Sentences per batch [default: 32; no published value]
    #[arg(long)]
    batch: Option<usize>,
    /// Maximum epochs [default: 30; no published value]
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stop patience in epochs, 0 disables [default: 5; no published value]
    #[arg(long)]
    patience: Option<usize>,
    /// Fraction of training sentences held out for model selection [default: 0.1; no published value]
    #[arg(long)]
    dev_fraction: Option<f64>,
    /// neighbors or include-target [default: neighbors]
    #[arg(long)]
    gate_reading: Option<String>,
    /// Keep the embedding matrix fixed [default: false]
    #[arg(long)]
    freeze_embeddings: bool,
}

impl HyperArgs {
    /// Config-file pairs followed by flag pairs.
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            pairs = parse_config_text(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        push("domain", self.domain.clone());
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("hidden", self.hidden.map(|v| v.to_string()));
        push("batch", self.batch.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("dev_fraction", self.dev_fraction.map(|v| v.to_string()));
        push("gate_reading", self.gate_reading.clone());
        if self.freeze_embeddings {
            push("freeze_embeddings", Some("true".into()));
        }
        Ok(pairs)
    }
}

fn build_config(base: &[(String, String)], extra: &[(&str, String)]) -> Result<TrainConfig> {
    let mut pairs = base.to_vec();
    pairs.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    TrainConfig::from_pairs(&pairs).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    train_xml: PathBuf,
    /// Whitespace-separated `token v1 .. v300` embedding file.
    #[arg(long)]
    embeddings: PathBuf,
}

#[derive(Args, Debug)]
struct TrainCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Optional test file; evaluated after training.
    #[arg(long)]
    test_xml: Option<PathBuf>,
    /// gru, gru-tm, gru-notm, gru-fl or miad [default: miad]
    #[arg(long)]
    variant: Option<String>,
    /// Seed for initialization, OOV vectors, dev split and shuffling [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory [default: current directory]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test_xml: PathBuf,
    /// Directory for report.txt and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    sentence: String,
    /// Character span FROM:TO (end exclusive) of one aspect; repeat per aspect.
    #[arg(long = "aspect", required = true)]
    aspects: Vec<String>,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    test_xml: PathBuf,
    /// Comma-separated seeds [default: 1,2,3]
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory [default: current directory]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `miad --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Ablation(a) => cmd_ablation(a),
    }
}

fn parse(path: &Path, split: Split) -> Result<ParsedSplit> {
    let parsed = parse_semeval_xml(path, split).map_err(|e| CliError::Data(e.to_string()))?;
    let w = &parsed.warnings;
    if w.skipped_aspects() > 0 || w.discarded_sentences > 0 {
        log::warn!("{}: {w:?}", path.display());
    }
    if parsed.records.is_empty() {
        return Err(CliError::Data(format!("{}: no sentences with usable aspects", path.display())));
    }
    Ok(parsed)
}

/// Writes all `(name, contents)` pairs into `dir`, each atomically. Nothing
/// is written until every artifact is ready.
fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let p = dir.join(name);
        write_atomic(&p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for (path, split) in [(&a.train_xml, Split::Train), (&a.test_xml, Split::Test)] {
        if let Some(p) = path {
            rows.push((split, dataset_stats(&parse(p, split)?.records)));
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage("stats needs --train-xml and/or --test-xml".into()));
    }
    let label = match a.domain {
        Domain::Restaurant => "Rest.",
        Domain::Laptop => "Laptop",
    };
    let table: Vec<_> = rows.iter().map(|(s, c)| (label.to_string(), *s, *c)).collect();
    print!("{}", render_stats_table(&table));
    for (split, counts) in &rows {
        let diff = counts.diff(&reference_counts(a.domain, *split));
        if diff.is_empty() {
            println!("{split}: matches published counts");
        } else {
            println!("{split}: {} cells differ from published counts", diff.len());
            for d in diff {
                println!("  {d}");
            }
        }
    }
    if let Some(out) = &a.out {
        write_outputs(out, &[("stats.csv".into(), render_stats_csv(&rows).into_bytes())])?;
    }
    Ok(())
}

struct Corpus {
    train: Vec<SentenceRecord>,
    test: Vec<SentenceRecord>,
}

fn load_corpus(train_xml: &Path, test_xml: Option<&Path>) -> Result<Corpus> {
    let train = parse(train_xml, Split::Train)?.records;
    let test = match test_xml {
        Some(p) => parse(p, Split::Test)?.records,
        None => Vec::new(),
    };
    Ok(Corpus { train, test })
}

struct RunResult {
    config: TrainConfig,
    vocab: Vocabulary,
    outcome: miad_core::training::TrainOutcome,
    report: Option<EvalReport>,
}

/// Embeddings, training, and optional test evaluation for one config. The
/// same path backs both `train` and `ablation`.
fn train_and_eval(config: TrainConfig, corpus: &Corpus, embeddings: &Path) -> Result<RunResult> {
    let table = build_embeddings(corpus.train.iter().chain(&corpus.test), embeddings, config.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    log::info!("embeddings: {} tokens, {:.1}% not in file", table.stats.corpus_tokens, 100.0 * table.stats.oov_rate());
    let outcome = train(&config, &corpus.train, &table)?;
    let report = if corpus.test.is_empty() {
        None
    } else {
        let enc = encode_all(&corpus.test, &table.vocab);
        let r = evaluate(&outcome.params, config.forward_options(), &enc, config.domain.as_str(), config.variant.label())
            .map_err(|e| CliError::Data(e.to_string()))?;
        Some(r)
    };
    Ok(RunResult { config, vocab: table.vocab, outcome, report })
}

fn cmd_train(a: TrainCmd) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(v) = &a.variant {
        extra.push(("variant", v.clone()));
    }
    if let Some(s) = a.seed {
        extra.push(("seed", s.to_string()));
    }
    let config = build_config(&a.hyper.pairs()?, &extra)?;
    let corpus = load_corpus(&a.data.train_xml, a.test_xml.as_deref())?;
    let run = train_and_eval(config, &corpus, &a.data.embeddings)?;

    let out = a.out.unwrap_or_else(|| PathBuf::from("."));
    let ckpt = miad_core::training::encode_checkpoint(&run.outcome.params, &run.config, &run.vocab);
    let mut files = vec![
        ("model.ckpt".to_string(), ckpt),
        ("train.log".to_string(), run.outcome.log.render().into_bytes()),
        ("config.txt".to_string(), run.config.to_text().into_bytes()),
    ];
    print!("{}", run.outcome.log.render());
    println!("kept epoch {}", run.outcome.log.best_epoch);
    if let Some(r) = &run.report {
        let reports = std::slice::from_ref(r);
        print!("{}", render_report(reports));
        files.push(("report.txt".into(), render_report(reports).into_bytes()));
        files.push(("report.csv".into(), render_report_csv(reports).into_bytes()));
    }
    write_outputs(&out, &files)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint).map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let test = parse(&a.test_xml, Split::Test)?.records;
    let enc = encode_all(&test, &ckpt.vocab);
    let cfg = &ckpt.config;
    let report = evaluate(&ckpt.params, cfg.forward_options(), &enc, cfg.domain.as_str(), cfg.variant.label())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let reports = [report];
    print!("{}", render_report(&reports));
    if let Some(out) = &a.out {
        write_outputs(
            out,
            &[("report.txt".into(), render_report(&reports).into_bytes()), ("report.csv".into(), render_report_csv(&reports).into_bytes())],
        )?;
    }
    Ok(())
}

fn parse_span(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("bad --aspect `{s}`: expected FROM:TO character offsets"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a >= b {
        return Err(bad());
    }
    Ok((a, b))
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint).map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let tokens = tokenize(&a.sentence);
    let chars: Vec<char> = a.sentence.chars().collect();
    let mut aspects = Vec::new();
    let mut terms = Vec::new();
    for s in &a.aspects {
        let (from, to) = parse_span(s)?;
        if to > chars.len() {
            return Err(CliError::Usage(format!("--aspect {s} is past the end of a {}-character sentence", chars.len())));
        }
        let (tok_start, tok_len) =
            align_span(&tokens, from, to).ok_or_else(|| CliError::Usage(format!("--aspect {s} covers no token")))?;
        aspects.push(EncodedAspect { tok_start, tok_len, label: None });
        terms.push(chars[from..to].iter().collect::<String>());
    }
    let sentence = EncodedSentence { words: tokens.iter().map(|t| ckpt.vocab.row(&t.text)).collect(), aspects };
    let probs = predict_sentence(&ckpt.params, ckpt.config.forward_options(), &sentence).map_err(|e| CliError::Data(e.to_string()))?;
    for ((span, term), p) in a.aspects.iter().zip(&terms).zip(&probs) {
        let label = miad_core::model::argmax(p);
        println!("{span}\t{term}\t{label}\tneutral={:.4}\tnegative={:.4}\tpositive={:.4}", p[0], p[1], p[2]);
    }
    Ok(())
}

fn cmd_ablation(a: AblationArgs) -> Result<()> {
    let base = a.hyper.pairs()?;
    let seeds = a.seeds.clone().unwrap_or_else(|| vec![1, 2, 3]);
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds needs at least one seed".into()));
    }
    // validate the grid before any training
    for v in Variant::ALL {
        build_config(&base, &[("variant", v.to_string())])?;
    }
    let corpus = load_corpus(&a.data.train_xml, Some(&a.test_xml))?;
    let mut per_run = Vec::new();
    let mut combined = Vec::new();
    let mut files = Vec::new();
    for v in Variant::ALL {
        let mut merged: Option<EvalReport> = None;
        for &seed in &seeds {
            let cfg = build_config(&base, &[("variant", v.to_string()), ("seed", seed.to_string())])?;
            eprintln!("training {v} seed {seed}");
            let run = train_and_eval(cfg, &corpus, &a.data.embeddings)?;
            let mut report = run.report.expect("test split given");
            files.push((format!("{v}_seed{seed}.log"), run.outcome.log.render().into_bytes()));
            match &mut merged {
                Some(m) => m.merge(&report),
                None => merged = Some(report.clone()),
            }
            report.variant = format!("{}#{seed}", v.label());
            per_run.push(report);
        }
        combined.push(merged.expect("at least one seed"));
    }
    print!("{}", render_report(&combined));
    let mut all = per_run;
    all.extend(combined.iter().cloned());
    files.push(("ablation.txt".into(), render_report(&combined).into_bytes()));
    files.push(("ablation.csv".into(), render_report_csv(&combined).into_bytes()));
    files.push(("ablation_runs.csv".into(), render_report_csv(&all).into_bytes()));
    let out = a.out.unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&out, &files)
}
