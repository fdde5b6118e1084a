//! `qflake`: ingest a labeled corpus, train and evaluate flaky-test
//! detectors, score new files, and run the experiment suite.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 runtime failure.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qflake_core::bundle::{canonical_json, ModelBundle};
use qflake_core::classifiers::{Family, ProfileName};
use qflake_core::corpus::{audit_manifest, scan_directory, select_subset, write_manifest, Corpus, SubsetMode};
use qflake_core::eval::grid::{apply_point, grid_search, nested_grid_search, ParamGrid};
use qflake_core::eval::cross_validate;
use qflake_core::experiment::{render_text, run_id, run_paper_suite, write_suite, Method, SuiteConfig, SuiteOutput};
use qflake_core::pipeline::{fit_pipeline, PipelineConfig, ThresholdMode, TuningSet, VocabularyScope};
use qflake_core::synth::write_synthetic_corpus;
use qflake_core::text::TokenizerProfile;
use qflake_core::Error;
use serde_json::{json, Value};

use config::FileConfig;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "qflake", version, about = "Flaky-test detection for quantum software")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fit the vocabulary on the whole dataset before splitting.
    #[arg(long, global = true)]
    replicate_paper_vectorization: bool,
    /// Tune thresholds on the evaluation fold instead of an inner holdout.
    #[arg(long, global = true)]
    replicate_paper_threshold: bool,
    /// Output location (a directory, or the bundle file for `train`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest, or scan a flaky/ + nonflaky/ tree into one.
    Ingest(IngestArgs),
    /// Train on the whole corpus and write a model bundle.
    Train(TrainArgs),
    /// Score files with a bundle; prints one JSON line per file.
    Predict(PredictArgs),
    /// Cross-validate one pipeline, optionally with a grid search.
    Evaluate(EvaluateArgs),
    /// Run the experiment suite and write result tables.
    Experiment(ExperimentArgs),
    /// Write a seeded synthetic corpus and its manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory laid out as <root>/flaky/** and <root>/nonflaky/**.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    root: Option<PathBuf>,
    /// Existing manifest to validate.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Model family: xgb, dt, rf, knn or svm.
    #[arg(long)]
    model: Option<Family>,
    /// Hyperparameter profile: paper_vanilla or paper_smote.
    #[arg(long)]
    profile: Option<ProfileName>,
    /// Oversample the minority class with SMOTE.
    #[arg(long)]
    smote: bool,
    /// PCA component count (0 disables PCA).
    #[arg(long)]
    pca: Option<usize>,
    /// Tune the decision threshold over 0.1..0.9 by F1.
    #[arg(long)]
    tune_threshold: bool,
    /// Fixed decision threshold.
    #[arg(long, conflicts_with = "tune_threshold")]
    threshold: Option<f64>,
    /// Tokenizer: default or strict_code.
    #[arg(long)]
    tokenizer: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Which subset to evaluate on: balanced, imbalanced or all.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Parameter grid: inline JSON or a path to a JSON file holding
    /// `[{"name": ..., "values": [...]}, ...]`.
    #[arg(long)]
    grid: Option<String>,
    /// Run the grid search nested, with this many inner folds.
    #[arg(long, requires = "grid")]
    nested: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Suite name; only `paper` exists.
    #[arg(long, default_value = "paper")]
    suite: String,
    /// Comma-separated methods: vanilla, smote, threshold, hybrid.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated model families.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<Family>>,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 45)]
    flaky: usize,
    #[arg(long, default_value_t = 243)]
    nonflaky: usize,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).map_err(Failure::Usage).and_then(|file| run(&cli, &file));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli, file: &FileConfig) -> Outcome {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Train(a) => train(cli, file, a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(cli, file, a),
        Command::Experiment(a) => experiment(cli, file, a),
        Command::Synth(a) => synth(cli, file, a),
    }
}

fn seed(cli: &Cli, file: &FileConfig) -> u64 {
    cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED)
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_corpus(manifest: &Path) -> Result<Corpus, Failure> {
    audit_manifest(manifest).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
        Failure::Usage(format!("{} invalid:\n{}", manifest.display(), lines.join("\n")))
    })
}

fn summary(corpus: &Corpus) -> String {
    use qflake_core::Label;
    format!("{} flaky / {} nonflaky", corpus.count(Label::Flaky), corpus.count(Label::NonFlaky))
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Outcome {
    let manifest = match (&a.root, &a.manifest) {
        (Some(root), _) => {
            let path = cli.out.clone().unwrap_or_else(|| root.join("manifest.jsonl"));
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let records = scan_directory(root, &dir).map_err(Error::from)?;
            if records.is_empty() {
                return Err(Failure::Usage(format!("{}: no entries", root.display())));
            }
            write_file(&path, &write_manifest(&records))?;
            path
        }
        (None, Some(m)) => m.clone(),
        (None, None) => return Err(Failure::Usage("pass --root or --manifest".into())),
    };
    let corpus = load_corpus(&manifest)?;
    println!("{}", summary(&corpus));
    if a.root.is_some() {
        println!("manifest written to {}", manifest.display());
    }
    Ok(())
}

/// Profile defaults, then the config file, then flags.
fn pipeline_config(cli: &Cli, file: &FileConfig, a: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let family = a.model.or(file.model).ok_or_else(|| Failure::Usage("no model given (--model or \"model\" in the config)".into()))?;
    let smote_flag = a.smote || file.smote.unwrap_or(false);
    let profile = a.profile.or(file.profile).unwrap_or(if smote_flag { ProfileName::PaperSmote } else { ProfileName::PaperVanilla });
    let mut config = PipelineConfig::from_profile(profile, family);

    if !file.params.is_empty() {
        let point: Vec<(String, Value)> = file.params.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        config = apply_point(&config, &point)?;
    }
    if let Some(k) = file.smote_neighbors {
        config.smote_neighbors = Some(k);
    }
    if file.smote == Some(false) {
        config.smote_neighbors = None;
    }
    if let Some(t) = &file.threshold {
        config.threshold = t.clone();
    }
    if let Some(t) = file.tokenizer {
        config.tokenizer = t;
    }
    if let Some(s) = file.vocabulary_scope {
        config.vocabulary_scope = s;
    }

    if a.smote && config.smote_neighbors.is_none() {
        config.smote_neighbors = Some(qflake_core::pipeline::DEFAULT_SMOTE_NEIGHBORS);
    }
    if let Some(k) = a.pca {
        config.pca_components = (k > 0).then_some(k);
    }
    if let Some(t) = a.threshold {
        config.threshold = ThresholdMode::Fixed { threshold: t };
    }
    if a.tune_threshold {
        config.threshold = ThresholdMode::tuned(TuningSet::InnerHoldout);
    }
    if cli.replicate_paper_threshold {
        if let ThresholdMode::Tune { on, .. } = &mut config.threshold {
            *on = TuningSet::EvaluationFold;
        }
    }
    if let Some(t) = &a.tokenizer {
        config.tokenizer = parse_tokenizer(t)?;
    }
    if cli.replicate_paper_vectorization {
        config.vocabulary_scope = VocabularyScope::WholeDataset;
    }
    config.validate()?;
    Ok(config)
}

fn parse_tokenizer(s: &str) -> Result<TokenizerProfile, Failure> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| Failure::Usage(format!("unknown tokenizer {s:?} (expected default or strict_code)")))
}

fn created_at() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok())
}

fn train(cli: &Cli, file: &FileConfig, a: &TrainArgs) -> Outcome {
    let corpus = load_corpus(&a.manifest)?;
    let config = pipeline_config(cli, file, &a.pipeline)?;
    let seed = seed(cli, file);
    let fitted = fit_pipeline(&corpus, &config, seed)?;
    let bundle = ModelBundle::from_fitted(fitted, &corpus, seed, created_at());
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("qflake-{}.bundle.json", config.family().key())));
    write_file(&path, &bundle.to_json()?)?;
    eprintln!("trained {} on {} (threshold {})", config.family(), summary(&corpus), bundle.threshold);
    println!("{}", path.display());
    Ok(())
}

fn predict(a: &PredictArgs) -> Outcome {
    let bundle = ModelBundle::load(&a.bundle)?;
    let mut texts = Vec::with_capacity(a.files.len());
    for f in &a.files {
        let bytes = fs::read(f).map_err(|e| Failure::Usage(format!("{}: {e}", f.display())))?;
        let text = String::from_utf8(bytes).map_err(|_| Failure::Usage(format!("{}: not valid UTF-8", f.display())))?;
        texts.push(text);
    }
    let predictions = bundle.predict_texts(&texts)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (f, p) in a.files.iter().zip(predictions) {
        let line = json!({ "path": f.display().to_string(), "score": p.score, "label": p.label });
        writeln!(out, "{line}").map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn parse_grid(arg: &str) -> Result<ParamGrid, Failure> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("cannot read grid {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad grid: {e}")))
}

fn parse_subset(s: &str) -> Result<SubsetMode, Failure> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| Failure::Usage(format!("unknown dataset {s:?} (expected balanced, imbalanced or all)")))
}

fn evaluate(cli: &Cli, file: &FileConfig, a: &EvaluateArgs) -> Outcome {
    let corpus = load_corpus(&a.manifest)?;
    let config = pipeline_config(cli, file, &a.pipeline)?;
    let seed = seed(cli, file);
    let n_folds = a.folds.or(file.n_folds).unwrap_or(5);
    let dataset = match &a.dataset {
        Some(s) => parse_subset(s)?,
        None => file.dataset.unwrap_or(SubsetMode::All),
    };
    let data = select_subset(&corpus, dataset, seed).map_err(Error::from)?;
    let mut doc = json!({
        "config": config,
        "seed": seed,
        "n_folds": n_folds,
        "dataset": dataset,
        "corpus_hash": data.content_hash(),
        "class_counts": data.class_counts(),
    });
    let aggregate = match (&a.grid, a.nested) {
        (None, _) => {
            let report = cross_validate(&data, &config, n_folds, seed)?;
            let agg = report.aggregate;
            doc["report"] = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
            agg
        }
        (Some(g), None) => {
            let grid = parse_grid(g)?;
            let search = grid_search(&data, &config, &grid, n_folds, seed)?;
            let report = cross_validate(&data, &search.best_config, n_folds, seed)?;
            let agg = report.aggregate;
            doc["grid"] = serde_json::to_value(&search).map_err(|e| Failure::Runtime(e.to_string()))?;
            doc["report"] = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
            agg
        }
        (Some(g), Some(inner)) => {
            let grid = parse_grid(g)?;
            let nested = nested_grid_search(&data, &config, &grid, n_folds, inner, seed)?;
            let agg = nested.aggregate;
            doc["nested"] = serde_json::to_value(&nested).map_err(|e| Failure::Runtime(e.to_string()))?;
            agg
        }
    };
    let text = canonical_json(&doc)?;
    match &cli.out {
        Some(dir) => {
            let path = dir.join(format!("evaluate-{}-seed{seed}.json", config.family().key()));
            write_file(&path, &text)?;
            println!("{}", path.display());
        }
        None => print!("{text}"),
    }
    eprintln!(
        "{} on {}: accuracy {}  precision {}  recall {}  F1 {}  MCC {}",
        config.family(),
        summary(&data),
        aggregate.accuracy,
        aggregate.precision,
        aggregate.recall,
        aggregate.f1,
        aggregate.mcc
    );
    Ok(())
}

fn experiment(cli: &Cli, file: &FileConfig, a: &ExperimentArgs) -> Outcome {
    if a.suite != "paper" {
        return Err(Failure::Usage(format!("unknown suite {:?} (only \"paper\" exists)", a.suite)));
    }
    let corpus = load_corpus(&a.manifest)?;
    let mut suite = SuiteConfig { settings: file.experiment.clone().unwrap_or_default(), ..SuiteConfig::default() };
    if let Some(m) = &file.models {
        suite.families = m.clone();
    }
    let method_names = a.methods.clone().or_else(|| file.methods.clone());
    if let Some(names) = method_names {
        suite.methods = names.iter().map(|s| s.parse::<Method>()).collect::<Result<_, _>>().map_err(Failure::Usage)?;
    }
    if let Some(m) = &a.models {
        suite.families = m.clone();
    }
    if let Some(s) = cli.seed.or(file.seed) {
        suite.settings.seed = s;
    }
    if let Some(k) = a.folds.or(file.n_folds) {
        suite.settings.n_folds = k;
    }
    if cli.replicate_paper_vectorization {
        suite.settings.vocabulary_scope = VocabularyScope::WholeDataset;
    }
    if cli.replicate_paper_threshold {
        suite.settings.threshold_set = TuningSet::EvaluationFold;
    }
    let result = run_paper_suite(&corpus, &suite)?;
    let corpus_hash = corpus.content_hash();
    let id = run_id(&a.suite, &suite, &corpus_hash)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let output = SuiteOutput { run_id: id, suite: &a.suite, config: &suite, corpus_hash, result: &result };
    let dir = write_suite(&out, &output)?;
    for table in [&result.balanced, &result.imbalanced].into_iter().flatten() {
        eprintln!("{}", render_text(table));
    }
    println!("{}", dir.display());
    Ok(())
}

fn synth(cli: &Cli, file: &FileConfig, a: &SynthArgs) -> Outcome {
    let dir = cli.out.clone().ok_or_else(|| Failure::Usage("synth needs --out <dir>".into()))?;
    let manifest = write_synthetic_corpus(&dir, a.flaky, a.nonflaky, seed(cli, file)).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    println!("{}", manifest.display());
    Ok(())
}
