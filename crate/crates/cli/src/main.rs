//! Command-line front end for the malclass pipeline.
//!
//! Subcommands wire the library end to end: `validate` and `preprocess` for
//! data hygiene, `rank` for feature scoring, `cv` and `sweep` for evaluation,
//! `train`/`predict` for model persistence and scoring of new rows, and
//! `synth` for deterministic synthetic datasets.
//!
//! Conventions shared by every subcommand:
//! - Exit codes: 0 on success, 1 on usage errors (bad flags, bad `--config`),
//!   2 on data errors (unreadable or malformed inputs, pipeline failures).
//! - Logging goes to stderr; machine-readable output goes to files in
//!   `--out-dir` or to stdout. Report JSON files are byte-identical across
//!   runs with the same seed; wall-clock timings live in separate
//!   `*_timing.json` sidecars (and in the human CSV tables) so they never
//!   perturb the reproducible artifacts.
//! - A `--config` JSON manifest may supply any flag; explicit flags override
//!   it. The `MALCLASS_OUT_DIR` environment variable overrides the manifest's
//!   output directory (an explicit `--out-dir` still wins).
//! - Input files are never modified; a subcommand refuses to write an output
//!   over one of its own inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use malclass_core::classifiers::{
    fit, load_model, predict_labels, save_model, ClassifierKind, ClassifierSpec,
};
use malclass_core::data::{
    generate_synthetic, ingest_csv, ingest_features_csv, validate_dataset, write_csv, ColumnMap,
    Dataset, SyntheticSpec, Task,
};
use malclass_core::evaluation::{
    cross_validate, metrics_to_csv, sweep, sweep_to_csv, CvConfig, ScalingPolicy, SelectionScope,
    Timing,
};
use malclass_core::preprocess::{apply_minmax_rows, dedupe, drop_incomplete, fit_minmax, preprocess, ScaleParams};
use malclass_core::schema::{FeatureSchema, LabelTaxonomy};
use malclass_core::selection::{
    apply_mask, project_rows, ranking_to_csv, score_chi2, score_mi, select_threshold,
    FeatureMask, FeatureRanking, SelectionConfig, SelectionMethod, DEFAULT_MI_BINS,
};

/// Marker wrapped into `anyhow` chains to route an error to exit code 1
/// instead of 2. Anything not marked is a data error.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed; real
            // parse failures print usage to stderr and exit 1.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "malclass",
    version,
    about = "Malware category/family classification from dynamic features",
    after_help = "Any flag may also come from a --config JSON manifest; explicit flags override \
                  it. MALCLASS_OUT_DIR overrides the manifest's output directory. Logs go to \
                  stderr; reports go to --out-dir and stdout."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a labelled CSV and print per-label counts and hygiene statistics
    Validate(ValidateArgs),
    /// Drop incomplete rows, dedupe, scale to [0,1]; emit cleaned CSV + scale params
    Preprocess(PreprocessArgs),
    /// Score every feature (chi2 or mutual information) and emit the ranking
    Rank(RankArgs),
    /// Repeated stratified k-fold cross-validation of one configuration
    Cv(CvArgs),
    /// Threshold-by-classifier accuracy grid (5 thresholds x RF,KNN,J48,NB)
    Sweep(SweepArgs),
    /// Fit a classifier on a full dataset and persist it
    Train(TrainArgs),
    /// Label new rows with a saved model
    Predict(PredictArgs),
    /// Generate a deterministic synthetic dataset
    Synth(SynthArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// JSON manifest that may supply any flag (explicit flags override it)
    #[arg(long, value_name = "FILE", global = true)]
    config: Option<PathBuf>,
    /// Feature schema JSON [default: the built-in 141-feature schema]
    #[arg(long, value_name = "FILE", global = true)]
    schema: Option<PathBuf>,
    /// Label taxonomy JSON [default: the built-in 14-category taxonomy]
    #[arg(long, value_name = "FILE", global = true)]
    taxonomy: Option<PathBuf>,
    /// JSON object renaming CSV header columns to canonical names
    #[arg(long, value_name = "FILE", global = true)]
    column_map: Option<PathBuf>,
    /// Directory for output files [default: .]
    #[arg(long, value_name = "DIR", global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to inspect
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to clean and scale
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to score features on
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Label to score against: category | family [default: category]
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Scoring method: chi2 | mi [default: chi2]
    #[arg(long, value_parser = parse_method)]
    method: Option<SelectionMethod>,
    /// Bin count for the mutual-information estimator [default: 10]
    #[arg(long, value_name = "N")]
    bins: Option<usize>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to evaluate on
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Label to predict: category | family [default: category]
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Classifier: J48 | RF | KNN | NB | LR | AB
    #[arg(long, value_parser = parse_kind)]
    classifier: Option<ClassifierKind>,
    /// Hyperparameter override as NAME=VALUE (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    param: Vec<String>,
    /// Feature-selection method: chi2 | mi [default: none]
    #[arg(long, value_parser = parse_method)]
    method: Option<SelectionMethod>,
    /// Keep the top THRESHOLD percent of features (requires --method)
    #[arg(long, value_name = "PERCENT")]
    threshold: Option<u32>,
    /// Bin count for the mutual-information estimator [default: 10]
    #[arg(long, value_name = "N")]
    bins: Option<usize>,
    /// Fold count [default: 10]
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    /// Repeat count, metrics averaged over repeats [default: 10]
    #[arg(long, value_name = "N")]
    repeats: Option<usize>,
    /// Base seed for folds and classifiers [default: 7]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Where scaling is fitted: per-fold | full-data [default: per-fold]
    #[arg(long, value_parser = parse_scaling)]
    scaling: Option<ScalingPolicy>,
    /// Where selection scores are computed: per-fold | full-data [default: per-fold]
    #[arg(long, value_parser = parse_scope)]
    selection_scope: Option<SelectionScope>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to evaluate on
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Label to predict: category | family [default: category]
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Feature-selection method driving the grid: chi2 | mi
    #[arg(long, value_parser = parse_method)]
    method: Option<SelectionMethod>,
    /// Bin count for the mutual-information estimator [default: 10]
    #[arg(long, value_name = "N")]
    bins: Option<usize>,
    /// Fold count [default: 10]
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    /// Repeat count, metrics averaged over repeats [default: 10]
    #[arg(long, value_name = "N")]
    repeats: Option<usize>,
    /// Base seed for folds and classifiers [default: 7]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Where scaling is fitted: per-fold | full-data [default: per-fold]
    #[arg(long, value_parser = parse_scaling)]
    scaling: Option<ScalingPolicy>,
    /// Where selection scores are computed: per-fold | full-data [default: per-fold]
    #[arg(long, value_parser = parse_scope)]
    selection_scope: Option<SelectionScope>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled CSV to train on
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Label to predict: category | family [default: category]
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Classifier: J48 | RF | KNN | NB | LR | AB
    #[arg(long, value_parser = parse_kind)]
    classifier: Option<ClassifierKind>,
    /// Hyperparameter override as NAME=VALUE (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    param: Vec<String>,
    /// Feature-selection method: chi2 | mi [default: none]
    #[arg(long, value_parser = parse_method)]
    method: Option<SelectionMethod>,
    /// Keep the top THRESHOLD percent of features (requires --method)
    #[arg(long, value_name = "PERCENT")]
    threshold: Option<u32>,
    /// Bin count for the mutual-information estimator [default: 10]
    #[arg(long, value_name = "N")]
    bins: Option<usize>,
    /// Classifier seed [default: 7]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding model.json, scale_params.json and (optionally)
    /// feature_mask.json, as written by `train`
    #[arg(long, value_name = "DIR")]
    model_dir: Option<PathBuf>,
    /// CSV of feature rows to label (label columns, if present, are ignored)
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of classes, drawn from the first taxonomy categories [default: 14]
    #[arg(long, value_name = "N")]
    classes: Option<usize>,
    /// Samples per class [default: 300]
    #[arg(long, value_name = "N")]
    per_class: Option<usize>,
    /// Number of informative features (the first N schema ordinals) [default: 40]
    #[arg(long, value_name = "N")]
    informative: Option<usize>,
    /// Mean separation between adjacent classes on informative features [default: 2.0]
    #[arg(long, value_name = "X")]
    separation: Option<f64>,
    /// Noise standard deviation on every feature [default: 1.0]
    #[arg(long, value_name = "X")]
    noise: Option<f64>,
    /// Generator seed [default: 7]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Flag value parsers (shared by clap and the --config manifest)
// ---------------------------------------------------------------------------

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s.to_lowercase().as_str() {
        "category" => Ok(Task::Category),
        "family" => Ok(Task::Family),
        other => Err(format!("unknown task {other:?} (category|family)")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<ClassifierKind, String> {
    s.parse()
}

fn parse_method(s: &str) -> std::result::Result<SelectionMethod, String> {
    s.parse()
}

fn parse_scaling(s: &str) -> std::result::Result<ScalingPolicy, String> {
    match s.to_lowercase().as_str() {
        "per-fold" => Ok(ScalingPolicy::FitOnTrainFold),
        "full-data" => Ok(ScalingPolicy::FitOnFullData),
        other => Err(format!("unknown scaling policy {other:?} (per-fold|full-data)")),
    }
}

fn parse_scope(s: &str) -> std::result::Result<SelectionScope, String> {
    match s.to_lowercase().as_str() {
        "per-fold" => Ok(SelectionScope::ScoreOnTrainFold),
        "full-data" => Ok(SelectionScope::ScoreOnFullData),
        other => Err(format!(
            "unknown selection scope {other:?} (per-fold|full-data)"
        )),
    }
}

// ---------------------------------------------------------------------------
// Config manifest and flag resolution
// ---------------------------------------------------------------------------

/// Everything a `--config` manifest may supply. One namespace serves all
/// subcommands; fields irrelevant to the invoked subcommand are ignored.
/// Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    schema: Option<PathBuf>,
    taxonomy: Option<PathBuf>,
    column_map: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    data: Option<PathBuf>,
    model_dir: Option<PathBuf>,
    task: Option<String>,
    classifier: Option<String>,
    params: Option<BTreeMap<String, f64>>,
    method: Option<String>,
    threshold: Option<u32>,
    bins: Option<usize>,
    k: Option<usize>,
    repeats: Option<usize>,
    seed: Option<u64>,
    scaling: Option<String>,
    selection_scope: Option<String>,
    classes: Option<usize>,
    per_class: Option<usize>,
    informative: Option<usize>,
    separation: Option<f64>,
    noise: Option<f64>,
}

fn load_config(common: &CommonArgs) -> Result<FileConfig> {
    let Some(path) = &common.config else {
        return Ok(FileConfig::default());
    };
    let doc = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&doc)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Applies a parser to a config-supplied string, turning parse failures into
/// usage errors that name the offending key.
fn parse_cfg<T>(
    value: &Option<String>,
    key: &str,
    parser: fn(&str) -> std::result::Result<T, String>,
) -> Result<Option<T>> {
    match value {
        None => Ok(None),
        Some(s) => parser(s)
            .map(Some)
            .map_err(|e| usage(format!("config key {key:?}: {e}"))),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("{flag} is required (set the flag or a config key)")))
}

/// Schema, taxonomy, header map and output directory, resolved from flags,
/// manifest and environment.
struct Resources {
    schema: Arc<FeatureSchema>,
    taxonomy: Arc<LabelTaxonomy>,
    column_map: Option<ColumnMap>,
    out_dir: PathBuf,
}

fn resources(common: &CommonArgs, cfg: &FileConfig) -> Result<Resources> {
    let schema = match common.schema.as_ref().or(cfg.schema.as_ref()) {
        None => FeatureSchema::canonical(),
        Some(p) => Arc::new(FeatureSchema::from_json(&read_text(p, "schema")?)?),
    };
    let taxonomy = match common.taxonomy.as_ref().or(cfg.taxonomy.as_ref()) {
        None => LabelTaxonomy::canonical(),
        Some(p) => Arc::new(LabelTaxonomy::from_json(&read_text(p, "taxonomy")?)?),
    };
    let column_map = match common.column_map.as_ref().or(cfg.column_map.as_ref()) {
        None => None,
        Some(p) => Some(ColumnMap::from_json(&read_text(p, "column map")?)?),
    };
    let env_out = std::env::var("MALCLASS_OUT_DIR")
        .ok()
        .filter(|s| !s.is_empty())
        .map(PathBuf::from);
    let out_dir = common
        .out_dir
        .clone()
        .or(env_out)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Resources {
        schema,
        taxonomy,
        column_map,
        out_dir,
    })
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

/// Writes an output file, creating the directory and refusing to clobber any
/// of the listed input paths.
fn write_output(path: &Path, contents: &str, inputs: &[&Path]) -> Result<()> {
    for input in inputs {
        if same_path(path, input) {
            anyhow::bail!(
                "output {} would overwrite an input file; pick another --out-dir",
                path.display()
            );
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Paths name the same file if their absolute forms agree; existing files are
/// also compared through `canonicalize` to see through symlinks.
fn same_path(a: &Path, b: &Path) -> bool {
    let abs_a = std::path::absolute(a).unwrap_or_else(|_| a.to_path_buf());
    let abs_b = std::path::absolute(b).unwrap_or_else(|_| b.to_path_buf());
    if abs_a == abs_b {
        return true;
    }
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(ca), Ok(cb)) => ca == cb,
        _ => false,
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut doc = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    doc.push('\n');
    doc
}

/// Timing sidecar payload: the one output that varies between otherwise
/// identical runs, kept out of the reproducible report files.
#[derive(Serialize)]
struct TimingOut {
    #[serde(flatten)]
    timing: Timing,
    total_seconds: f64,
}

fn timing_json(timing: &Timing) -> String {
    to_pretty(&TimingOut {
        timing: *timing,
        total_seconds: timing.total(),
    })
}

// ---------------------------------------------------------------------------
// Pipeline helpers
// ---------------------------------------------------------------------------

fn ingest(path: &Path, res: &Resources) -> Result<Dataset> {
    let file = fs::File::open(path)
        .with_context(|| format!("cannot open data file {}", path.display()))?;
    let dataset = ingest_csv(
        std::io::BufReader::new(file),
        Arc::clone(&res.schema),
        Arc::clone(&res.taxonomy),
        res.column_map.as_ref(),
    )
    .with_context(|| format!("cannot ingest {}", path.display()))?;
    log::info!(
        "ingested {} rows x {} features from {}",
        dataset.len(),
        dataset.schema().len(),
        path.display()
    );
    Ok(dataset)
}

/// Cleaning shared by the evaluation and training paths: drop rows with
/// non-finite values, then collapse exact duplicates. Scaling is left to the
/// caller (per-fold inside CV, full-data for train).
fn clean(dataset: &Dataset) -> Result<Dataset> {
    let (complete, dropped) = drop_incomplete(dataset)?;
    let (unique, removed) = dedupe(&complete)?;
    if dropped > 0 || removed > 0 {
        log::info!("cleaning dropped {dropped} incomplete rows and {removed} duplicates");
    }
    Ok(unique)
}

/// Builds the optional selection request from method/threshold/bins, wherever
/// they came from. Either both of method and threshold are present or neither.
fn build_selection(
    method: Option<SelectionMethod>,
    threshold: Option<u32>,
    bins: usize,
) -> Result<Option<SelectionConfig>> {
    match (method, threshold) {
        (None, None) => Ok(None),
        (Some(_), None) => Err(usage("--method also needs --threshold")),
        (None, Some(_)) => Err(usage("--threshold also needs --method")),
        (Some(method), Some(threshold_percent)) => {
            if threshold_percent == 0 || threshold_percent > 100 {
                return Err(usage(format!(
                    "--threshold must be in 1..=100, got {threshold_percent}"
                )));
            }
            Ok(Some(SelectionConfig {
                method,
                threshold_percent,
                bins,
            }))
        }
    }
}

/// Merges `--param NAME=VALUE` overrides over the manifest's parameter map.
fn build_params(
    cfg_params: Option<BTreeMap<String, f64>>,
    overrides: &[String],
) -> Result<BTreeMap<String, f64>> {
    let mut params = cfg_params.unwrap_or_default();
    for raw in overrides {
        let (name, value) = raw
            .split_once('=')
            .ok_or_else(|| usage(format!("--param {raw:?} is not NAME=VALUE")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--param {raw:?} has a non-numeric value")))?;
        params.insert(name.trim().to_string(), value);
    }
    Ok(params)
}

fn rank_dataset(
    dataset: &Dataset,
    task: Task,
    method: SelectionMethod,
    bins: usize,
) -> Result<FeatureRanking> {
    Ok(match method {
        SelectionMethod::Chi2 => score_chi2(dataset, task)?,
        SelectionMethod::Mi => score_mi(dataset, task, bins)?,
    })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let dataset = ingest(&data, &res)?;
    let report = validate_dataset(&dataset);
    print!("{}", to_pretty(&report));
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let dataset = ingest(&data, &res)?;
    let (scaled, params, summary) = preprocess(&dataset)?;

    let csv_path = res.out_dir.join("cleaned.csv");
    let mut buf = Vec::new();
    write_csv(&scaled, &mut buf)?;
    let csv_text = String::from_utf8(buf).expect("CSV output is UTF-8");
    write_output(&csv_path, &csv_text, &[&data])?;
    write_output(&res.out_dir.join("scale_params.json"), &params.to_json(), &[&data])?;
    print!("{}", to_pretty(&summary));
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let task = args
        .task
        .or(parse_cfg(&cfg.task, "task", parse_task)?)
        .unwrap_or(Task::Category);
    let method = args
        .method
        .or(parse_cfg(&cfg.method, "method", parse_method)?)
        .unwrap_or(SelectionMethod::Chi2);
    let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_MI_BINS);

    let dataset = ingest(&data, &res)?;
    let (scaled, _, _) = preprocess(&dataset)?;
    let ranking = rank_dataset(&scaled, task, method, bins)?;
    write_output(&res.out_dir.join("ranking.json"), &to_pretty(&ranking), &[&data])?;
    write_output(&res.out_dir.join("ranking.csv"), &ranking_to_csv(&ranking), &[&data])?;
    Ok(())
}

fn cmd_cv(args: CvArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let task = args
        .task
        .or(parse_cfg(&cfg.task, "task", parse_task)?)
        .unwrap_or(Task::Category);
    let kind = require(
        args.classifier
            .or(parse_cfg(&cfg.classifier, "classifier", parse_kind)?),
        "--classifier",
    )?;
    let seed = args.seed.or(cfg.seed).unwrap_or(7);
    let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_MI_BINS);
    let selection = build_selection(
        args.method
            .or(parse_cfg(&cfg.method, "method", parse_method)?),
        args.threshold.or(cfg.threshold),
        bins,
    )?;
    let spec = ClassifierSpec {
        kind,
        params: build_params(cfg.params, &args.param)?,
        seed,
    };
    let cv = CvConfig {
        k: args.k.or(cfg.k).unwrap_or(10),
        repeats: args.repeats.or(cfg.repeats).unwrap_or(10),
        seed,
        scaling: args
            .scaling
            .or(parse_cfg(&cfg.scaling, "scaling", parse_scaling)?)
            .unwrap_or_default(),
        selection_scope: args
            .selection_scope
            .or(parse_cfg(&cfg.selection_scope, "selection_scope", parse_scope)?)
            .unwrap_or_default(),
    };

    let dataset = clean(&ingest(&data, &res)?)?;
    let report = cross_validate(&dataset, task, &spec, selection.as_ref(), &cv)?;
    write_output(&res.out_dir.join("cv_report.json"), &to_pretty(&report), &[&data])?;
    write_output(&res.out_dir.join("cv_report.csv"), &metrics_to_csv(&report), &[&data])?;
    write_output(&res.out_dir.join("cv_timing.json"), &timing_json(&report.timing), &[&data])?;
    print!("{}", metrics_to_csv(&report));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let task = args
        .task
        .or(parse_cfg(&cfg.task, "task", parse_task)?)
        .unwrap_or(Task::Category);
    let method = require(
        args.method
            .or(parse_cfg(&cfg.method, "method", parse_method)?),
        "--method",
    )?;
    let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_MI_BINS);
    let cv = CvConfig {
        k: args.k.or(cfg.k).unwrap_or(10),
        repeats: args.repeats.or(cfg.repeats).unwrap_or(10),
        seed: args.seed.or(cfg.seed).unwrap_or(7),
        scaling: args
            .scaling
            .or(parse_cfg(&cfg.scaling, "scaling", parse_scaling)?)
            .unwrap_or_default(),
        selection_scope: args
            .selection_scope
            .or(parse_cfg(&cfg.selection_scope, "selection_scope", parse_scope)?)
            .unwrap_or_default(),
    };

    let dataset = clean(&ingest(&data, &res)?)?;
    let report = sweep(&dataset, task, method, bins, &cv)?;
    write_output(&res.out_dir.join("sweep_report.json"), &to_pretty(&report), &[&data])?;
    write_output(&res.out_dir.join("sweep_report.csv"), &sweep_to_csv(&report), &[&data])?;
    write_output(&res.out_dir.join("sweep_timing.json"), &timing_json(&report.timing), &[&data])?;
    print!("{}", sweep_to_csv(&report));
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let data = require(args.data.or(cfg.data), "--data")?;
    let task = args
        .task
        .or(parse_cfg(&cfg.task, "task", parse_task)?)
        .unwrap_or(Task::Category);
    let kind = require(
        args.classifier
            .or(parse_cfg(&cfg.classifier, "classifier", parse_kind)?),
        "--classifier",
    )?;
    let seed = args.seed.or(cfg.seed).unwrap_or(7);
    let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_MI_BINS);
    let selection = build_selection(
        args.method
            .or(parse_cfg(&cfg.method, "method", parse_method)?),
        args.threshold.or(cfg.threshold),
        bins,
    )?;
    let spec = ClassifierSpec {
        kind,
        params: build_params(cfg.params, &args.param)?,
        seed,
    };

    let dataset = clean(&ingest(&data, &res)?)?;
    // Terminal fit: scale on the whole training set, persist the parameters
    // so predict can reproduce the transform exactly.
    let params = fit_minmax(&dataset)?;
    let (scaled, _) = malclass_core::preprocess::apply_minmax(&dataset, &params)?;
    let (train_set, mask) = match &selection {
        None => (scaled, None),
        Some(sel) => {
            let ranking = rank_dataset(&scaled, task, sel.method, sel.bins)?;
            let mask = select_threshold(&ranking, sel.threshold_percent)?;
            log::info!(
                "selection kept {} of {} features ({} {}%)",
                mask.ordinals.len(),
                res.schema.len(),
                sel.method,
                sel.threshold_percent
            );
            (apply_mask(&scaled, &mask)?, Some(mask))
        }
    };
    let model = fit(&spec, &train_set, task)?;
    log::info!(
        "trained {} on {} rows x {} features ({} classes) in {:.2}s",
        kind,
        train_set.len(),
        train_set.schema().len(),
        model.classes.len(),
        model.train_seconds
    );

    save_and_log(&res.out_dir.join("model.json"), &model, &data)?;
    write_output(&res.out_dir.join("scale_params.json"), &params.to_json(), &[&data])?;
    if let Some(mask) = &mask {
        write_output(&res.out_dir.join("feature_mask.json"), &mask.to_json(), &[&data])?;
    }
    Ok(())
}

fn save_and_log(
    path: &Path,
    model: &malclass_core::classifiers::TrainedModel,
    input: &Path,
) -> Result<()> {
    if same_path(path, input) {
        anyhow::bail!(
            "output {} would overwrite an input file; pick another --out-dir",
            path.display()
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        }
    }
    save_model(model, path).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let model_dir = require(args.model_dir.or(cfg.model_dir), "--model-dir")?;
    let data = require(args.data.or(cfg.data), "--data")?;

    let model_path = model_dir.join("model.json");
    let model = load_model(&model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let params_path = model_dir.join("scale_params.json");
    let params = ScaleParams::from_json(&read_text(&params_path, "scale params")?)
        .with_context(|| format!("cannot load scale params {}", params_path.display()))?;
    let mask_path = model_dir.join("feature_mask.json");
    let mask = if mask_path.exists() {
        Some(
            FeatureMask::from_json(&read_text(&mask_path, "feature mask")?)
                .with_context(|| format!("cannot load feature mask {}", mask_path.display()))?,
        )
    } else {
        None
    };
    if params.schema_fingerprint != res.schema.fingerprint() {
        anyhow::bail!(
            "scale params were fitted on a different schema (expected fingerprint {}, got {})",
            params.schema_fingerprint,
            res.schema.fingerprint()
        );
    }

    let file = fs::File::open(&data)
        .with_context(|| format!("cannot open data file {}", data.display()))?;
    let (ids, mut rows) =
        ingest_features_csv(std::io::BufReader::new(file), &res.schema, res.column_map.as_ref())
            .with_context(|| format!("cannot ingest {}", data.display()))?;
    if rows.is_empty() {
        anyhow::bail!("{} contains no data rows", data.display());
    }
    let clamp = apply_minmax_rows(&mut rows, &params)?;
    if clamp.total() > 0 {
        log::warn!(
            "{} values fell outside the training range and were clamped to [0,1]",
            clamp.total()
        );
    }
    let (rows, fingerprint) = match &mask {
        None => (rows, res.schema.fingerprint().to_string()),
        Some(mask) => {
            if mask.schema_fingerprint != res.schema.fingerprint() {
                anyhow::bail!(
                    "feature mask belongs to a different schema (expected fingerprint {}, got {})",
                    mask.schema_fingerprint,
                    res.schema.fingerprint()
                );
            }
            let projected = res.schema.project(&mask.ordinals)?;
            (project_rows(&rows, &mask.ordinals), projected.fingerprint().to_string())
        }
    };
    let labels = predict_labels(&model, &rows, &fingerprint)?;

    let out_path = res.out_dir.join("predictions.csv");
    let with_ids = ids.iter().any(Option::is_some);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let header: &[&str] = if with_ids {
        &["SampleId", "Prediction"]
    } else {
        &["Prediction"]
    };
    wtr.write_record(header)?;
    for (id, label) in ids.iter().zip(&labels) {
        if with_ids {
            wtr.write_record([id.as_deref().unwrap_or(""), label])?;
        } else {
            wtr.write_record([label.as_str()])?;
        }
    }
    let csv_text =
        String::from_utf8(wtr.into_inner().expect("in-memory flush cannot fail"))
            .expect("CSV output is UTF-8");
    write_output(&out_path, &csv_text, &[&data, &model_path, &params_path, &mask_path])?;
    log::info!("labelled {} rows", labels.len());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let res = resources(&args.common, &cfg)?;
    let informative = args.informative.or(cfg.informative).unwrap_or(40);
    if informative > res.schema.len() {
        return Err(usage(format!(
            "--informative {} exceeds the schema's {} features",
            informative,
            res.schema.len()
        )));
    }
    let spec = SyntheticSpec {
        classes: args.classes.or(cfg.classes).unwrap_or(14),
        samples_per_class: args.per_class.or(cfg.per_class).unwrap_or(300),
        informative: (0..informative).collect(),
        class_separation: args.separation.or(cfg.separation).unwrap_or(2.0),
        noise_scale: args.noise.or(cfg.noise).unwrap_or(1.0),
        seed: args.seed.or(cfg.seed).unwrap_or(7),
    };
    let dataset = generate_synthetic(&spec, Arc::clone(&res.schema), Arc::clone(&res.taxonomy))?;
    let mut buf = Vec::new();
    write_csv(&dataset, &mut buf)?;
    let csv_text = String::from_utf8(buf).expect("CSV output is UTF-8");
    write_output(&res.out_dir.join("synthetic.csv"), &csv_text, &[])?;
    log::info!(
        "generated {} rows ({} classes x {} samples)",
        dataset.len(),
        spec.classes,
        spec.samples_per_class
    );
    Ok(())
}
