//! `telfraud` — batch fraud detection on call-record CSVs.
//!
//! Four subcommands cover the life of a model:
//!
//! * `train` runs the full pipeline on a labeled CSV and writes model
//!   files, per-model reports, ROC point files, and a comparison table.
//! * `predict` scores a new CSV with a saved model, one record per row.
//! * `evaluate` scores a labeled CSV and prints the metrics.
//! * `compare` evaluates several saved models on one labeled CSV and
//!   prints them side by side.
//!
//! Every run is deterministic given the input bytes and `--seed`; the only
//! timestamp in any artifact is the `created:` line of model files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use telfraud::ingest::read_raw_csv;
use telfraud::model::{label_from_score, Predictor};
use telfraud::pipeline::{render_comparison_table, render_metrics_text, run_pipeline};
use telfraud::{
    BoostConfig, DbscanConfig, EvalReport, ForestConfig, KMeansConfig, LeakageMode, ModelKind,
    PipelineConfig, SmoteConfig,
};

#[derive(Parser)]
#[command(name = "telfraud", version, about = "Fraud detection on call-record CSVs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train models on a labeled CSV and write all run artifacts.
    Train(TrainArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Score a labeled CSV with a saved model and print the metrics.
    Evaluate(EvaluateArgs),
    /// Evaluate several saved models on one labeled CSV, side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training CSV.
    #[arg(long)]
    input: PathBuf,
    /// Optional schema file (`column = kind` lines) overriding inference.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Fraction of each class held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Master seed for every random choice in the run.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Models to fit: any of rf, xgb, kmeans, dbscan.
    #[arg(long, value_delimiter = ',', default_value = "rf,xgb")]
    models: Vec<ModelKind>,
    /// Neighbors considered when synthesizing minority rows.
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    /// Target minority/majority ratio after oversampling.
    #[arg(long, default_value_t = 1.0)]
    smote_ratio: f64,
    /// `clean` fits scaler and oversampler on training rows only;
    /// `paper-faithful` oversamples before splitting (leaky, for comparison).
    #[arg(long, default_value = "clean")]
    mode: LeakageMode,
    /// Directory the artifacts are written to.
    #[arg(long)]
    out: PathBuf,
    /// Trees in the random forest.
    #[arg(long, default_value_t = 100)]
    rf_trees: usize,
    /// Forest tree depth limit; 0 grows trees until pure.
    #[arg(long, default_value_t = 0)]
    rf_max_depth: usize,
    /// Boosting rounds.
    #[arg(long, default_value_t = 100)]
    xgb_rounds: usize,
    /// Boosting learning rate.
    #[arg(long, default_value_t = 0.3)]
    xgb_eta: f64,
    /// Boosted tree depth limit.
    #[arg(long, default_value_t = 6)]
    xgb_max_depth: usize,
    /// L2 penalty on boosted leaf weights.
    #[arg(long, default_value_t = 1.0)]
    xgb_lambda: f64,
    /// Minimum gain required to keep a boosted split.
    #[arg(long, default_value_t = 0.0)]
    xgb_gamma: f64,
    /// Clusters for the K-means baseline.
    #[arg(long, default_value_t = 2)]
    kmeans_k: usize,
    /// Neighborhood radius for the DBSCAN baseline (scaled feature space).
    #[arg(long, default_value_t = 0.3)]
    dbscan_eps: f64,
    /// Neighbors (self included) that make a DBSCAN point a core point.
    #[arg(long, default_value_t = 5)]
    dbscan_minpts: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// CSV to score; must contain the model's feature columns.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of (id, score, label) records.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// Labeled CSV to evaluate on.
    #[arg(long)]
    input: PathBuf,
    /// Also write the printed report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Labeled CSV every model is evaluated on.
    #[arg(long)]
    input: PathBuf,
    /// Also write the printed table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Saved model files to compare.
    #[arg(required = true)]
    models: Vec<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => run_train(&args),
        Command::Predict(args) => run_predict(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Compare(args) => run_compare(&args),
    }
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let mut config = PipelineConfig::new(&args.input, &args.out);
    config.schema = args.schema.clone();
    config.test_fraction = args.test_fraction;
    config.seed = args.seed;
    config.models = args.models.clone();
    config.mode = args.mode;
    config.smote = SmoteConfig {
        k_neighbors: args.smote_k,
        target_ratio: args.smote_ratio,
        seed: args.seed,
    };
    config.forest = ForestConfig {
        n_trees: args.rf_trees,
        max_depth: args.rf_max_depth,
        ..ForestConfig::default()
    };
    config.boost = BoostConfig {
        n_rounds: args.xgb_rounds,
        learning_rate: args.xgb_eta,
        max_depth: args.xgb_max_depth,
        lambda: args.xgb_lambda,
        gamma: args.xgb_gamma,
        ..BoostConfig::default()
    };
    config.kmeans = KMeansConfig {
        k: args.kmeans_k,
        ..KMeansConfig::default()
    };
    config.dbscan = DbscanConfig {
        eps: args.dbscan_eps,
        min_pts: args.dbscan_minpts,
    };

    let summary = run_pipeline(&config)?;
    println!(
        "trained {} model(s) on {} (mode {}, seed {})",
        summary.outcomes.len(),
        args.input.display(),
        summary.mode,
        summary.seed
    );
    println!(
        "rows: {} loaded ({} dropped for missing values), {} train (of which {} synthetic), {} test",
        summary.rows_loaded,
        summary.rows_dropped,
        summary.train_rows,
        summary.synthetic_rows,
        summary.test_rows
    );
    println!();
    print!("{}", summary.comparison_text);
    println!();
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let predictor = Predictor::from_path(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (headers, rows) = read_raw_csv(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let encoder = predictor.encoder().clone();
    let resolved = encoder.resolve_header(&headers)?;

    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    writer.write_record(["id", "score", "label"])?;
    for (i, record) in rows.iter().enumerate() {
        let row_number = i + 1;
        let features = encoder.encode_record(&resolved, record, row_number)?;
        let score = predictor.score_encoded(&features)?;
        let id = match resolved.id_col {
            Some(j) => record[j].clone(),
            None => row_number.to_string(),
        };
        writer.write_record([
            id,
            format!("{score}"),
            label_from_score(score).to_string(),
        ])?;
    }
    writer.flush()?;
    println!("scored {} row(s) into {}", rows.len(), args.out.display());
    Ok(())
}

/// Score every row of a labeled CSV, returning scores and true labels.
fn score_labeled_csv(predictor: &Predictor, input: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let (headers, rows) =
        read_raw_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let encoder = predictor.encoder();
    let resolved = encoder.resolve_header(&headers)?;
    let Some(label_col) = resolved.label_col else {
        bail!(
            "{} has no {:?} column to evaluate against",
            input.display(),
            encoder.label.column
        );
    };

    let mut scores = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    for (i, record) in rows.iter().enumerate() {
        let row_number = i + 1;
        let features = encoder.encode_record(&resolved, record, row_number)?;
        scores.push(predictor.score_encoded(&features)?);
        truth.push(encoder.encode_label(&record[label_col], row_number)?);
    }
    Ok((scores, truth))
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let predictor = Predictor::from_path(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (scores, truth) = score_labeled_csv(&predictor, &args.input)?;
    let report = EvalReport::from_scores(&scores, &truth)?;
    let text = format!(
        "{} model on {} ({} rows)\n\n{}",
        predictor.kind(),
        args.input.display(),
        truth.len(),
        render_metrics_text(&report)
    );
    print!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    let mut evaluated = Vec::new();
    for path in &args.models {
        let predictor = Predictor::from_path(path)
            .with_context(|| format!("loading model {}", path.display()))?;
        let (scores, truth) = score_labeled_csv(&predictor, &args.input)?;
        let report = EvalReport::from_scores(&scores, &truth)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| predictor.kind().to_string());
        evaluated.push((name, report));
    }
    let rows: Vec<(String, &EvalReport)> = evaluated
        .iter()
        .map(|(name, report)| (name.clone(), report))
        .collect();
    let table = render_comparison_table(&rows);
    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
