//! The end-to-end batch pipeline: raw CSV in, fitted models and reports out.
//!
//! [`run_pipeline`] strings the other modules together — load, drop rows
//! with missing values, encode, split, scale, oversample, fit every
//! requested model, evaluate on the held-out rows — and writes one model
//! file, one report (text and JSON), and one ROC point file per model,
//! plus a comparison table across models.
//!
//! Two orderings are supported. `clean` (the default) splits first and
//! fits the scaler and the oversampler on training rows only, so nothing
//! about the held-out rows can leak into the fit. `paper-faithful`
//! oversamples the whole dataset *before* splitting, which lets synthetic
//! minority rows land in the test set; published fraud-detection results
//! are often computed this way, and running both modes side by side shows
//! how much that inflates the numbers.
//!
//! Everything the pipeline writes is a deterministic function of the input
//! bytes, the configuration, and the seed — except the `created:` line in
//! model files, which is the only timestamp anywhere.

use std::fmt;
use std::fs::OpenOptions;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::{fit_boosted, predict_proba_boosted, BoostConfig};
use crate::cluster::{
    dbscan_assign, dbscan_fit, fit_label_map, kmeans_fit, nearest_centroid, DbscanConfig,
    KMeansConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, predict_proba_forest, ForestConfig};
use crate::ingest::{drop_missing, encode, load_csv, Schema};
use crate::metrics::{fmt_opt_metric, EvalReport};
use crate::model::{
    save_model, tree_to_flat, ModelFile, ModelKind, ModelPayload, ScalerEntry, TrainingMetadata,
};
use crate::preprocess::{fit_scaler, split, transform, ScalerParams};
use crate::smote::{balance, SmoteConfig};

/// Where resampling sits relative to the train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageMode {
    /// Split first; scaler and oversampler see training rows only.
    Clean,
    /// Oversample the full dataset, then split. Synthetic rows (and scaler
    /// statistics) straddle the boundary, mimicking how headline results
    /// are often produced. For comparison, not for deployment.
    PaperFaithful,
}

impl fmt::Display for LeakageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeakageMode::Clean => "clean",
            LeakageMode::PaperFaithful => "paper-faithful",
        })
    }
}

impl std::str::FromStr for LeakageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "clean" => Ok(LeakageMode::Clean),
            "paper-faithful" => Ok(LeakageMode::PaperFaithful),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected clean or paper-faithful)"
            ))),
        }
    }
}

/// Everything one training run needs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// CSV file to train on.
    pub input: PathBuf,
    /// Optional schema file overriding per-column type inference.
    pub schema: Option<PathBuf>,
    /// Fraction of each class held out for evaluation.
    pub test_fraction: f64,
    /// Master seed; every random choice in the run derives from it.
    pub seed: u64,
    /// Which models to fit, in the order their artifacts are written.
    pub models: Vec<ModelKind>,
    pub mode: LeakageMode,
    /// Directory the artifacts land in; created if absent.
    pub out_dir: PathBuf,
    pub smote: SmoteConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
    pub kmeans: KMeansConfig,
    pub dbscan: DbscanConfig,
}

impl PipelineConfig {
    /// A default run: train RF and XGB on `input`, write under `out_dir`.
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            schema: None,
            test_fraction: 0.2,
            seed: 42,
            models: vec![ModelKind::Rf, ModelKind::Xgb],
            mode: LeakageMode::Clean,
            out_dir: out_dir.into(),
            smote: SmoteConfig::default(),
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
            kmeans: KMeansConfig::default(),
            dbscan: DbscanConfig {
                eps: 0.3,
                min_pts: 5,
            },
        }
    }

    /// Check the run makes sense and pin every sub-seed to the master seed,
    /// so one `--seed` flag governs the whole run.
    fn normalized(&self) -> Result<PipelineConfig> {
        if self.models.is_empty() {
            return Err(Error::InvalidConfig(
                "no models selected; pick at least one of rf, xgb, kmeans, dbscan".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidTestFraction(self.test_fraction));
        }
        let mut config = self.clone();
        config.models.clear();
        for &kind in &self.models {
            if !config.models.contains(&kind) {
                config.models.push(kind);
            }
        }
        config.smote.seed = config.seed;
        config.forest.seed = config.seed;
        config.boost.seed = config.seed;
        config.kmeans.seed = config.seed;
        Ok(config)
    }
}

/// What one fitted model did on the held-out rows, and where its files are.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub report: EvalReport,
    pub model_path: PathBuf,
    pub report_text_path: PathBuf,
    pub report_json_path: PathBuf,
    pub roc_path: PathBuf,
}

/// The complete result of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub mode: LeakageMode,
    pub seed: u64,
    pub rows_loaded: usize,
    pub rows_dropped: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub synthetic_rows: usize,
    /// The scaler the models were fitted under (fitted on training rows
    /// only in clean mode).
    pub scaler: ScalerParams,
    pub outcomes: Vec<ModelOutcome>,
    pub comparison_path: PathBuf,
    /// The comparison table, ready to print.
    pub comparison_text: String,
}

/// Exclusive claim on the output directory for the duration of a run.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock> {
        std::fs::create_dir_all(dir).map_err(|source| Error::FileWrite {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(".telfraud.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                Err(Error::OutputLocked(dir.to_path_buf()))
            }
            Err(source) => Err(Error::FileWrite { path, source }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Tracks files written during a run so a failed run leaves nothing behind.
struct ArtifactSet {
    paths: Vec<PathBuf>,
    keep: bool,
}

impl ArtifactSet {
    fn new() -> ArtifactSet {
        ArtifactSet {
            paths: Vec::new(),
            keep: false,
        }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.paths.push(path.to_path_buf());
        std::fs::write(path, contents).map_err(|source| Error::FileWrite {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Record a file some other code wrote, so it is still cleaned up.
    fn adopt(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }
}

impl Drop for ArtifactSet {
    fn drop(&mut self) {
        if !self.keep {
            for path in &self.paths {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

/// One model fitted and scored, before its files are written.
struct Fitted {
    payload: ModelPayload,
    /// Fraud score per test row (probability for the ensembles, hard 0/1
    /// for the clustering baselines).
    scores: Vec<f64>,
    objective_trace: Option<Vec<f64>>,
    inertia_trace: Option<Vec<f64>>,
    n_clusters: Option<usize>,
    noise_rows: Option<usize>,
}

fn fit_one(kind: ModelKind, train: &Dataset, test: &Dataset, config: &PipelineConfig) -> Result<Fitted> {
    match kind {
        ModelKind::Rf => {
            let model = fit_forest(train, &config.forest)?;
            let scores = (0..test.n_rows())
                .map(|i| predict_proba_forest(&model, test.row(i)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Fitted {
                payload: ModelPayload::Rf {
                    config: model.config.clone(),
                    trees: model.trees.iter().map(tree_to_flat).collect(),
                },
                scores,
                objective_trace: None,
                inertia_trace: None,
                n_clusters: None,
                noise_rows: None,
            })
        }
        ModelKind::Xgb => {
            let model = fit_boosted(train, &config.boost)?;
            let scores = (0..test.n_rows())
                .map(|i| predict_proba_boosted(&model, test.row(i)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Fitted {
                payload: ModelPayload::Xgb {
                    config: model.config.clone(),
                    base_margin: model.base_margin(),
                    trees: model.trees.iter().map(tree_to_flat).collect(),
                },
                scores,
                objective_trace: Some(model.objective_trace.clone()),
                inertia_trace: None,
                n_clusters: None,
                noise_rows: None,
            })
        }
        ModelKind::Kmeans => {
            let assignment = kmeans_fit(train, &config.kmeans)?;
            let map = fit_label_map(&assignment, train.labels())?;
            let centroids = assignment
                .centroids
                .clone()
                .expect("a k-means fit always carries centroids");
            let scores = (0..test.n_rows())
                .map(|i| {
                    let c = nearest_centroid(test.row(i), &centroids);
                    f64::from(map.cluster_labels[c])
                })
                .collect();
            Ok(Fitted {
                payload: ModelPayload::Kmeans {
                    config: config.kmeans.clone(),
                    centroids,
                    label_map: map,
                },
                scores,
                objective_trace: None,
                inertia_trace: assignment.inertia_trace.clone(),
                n_clusters: Some(assignment.n_clusters),
                noise_rows: None,
            })
        }
        ModelKind::Dbscan => {
            let assignment = dbscan_fit(train, &config.dbscan)?;
            let map = fit_label_map(&assignment, train.labels())?;
            let core = assignment
                .core
                .as_ref()
                .expect("a DBSCAN fit always carries core flags");
            let mut core_rows = Vec::new();
            let mut core_clusters = Vec::new();
            for i in 0..train.n_rows() {
                if core[i] {
                    core_rows.push(train.row(i).to_vec());
                    core_clusters
                        .push(assignment.labels[i].expect("core points are always labeled"));
                }
            }
            let noise = assignment.labels.iter().filter(|l| l.is_none()).count();
            let scores = (0..test.n_rows())
                .map(|i| {
                    let cluster = dbscan_assign(train, &assignment, &config.dbscan, test.row(i))?;
                    Ok(f64::from(match cluster {
                        Some(c) => map.cluster_labels[c],
                        None => map.noise_label,
                    }))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Fitted {
                payload: ModelPayload::Dbscan {
                    config: config.dbscan.clone(),
                    core_rows,
                    core_clusters,
                    label_map: map,
                },
                scores,
                objective_trace: None,
                inertia_trace: None,
                n_clusters: Some(assignment.n_clusters),
                noise_rows: Some(noise),
            })
        }
    }
}

fn fit_stage_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Rf => "fit rf",
        ModelKind::Xgb => "fit xgb",
        ModelKind::Kmeans => "fit kmeans",
        ModelKind::Dbscan => "fit dbscan",
    }
}

/// Machine-readable report written next to each model.
#[derive(Debug, Serialize)]
struct ReportDoc<'a> {
    model: ModelKind,
    mode: LeakageMode,
    seed: u64,
    training_fingerprint: &'a str,
    rows_loaded: usize,
    rows_dropped: usize,
    train_rows: usize,
    test_rows: usize,
    synthetic_rows: usize,
    evaluation: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_trace: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inertia_trace: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_rows: Option<usize>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn pct_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), pct)
}

/// The confusion matrix and scalar metrics of one evaluation, as text.
/// Metrics appear at full precision next to the customary one-decimal
/// percentage rendering.
pub fn render_metrics_text(e: &EvalReport) -> String {
    let mut out = String::new();
    let c = &e.confusion;
    out.push_str("confusion matrix (scores thresholded at 0.5)\n");
    out.push_str("                  predicted fraud   predicted legit\n");
    out.push_str(&format!(
        "  actual fraud    {:>15}   {:>15}\n",
        c.true_positive, c.false_negative
    ));
    out.push_str(&format!(
        "  actual legit    {:>15}   {:>15}\n",
        c.false_positive, c.true_negative
    ));
    out.push('\n');
    out.push_str("metric      full value              percent\n");
    out.push_str(&format!(
        "accuracy    {:<22}  {}\n",
        e.accuracy,
        pct(e.accuracy)
    ));
    out.push_str(&format!(
        "precision   {:<22}  {}\n",
        fmt_opt_metric(e.precision),
        pct_opt(e.precision)
    ));
    out.push_str(&format!(
        "recall      {:<22}  {}\n",
        fmt_opt_metric(e.recall),
        pct_opt(e.recall)
    ));
    out.push_str(&format!(
        "f1          {:<22}  {}\n",
        fmt_opt_metric(e.f1),
        pct_opt(e.f1)
    ));
    out.push_str(&format!("auc         {:<22}\n", e.auc));
    out
}

fn render_report_text(doc: &ReportDoc<'_>) -> String {
    let mut out = String::new();
    let e = doc.evaluation;
    out.push_str("telfraud evaluation report\n");
    out.push_str(&format!("model: {}\n", doc.model));
    out.push_str(&format!("mode: {}\n", doc.mode));
    out.push_str(&format!("seed: {}\n", doc.seed));
    out.push_str(&format!("training fingerprint: {}\n", doc.training_fingerprint));
    out.push_str(&format!(
        "rows: {} loaded ({} dropped for missing values), {} train (of which {} synthetic), {} test\n",
        doc.rows_loaded, doc.rows_dropped, doc.train_rows, doc.synthetic_rows, doc.test_rows
    ));
    out.push('\n');
    out.push_str(&render_metrics_text(e));

    if let Some(trace) = doc.objective_trace {
        let last = trace.last().copied().unwrap_or(f64::NAN);
        out.push('\n');
        out.push_str(&format!(
            "training objective: {} at round 0, {} after {} boosted tree(s)\n",
            trace.first().copied().unwrap_or(f64::NAN),
            last,
            trace.len().saturating_sub(1),
        ));
        out.push_str("(full per-round trace in the JSON report)\n");
    }
    if let Some(trace) = doc.inertia_trace {
        out.push('\n');
        out.push_str(&format!(
            "inertia: {} after seeding, {} at convergence ({} assignment pass(es))\n",
            trace.first().copied().unwrap_or(f64::NAN),
            trace.last().copied().unwrap_or(f64::NAN),
            trace.len(),
        ));
    }
    if let Some(n) = doc.n_clusters {
        out.push('\n');
        out.push_str(&format!("clusters found: {n}\n"));
    }
    if let Some(noise) = doc.noise_rows {
        out.push_str(&format!("training rows labeled noise: {noise}\n"));
    }
    out
}

fn render_roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    out
}

/// One table row per named evaluation, shaped like a published comparison
/// table: one-decimal percentages for the four threshold metrics, plus AUC.
pub fn render_comparison_table(rows: &[(String, &EvalReport)]) -> String {
    let name_width = rows
        .iter()
        .map(|(name, _)| name.len())
        .chain([8])
        .max()
        .unwrap_or(8);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>7}\n",
        "model", "accuracy", "precision", "recall", "f1", "auc"
    ));
    for (name, e) in rows {
        out.push_str(&format!(
            "{name:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>7.4}\n",
            pct(e.accuracy),
            pct_opt(e.precision),
            pct_opt(e.recall),
            pct_opt(e.f1),
            e.auc,
        ));
    }
    out
}

/// The comparison table for one pipeline run's outcomes.
pub fn render_comparison(outcomes: &[ModelOutcome]) -> String {
    let rows: Vec<(String, &EvalReport)> = outcomes
        .iter()
        .map(|o| (o.kind.to_string(), &o.report))
        .collect();
    render_comparison_table(&rows)
}

/// Run the whole pipeline and write every artifact under `config.out_dir`.
///
/// On error, any files already written by this run are removed, so the
/// output directory never holds a half-finished run. The directory is
/// locked (via a `.telfraud.lock` file) while the run is in flight.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineSummary> {
    let config = config.normalized()?;
    let _lock = DirLock::acquire(&config.out_dir)?;
    let mut artifacts = ArtifactSet::new();

    // Load and clean.
    let schema = match &config.schema {
        Some(path) => Schema::from_file(path).map_err(|e| e.in_stage("load"))?,
        None => Schema::Infer,
    };
    let table = load_csv(&config.input, &schema).map_err(|e| e.in_stage("load"))?;
    let rows_loaded = table.n_rows();
    let (table, rows_dropped) = drop_missing(&table).map_err(|e| e.in_stage("load"))?;

    // Encode to a numeric matrix.
    let data = encode(&table).map_err(|e| e.in_stage("encode"))?;
    let encoder = data
        .encoder()
        .cloned()
        .expect("encode() always attaches the encoder it fitted");

    // Split, scale, and oversample — in the order the mode dictates.
    let (train, test, scaler, synthetic_rows) = match config.mode {
        LeakageMode::Clean => {
            let pair =
                split(&data, config.test_fraction, config.seed).map_err(|e| e.in_stage("split"))?;
            let scaler = fit_scaler(&pair.train).map_err(|e| e.in_stage("scale"))?;
            let train_scaled = transform(&pair.train, &scaler).map_err(|e| e.in_stage("scale"))?;
            let test_scaled = transform(&pair.test, &scaler).map_err(|e| e.in_stage("scale"))?;
            let balanced =
                balance(&train_scaled, &config.smote).map_err(|e| e.in_stage("balance"))?;
            let synthetic = balanced.n_rows() - train_scaled.n_rows();
            (balanced, test_scaled, scaler, synthetic)
        }
        LeakageMode::PaperFaithful => {
            let scaler = fit_scaler(&data).map_err(|e| e.in_stage("scale"))?;
            let scaled = transform(&data, &scaler).map_err(|e| e.in_stage("scale"))?;
            let balanced = balance(&scaled, &config.smote).map_err(|e| e.in_stage("balance"))?;
            let synthetic = balanced.n_rows() - scaled.n_rows();
            let pair = split(&balanced, config.test_fraction, config.seed)
                .map_err(|e| e.in_stage("split"))?;
            (pair.train, pair.test, scaler, synthetic)
        }
    };

    let feature_names = data.feature_names().to_vec();
    let training_fingerprint = train.fingerprint();
    let metadata = TrainingMetadata {
        seed: config.seed,
        mode: config.mode.to_string(),
        dataset_fingerprint: training_fingerprint.clone(),
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        synthetic_rows,
    };
    let scaler_entries: Vec<ScalerEntry> = feature_names
        .iter()
        .zip(&scaler.ranges)
        .map(|(name, &(min, max))| ScalerEntry {
            name: name.clone(),
            min,
            max,
        })
        .collect();

    // Fit, evaluate, and persist each model.
    let mut outcomes = Vec::new();
    for &kind in &config.models {
        let fitted =
            fit_one(kind, &train, &test, &config).map_err(|e| e.in_stage(fit_stage_name(kind)))?;
        let report = EvalReport::from_scores(&fitted.scores, test.labels())
            .map_err(|e| e.in_stage("evaluate"))?;

        let model_file = ModelFile {
            feature_names: feature_names.clone(),
            scaler: scaler_entries.clone(),
            encoder: encoder.clone(),
            metadata: metadata.clone(),
            payload: fitted.payload,
        };
        let model_path = config.out_dir.join(format!("{kind}.model"));
        artifacts.adopt(&model_path);
        save_model(&model_file, &model_path).map_err(|e| e.in_stage("write"))?;

        let doc = ReportDoc {
            model: kind,
            mode: config.mode,
            seed: config.seed,
            training_fingerprint: &training_fingerprint,
            rows_loaded,
            rows_dropped,
            train_rows: train.n_rows(),
            test_rows: test.n_rows(),
            synthetic_rows,
            evaluation: &report,
            objective_trace: fitted.objective_trace.as_deref(),
            inertia_trace: fitted.inertia_trace.as_deref(),
            n_clusters: fitted.n_clusters,
            noise_rows: fitted.noise_rows,
        };
        let report_text_path = config.out_dir.join(format!("{kind}.report.txt"));
        artifacts.write(&report_text_path, &render_report_text(&doc))?;
        let report_json_path = config.out_dir.join(format!("{kind}.report.json"));
        let json = serde_json::to_string_pretty(&doc)
            .map_err(|source| Error::ModelEncode { source })?;
        artifacts.write(&report_json_path, &format!("{json}\n"))?;
        let roc_path = config.out_dir.join(format!("{kind}.roc.csv"));
        artifacts.write(&roc_path, &render_roc_csv(&report.roc_points))?;

        outcomes.push(ModelOutcome {
            kind,
            report,
            model_path,
            report_text_path,
            report_json_path,
            roc_path,
        });
    }

    let comparison_text = render_comparison(&outcomes);
    let comparison_path = config.out_dir.join("comparison.txt");
    artifacts.write(&comparison_path, &comparison_text)?;

    artifacts.keep = true;
    Ok(PipelineSummary {
        mode: config.mode,
        seed: config.seed,
        rows_loaded,
        rows_dropped,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        synthetic_rows,
        scaler,
        outcomes,
        comparison_path,
        comparison_text,
    })
}
