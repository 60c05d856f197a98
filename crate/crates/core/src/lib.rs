//! Fraud detection for telecom call detail records.
//!
//! This crate takes a CSV of call records with a binary fraud label and
//! turns it into fitted models and evaluation artifacts:
//!
//! 1. [`ingest`] parses the CSV, infers or reads a column schema, drops
//!    rows with missing values, and encodes text columns to numbers.
//! 2. [`preprocess`] Min-Max scales features and makes a stratified
//!    train/test split.
//! 3. [`smote`] oversamples the minority class with synthetic rows
//!    interpolated between nearest neighbors.
//! 4. [`forest`] and [`boost`] fit the two tree ensembles — bagged trees
//!    with Gini splits, and Newton-boosted trees with a regularized
//!    second-order objective. [`cluster`] provides K-means and DBSCAN
//!    baselines.
//! 5. [`metrics`] computes confusion-matrix metrics and ROC/AUC.
//! 6. [`pipeline`] runs all of the above end to end and writes model
//!    files, reports, ROC point files, and a comparison table; [`model`]
//!    defines the model file format and a [`model::Predictor`] that
//!    replays a saved model on new rows.
//!
//! Every random choice derives from one seed through per-purpose RNG
//! streams ([`rng`]), so a run's artifacts are a deterministic function of
//! its input bytes and configuration. All numeric work is `f64`.

pub mod boost;
pub mod cluster;
pub mod data;
pub mod error;
pub mod forest;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod smote;
pub mod tree;

pub use boost::{fit_boosted, BoostConfig, BoostedModel};
pub use cluster::{
    dbscan_fit, kmeans_fit, ClusterAssignment, ClusterLabelMap, DbscanConfig, KMeansConfig,
};
pub use data::{CdrTable, ColumnKind, ColumnSpec, Dataset, RawValue};
pub use error::{Error, Result};
pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use ingest::{drop_missing, encode, load_csv, Encoder, Schema};
pub use metrics::{ConfusionMatrix, EvalReport, RocCurve};
pub use model::{load_model, save_model, ModelFile, ModelKind, Predictor};
pub use pipeline::{run_pipeline, LeakageMode, PipelineConfig, PipelineSummary};
pub use preprocess::{fit_scaler, split, transform, ScalerParams, SplitPair};
pub use smote::{balance, SmoteConfig};
pub use tree::{fit_tree, predict_tree, SplitCriterion, TreeConfig, TreeNode};
