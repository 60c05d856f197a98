//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context (column names, row numbers, paths) that a CLI can print
//! them verbatim without re-annotating.

use std::path::PathBuf;

use thiserror::Error;

/// Anything that can go wrong while loading data, fitting models, or
/// reading/writing artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    FileRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    FileWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    CsvParse(#[from] csv::Error),

    #[error("row {row} has {found} fields but the header has {expected}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: no data rows")]
    NoDataRows { path: PathBuf },

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("empty column name in header")]
    EmptyColumnName,

    #[error("no label column found; name one like \"fraud\" or designate it in a schema file")]
    NoLabelColumn,

    #[error("multiple label columns: {0:?}")]
    MultipleLabelColumns(Vec<String>),

    #[error("schema file names unknown column {0:?}")]
    UnknownSchemaColumn(String),

    #[error("schema file line {line}: expected `column = kind`, got {text:?}")]
    SchemaSyntax { line: usize, text: String },

    #[error("schema file line {line}: unknown column kind {kind:?} (expected numeric, categorical, identifier, or label)")]
    SchemaKind { line: usize, kind: String },

    #[error("all {0} data rows contain missing values")]
    AllRowsMissing(usize),

    #[error("label column {column:?} has {found} distinct values, expected exactly 2")]
    LabelCardinality { column: String, found: usize },

    #[error("cannot tell which value of label column {column:?} marks fraud: {values:?} occur equally often and neither looks like a positive marker")]
    AmbiguousLabel { column: String, values: [String; 2] },

    #[error("column {column:?}, row {row}: {value:?} is not a finite number")]
    NumericParse {
        column: String,
        row: usize,
        value: String,
    },

    #[error("column {column:?}, row {row}: value {value:?} was never seen during fitting")]
    UnseenCategory {
        column: String,
        row: usize,
        value: String,
    },

    #[error("input is missing column {0:?}")]
    MissingColumn(String),

    #[error("column {column:?}, row {row}: missing value")]
    MissingValue { column: String, row: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("expected {expected} features, got {found}")]
    FeatureCountMismatch { expected: usize, found: usize },

    #[error("feature value at row {row}, column {column} is not finite")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("class {label} has only {count} rows; need at least {need}")]
    ClassTooSmall {
        label: u8,
        count: usize,
        need: usize,
    },

    #[error("test fraction {0} is outside (0, 1)")]
    InvalidTestFraction(f64),

    #[error("only one class present")]
    SingleClass,

    #[error("row length mismatch: {left} vs {right}")]
    RowLengthMismatch { left: usize, right: usize },

    #[error("row {index} does not belong to the minority class")]
    NotMinorityRow { index: usize },

    #[error("gradients ({gradients}) and hessians ({hessians}) must both cover {rows} rows")]
    AuxAlignment {
        rows: usize,
        gradients: usize,
        hessians: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature index {feature} out of range for a row of length {len}")]
    FeatureIndexOutOfRange { feature: usize, len: usize },

    #[error("need at least {k} rows for {k} clusters, got {rows}")]
    TooFewRows { rows: usize, k: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("truth labels contain a single class; ROC is undefined")]
    SingleClassTruth,

    #[error("{path}: not a telfraud model file")]
    ModelMagic { path: PathBuf },

    #[error("{path}: unsupported model file version {found:?} (this build reads version {supported})")]
    ModelVersion {
        path: PathBuf,
        found: String,
        supported: u32,
    },

    #[error("{path}: checksum mismatch; the file is corrupt or truncated")]
    ChecksumMismatch { path: PathBuf },

    #[error("{path}: malformed model body: {source}")]
    ModelBody {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("cannot serialize model: {source}")]
    ModelEncode {
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed model: {0}")]
    ModelStructure(String),

    #[error("model does not match the input: {detail}")]
    ModelFeatureMismatch { detail: String },

    #[error("output directory {0} is locked by another run (delete the .telfraud.lock file if that run is gone)")]
    OutputLocked(PathBuf),

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown model name {0:?} (expected rf, xgb, kmeans, or dbscan)")]
    UnknownModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
