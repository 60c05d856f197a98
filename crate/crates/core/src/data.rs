//! Core data containers: raw call-record tables and numeric datasets.
//!
//! [`CdrTable`] holds what came out of the CSV — typed cells, column roles,
//! missing markers — while [`Dataset`] is the dense numeric matrix the
//! learners consume. The one-way trip from table to dataset happens in
//! [`crate::ingest`]; everything downstream of that only ever sees a
//! `Dataset`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Encoder;

/// The role a column plays during encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    /// Parsed as `f64` and kept as-is.
    Numeric,
    /// Integer-coded in order of first appearance (binary columns get 0/1).
    Categorical,
    /// Dropped from the feature matrix (phone numbers, account ids).
    Identifier,
    /// The binary target; exactly one per table.
    Label,
}

/// Name and role of one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// One cell of a raw table.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    Missing,
}

impl RawValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, RawValue::Missing)
    }
}

/// A parsed call-detail-record table: column specs plus row-major cells.
///
/// Invariants (checked at construction): every row has one cell per column,
/// column names are unique and non-empty, and exactly one column is the
/// label.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrTable {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<RawValue>>,
}

impl CdrTable {
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Vec<RawValue>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::EmptyColumnName);
            }
            if !seen.insert(col.name.clone()) {
                return Err(Error::DuplicateColumn(col.name.clone()));
            }
        }
        let labels: Vec<&ColumnSpec> = columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .collect();
        match labels.len() {
            0 => return Err(Error::NoLabelColumn),
            1 => {}
            _ => {
                return Err(Error::MultipleLabelColumns(
                    labels.iter().map(|c| c.name.clone()).collect(),
                ))
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RowArity {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(CdrTable { columns, rows })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<RawValue>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Index of the (unique) label column.
    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .expect("CdrTable invariant: exactly one label column")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Copy of this table keeping only the rows at `keep` (in order).
    pub(crate) fn retain_rows(&self, keep: &[usize]) -> CdrTable {
        CdrTable {
            columns: self.columns.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// A dense numeric dataset: row-major features, one binary label per row.
///
/// Feature values are always finite (checked at construction and whenever
/// rows are appended), labels are 0 or 1, and `feature_names` lines up with
/// the columns of the matrix. When the dataset came through the encoder, the
/// encoder rides along so trained models can replay the same encoding on
/// prediction input.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    encoder: Option<Encoder>,
}

impl Dataset {
    /// Build a dataset from per-row feature vectors.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::FeatureCountMismatch {
                    expected: n_features,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { row: i, column: j });
                }
                features.push(v);
            }
        }
        Self::from_flat(features, n_features, labels, feature_names)
    }

    /// Build a dataset from an already-flat row-major matrix.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.len() != n_features {
            return Err(Error::LengthMismatch {
                left: feature_names.len(),
                right: n_features,
            });
        }
        if n_features == 0 || labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len() * n_features,
            });
        }
        for (i, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    row: i / n_features,
                    column: i % n_features,
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} is not binary (expected 0 or 1)"
            )));
        }
        Ok(Dataset {
            features,
            n_features,
            labels,
            feature_names,
            encoder: None,
        })
    }

    /// Convenience for tests: names the columns `f0`, `f1`, ...
    pub fn unnamed(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (0..p).map(|j| format!("f{j}")).collect();
        Self::new(rows, labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoder(&self) -> Option<&Encoder> {
        self.encoder.as_ref()
    }

    pub fn set_encoder(&mut self, encoder: Encoder) {
        self.encoder = Some(encoder);
    }

    /// `(rows with label 0, rows with label 1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    /// Row indices carrying `label`, in ascending order.
    pub fn class_indices(&self, label: u8) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    /// Append one row; the new row must match the feature count and be finite.
    pub fn push_row(&mut self, row: &[f64], label: u8) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::FeatureCountMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: self.n_rows(),
                column: j,
            });
        }
        if label > 1 {
            return Err(Error::InvalidConfig(format!(
                "label {label} is not binary (expected 0 or 1)"
            )));
        }
        self.features.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
            encoder: self.encoder.clone(),
        }
    }

    /// `(min, max)` of column `j` over all rows.
    pub fn column_min_max(&self, j: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n_rows() {
            let v = self.row(i)[j];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// SHA-256 over the exact bit patterns of the matrix and labels.
    ///
    /// Two datasets fingerprint equally iff they hold bit-identical values in
    /// the same order, which is what the model-file metadata records.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_features as u64).to_le_bytes());
        for v in &self.features {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(&self.labels);
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}
