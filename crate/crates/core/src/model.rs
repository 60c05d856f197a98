//! Model file format and the predictor that replays a saved model.
//!
//! A model file is a short text envelope around a pretty-printed JSON body:
//!
//! ```text
//! telfraud-model v1
//! created: 2026-01-05T09:30:00Z
//! sha256: <hex digest of the body bytes>
//!
//! { ... }
//! ```
//!
//! The checksum covers only the body, so two saves of the same model differ
//! in nothing but the `created:` line. The body carries everything needed
//! to score a raw CSV: the encoder, the scaler, and the model itself, with
//! trees flattened to pre-order node lists. All floats are written in
//! shortest round-trip form, so a loaded model predicts bit-identically to
//! the one that was saved.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boost::BoostConfig;
use crate::cluster::{ClusterLabelMap, DbscanConfig, KMeansConfig, nearest_centroid};
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::ingest::Encoder;
use crate::preprocess::ScalerParams;
use crate::tree::{predict_tree, TreeNode};

pub const MODEL_MAGIC: &str = "telfraud-model";
pub const MODEL_VERSION: u32 = 1;

/// Which learner a model file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Xgb,
    Kmeans,
    Dbscan,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelKind::Rf => "rf",
            ModelKind::Xgb => "xgb",
            ModelKind::Kmeans => "kmeans",
            ModelKind::Dbscan => "dbscan",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" => Ok(ModelKind::Rf),
            "xgb" => Ok(ModelKind::Xgb),
            "kmeans" => Ok(ModelKind::Kmeans),
            "dbscan" => Ok(ModelKind::Dbscan),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

/// One tree node in pre-order serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum FlatNode {
    Split { feature: usize, threshold: f64 },
    Leaf { value: f64 },
}

/// Flatten a tree to its pre-order node list (node, left subtree, right).
pub fn tree_to_flat(tree: &TreeNode) -> Vec<FlatNode> {
    fn push(node: &TreeNode, out: &mut Vec<FlatNode>) {
        match node {
            TreeNode::Leaf { value } => out.push(FlatNode::Leaf { value: *value }),
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(FlatNode::Split {
                    feature: *feature,
                    threshold: *threshold,
                });
                push(left, out);
                push(right, out);
            }
        }
    }
    let mut out = Vec::new();
    push(tree, &mut out);
    out
}

/// Rebuild a tree from its pre-order node list.
pub fn tree_from_flat(nodes: &[FlatNode]) -> Result<TreeNode> {
    fn read(nodes: &[FlatNode], pos: &mut usize) -> Result<TreeNode> {
        let node = nodes
            .get(*pos)
            .ok_or_else(|| Error::ModelStructure("tree node list is truncated".into()))?;
        *pos += 1;
        match node {
            FlatNode::Leaf { value } => Ok(TreeNode::Leaf { value: *value }),
            FlatNode::Split { feature, threshold } => {
                let left = Box::new(read(nodes, pos)?);
                let right = Box::new(read(nodes, pos)?);
                Ok(TreeNode::Internal {
                    feature: *feature,
                    threshold: *threshold,
                    left,
                    right,
                })
            }
        }
    }
    let mut pos = 0;
    let root = read(nodes, &mut pos)?;
    if pos != nodes.len() {
        return Err(Error::ModelStructure(format!(
            "tree node list has {} trailing nodes",
            nodes.len() - pos
        )));
    }
    Ok(root)
}

/// Fitted scaler range for one named feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerEntry {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Provenance a model carries about the run that trained it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// Leakage mode the pipeline ran in (`clean` or `paper-faithful`).
    pub mode: String,
    /// Fingerprint of the training matrix exactly as fitted (after
    /// scaling and oversampling), so retraining on the same data is
    /// recognizable without the data.
    pub dataset_fingerprint: String,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Oversampled rows added to the training side.
    pub synthetic_rows: usize,
}

/// The model-specific part of a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelPayload {
    Rf {
        config: ForestConfig,
        trees: Vec<Vec<FlatNode>>,
    },
    Xgb {
        config: BoostConfig,
        base_margin: f64,
        trees: Vec<Vec<FlatNode>>,
    },
    Kmeans {
        config: KMeansConfig,
        centroids: Vec<Vec<f64>>,
        label_map: ClusterLabelMap,
    },
    Dbscan {
        config: DbscanConfig,
        /// Scaled feature rows of the core points, with their cluster ids.
        core_rows: Vec<Vec<f64>>,
        core_clusters: Vec<usize>,
        label_map: ClusterLabelMap,
    },
}

impl ModelPayload {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelPayload::Rf { .. } => ModelKind::Rf,
            ModelPayload::Xgb { .. } => ModelKind::Xgb,
            ModelPayload::Kmeans { .. } => ModelKind::Kmeans,
            ModelPayload::Dbscan { .. } => ModelKind::Dbscan,
        }
    }
}

/// Everything a saved model knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub feature_names: Vec<String>,
    pub scaler: Vec<ScalerEntry>,
    pub encoder: Encoder,
    pub metadata: TrainingMetadata,
    pub payload: ModelPayload,
}

impl ModelFile {
    pub fn kind(&self) -> ModelKind {
        self.payload.kind()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Write `file` to `path` in the enveloped format.
pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(file).map_err(|source| Error::ModelEncode { source })?;
    let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let text = format!(
        "{MODEL_MAGIC} v{MODEL_VERSION}\ncreated: {created}\nsha256: {}\n\n{body}\n",
        sha256_hex(body.as_bytes())
    );
    std::fs::write(path, text).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })
}

/// Read and verify a model file.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.splitn(4, '\n');
    let magic_line = lines.next().unwrap_or("");
    let created_line = lines.next().unwrap_or("");
    let sha_line = lines.next().unwrap_or("");
    let rest = lines.next().unwrap_or("");

    let Some(version) = magic_line.strip_prefix(MODEL_MAGIC).map(str::trim) else {
        return Err(Error::ModelMagic {
            path: path.to_path_buf(),
        });
    };
    if version != format!("v{MODEL_VERSION}") {
        return Err(Error::ModelVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            supported: MODEL_VERSION,
        });
    }
    if !created_line.starts_with("created: ") {
        return Err(Error::ModelMagic {
            path: path.to_path_buf(),
        });
    }
    let Some(expected_sha) = sha_line.strip_prefix("sha256: ") else {
        return Err(Error::ModelMagic {
            path: path.to_path_buf(),
        });
    };

    // The body is everything after the blank separator line, minus the
    // final newline added at save.
    let body = rest
        .strip_prefix('\n')
        .unwrap_or(rest)
        .strip_suffix('\n')
        .unwrap_or(rest);
    if sha256_hex(body.as_bytes()) != expected_sha.trim() {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
        });
    }
    serde_json::from_str(body).map_err(|source| Error::ModelBody {
        path: path.to_path_buf(),
        source,
    })
}

enum Scorer {
    Forest {
        trees: Vec<TreeNode>,
    },
    Boosted {
        trees: Vec<TreeNode>,
        base_margin: f64,
    },
    KMeans {
        centroids: Vec<Vec<f64>>,
        map: ClusterLabelMap,
    },
    Dbscan {
        core_rows: Vec<Vec<f64>>,
        core_clusters: Vec<usize>,
        eps: f64,
        map: ClusterLabelMap,
    },
}

/// A loaded model, validated and ready to score rows.
///
/// Scores are fraud probabilities for the tree ensembles and hard 0/1
/// labels for the clustering baselines; either way `score >= 0.5` reads as
/// "flag this row".
pub struct Predictor {
    feature_names: Vec<String>,
    scaler: ScalerParams,
    encoder: Encoder,
    kind: ModelKind,
    scorer: Scorer,
}

fn check_tree_features(trees: &[Vec<FlatNode>], p: usize) -> Result<()> {
    for flat in trees {
        for node in flat {
            if let FlatNode::Split { feature, .. } = node {
                if *feature >= p {
                    return Err(Error::ModelStructure(format!(
                        "tree tests feature {feature} but the model has {p} features"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl Predictor {
    /// Validate a loaded file and prepare it for scoring.
    pub fn new(file: ModelFile) -> Result<Self> {
        let p = file.feature_names.len();
        if file.scaler.len() != p {
            return Err(Error::ModelStructure(format!(
                "scaler covers {} features, model names {p}",
                file.scaler.len()
            )));
        }
        let encoder_names = file.encoder.feature_names();
        if encoder_names != file.feature_names {
            return Err(Error::ModelStructure(
                "encoder columns do not match the model's feature names".into(),
            ));
        }
        for (entry, name) in file.scaler.iter().zip(&file.feature_names) {
            if &entry.name != name {
                return Err(Error::ModelStructure(format!(
                    "scaler entry {:?} out of order with feature {:?}",
                    entry.name, name
                )));
            }
        }

        let kind = file.kind();
        let scorer = match &file.payload {
            ModelPayload::Rf { trees, .. } => {
                check_tree_features(trees, p)?;
                if trees.is_empty() {
                    return Err(Error::ModelStructure("forest holds no trees".into()));
                }
                Scorer::Forest {
                    trees: trees.iter().map(|t| tree_from_flat(t)).collect::<Result<_>>()?,
                }
            }
            ModelPayload::Xgb {
                config,
                base_margin,
                trees,
            } => {
                check_tree_features(trees, p)?;
                let _ = config;
                Scorer::Boosted {
                    trees: trees.iter().map(|t| tree_from_flat(t)).collect::<Result<_>>()?,
                    base_margin: *base_margin,
                }
            }
            ModelPayload::Kmeans {
                centroids,
                label_map,
                ..
            } => {
                if centroids.is_empty() || centroids.iter().any(|c| c.len() != p) {
                    return Err(Error::ModelStructure(
                        "centroid width does not match the feature count".into(),
                    ));
                }
                if label_map.cluster_labels.len() != centroids.len() {
                    return Err(Error::ModelStructure(
                        "label map does not cover every centroid".into(),
                    ));
                }
                Scorer::KMeans {
                    centroids: centroids.clone(),
                    map: label_map.clone(),
                }
            }
            ModelPayload::Dbscan {
                config,
                core_rows,
                core_clusters,
                label_map,
            } => {
                if core_rows.iter().any(|r| r.len() != p) {
                    return Err(Error::ModelStructure(
                        "core row width does not match the feature count".into(),
                    ));
                }
                if core_rows.len() != core_clusters.len() {
                    return Err(Error::ModelStructure(
                        "core rows and cluster ids differ in length".into(),
                    ));
                }
                if core_clusters
                    .iter()
                    .any(|&c| c >= label_map.cluster_labels.len())
                {
                    return Err(Error::ModelStructure(
                        "core cluster id outside the label map".into(),
                    ));
                }
                Scorer::Dbscan {
                    core_rows: core_rows.clone(),
                    core_clusters: core_clusters.clone(),
                    eps: config.eps,
                    map: label_map.clone(),
                }
            }
        };

        Ok(Predictor {
            feature_names: file.feature_names.clone(),
            scaler: ScalerParams {
                ranges: file.scaler.iter().map(|e| (e.min, e.max)).collect(),
            },
            encoder: file.encoder.clone(),
            kind,
            scorer,
        })
    }

    /// Load from disk: [`load_model`] followed by validation.
    pub fn from_path(path: &Path) -> Result<Self> {
        Predictor::new(load_model(path)?)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Score an encoded-but-unscaled row (what the encoder produces).
    pub fn score_encoded(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_names.len(),
                found: row.len(),
            });
        }
        let scaled: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, &v)| self.scaler.transform_value(j, v))
            .collect();
        self.score_scaled(&scaled)
    }

    /// Score a row already in the model's scaled feature space.
    pub fn score_scaled(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_names.len(),
                found: row.len(),
            });
        }
        match &self.scorer {
            Scorer::Forest { trees } => {
                let mut sum = 0.0;
                for t in trees {
                    sum += predict_tree(t, row)?;
                }
                Ok(sum / trees.len() as f64)
            }
            Scorer::Boosted { trees, base_margin } => {
                let mut margin = *base_margin;
                for t in trees {
                    margin += predict_tree(t, row)?;
                }
                Ok(crate::boost::sigmoid(margin))
            }
            Scorer::KMeans { centroids, map } => {
                let c = nearest_centroid(row, centroids);
                Ok(f64::from(map.cluster_labels[c]))
            }
            Scorer::Dbscan {
                core_rows,
                core_clusters,
                eps,
                map,
            } => {
                let eps2 = eps * eps;
                let mut best: Option<(f64, usize)> = None;
                for (i, core) in core_rows.iter().enumerate() {
                    let d: f64 = core
                        .iter()
                        .zip(row)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d <= eps2 && best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                Ok(match best {
                    Some((_, i)) => f64::from(map.cluster_labels[core_clusters[i]]),
                    None => f64::from(map.noise_label),
                })
            }
        }
    }
}

/// Threshold a score the way the trainer does: 0.5 and above flags fraud.
pub fn label_from_score(score: f64) -> u8 {
    u8::from(score >= 0.5)
}
