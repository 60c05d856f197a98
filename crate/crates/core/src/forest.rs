//! Random forest classification by soft voting.
//!
//! Each tree grows on its own bootstrap sample (n draws with replacement)
//! and considers a fresh uniform subset of features at every split —
//! `ceil(sqrt(p))` of them unless configured otherwise. A prediction is the
//! mean of the trees' leaf fractions, thresholded at 0.5 for a hard label.
//!
//! Tree `t` of a fit seeded with `s` always draws from the same RNG stream
//! `(s, Forest, t)`, so fits are reproducible even though the trees are
//! grown in parallel.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};
use crate::tree::{fit_tree, predict_tree, TreeConfig, TreeNode};

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// 0 grows every tree until no split helps.
    pub max_depth: usize,
    /// Features considered per split; `None` means `ceil(sqrt(p))`.
    pub feature_subset: Option<usize>,
    /// Draw n rows with replacement per tree; `false` uses all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 0,
            feature_subset: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if let Some(m) = self.feature_subset {
            if m == 0 || m > n_features {
                return Err(Error::InvalidConfig(format!(
                    "feature_subset {m} is outside 1..={n_features}"
                )));
            }
        }
        Ok(())
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
}

/// Grow `config.n_trees` Gini trees on bootstrap samples of `train`.
///
/// Requires both classes to be present: a one-class forest would answer a
/// constant and hide the fact that the data is degenerate.
pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    config.validate(train.n_features())?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (n0, n1) = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }

    let p = train.n_features();
    let mtry = config
        .feature_subset
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .min(p);
    let tree_config = TreeConfig {
        feature_subset: Some(mtry),
        ..TreeConfig::gini(match config.max_depth {
            0 => None,
            d => Some(d),
        })
    };

    let n = train.n_rows();
    let trees: Vec<TreeNode> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(config.seed, StreamDomain::Forest, t as u32);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(train, &rows, &tree_config, None, &mut rng)
        })
        .collect::<Result<_>>()?;

    Ok(ForestModel {
        trees,
        config: config.clone(),
        feature_names: train.feature_names().to_vec(),
    })
}

/// Mean of the trees' leaf fractions: the forest's class-1 probability.
pub fn predict_proba_forest(model: &ForestModel, row: &[f64]) -> Result<f64> {
    if row.len() != model.feature_names.len() {
        return Err(Error::FeatureCountMismatch {
            expected: model.feature_names.len(),
            found: row.len(),
        });
    }
    let mut sum = 0.0;
    for tree in &model.trees {
        sum += predict_tree(tree, row)?;
    }
    Ok(sum / model.trees.len() as f64)
}

/// Hard label: probability at or above 0.5 votes fraud.
pub fn predict_label_forest(model: &ForestModel, row: &[f64]) -> Result<u8> {
    Ok(u8::from(predict_proba_forest(model, row)? >= 0.5))
}
