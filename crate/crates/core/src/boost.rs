//! Gradient-boosted trees with second-order (Newton) steps on logistic loss.
//!
//! Each round fits a regression tree to the per-row first and second
//! derivatives of the loss at the current margins, shrinks its leaf weights
//! by the learning rate, and adds it to the ensemble. Leaf weights solve the
//! regularized per-leaf objective, `w* = -G / (H + lambda)`, and splits pay
//! a flat `gamma` per extra leaf, so a heavily regularized fit can
//! legitimately decide that no tree is worth growing at all.
//!
//! Shrinkage is folded into the stored leaf values: what the model keeps is
//! exactly what prediction adds up.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};
use crate::tree::{fit_tree, predict_tree, TreeConfig, TreeNode};

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_rounds: usize,
    /// Shrinkage applied to every leaf weight, in (0, 1].
    pub learning_rate: f64,
    /// Depth cap per tree; must be >= 1.
    pub max_depth: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Flat penalty per leaf, charged against every split's gain.
    pub gamma: f64,
    /// Prior fraud probability before any tree votes, in (0, 1).
    pub base_score: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            base_score: 0.5,
            seed: 42,
        }
    }
}

impl BoostConfig {
    fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::InvalidConfig("n_rounds must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} is outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "max_depth must be >= 1 for boosting".into(),
            ));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma {} must be finite and >= 0",
                self.gamma
            )));
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "base_score {} is outside (0, 1)",
                self.base_score
            )));
        }
        Ok(())
    }
}

/// A fitted boosted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    /// Trees with shrinkage already applied to their leaves.
    pub trees: Vec<TreeNode>,
    pub config: BoostConfig,
    pub feature_names: Vec<String>,
    /// Regularized training objective before any tree, then after each
    /// round: `sum of losses + sum of omega over stored trees`.
    pub objective_trace: Vec<f64>,
}

impl BoostedModel {
    /// The constant margin every prediction starts from:
    /// `logit(base_score)`.
    pub fn base_margin(&self) -> f64 {
        logit(self.config.base_score)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic loss of one row at the given margin: the quantity (summed over
/// rows, plus the penalty term) that [`BoostedModel::objective_trace`]
/// records round by round.
pub fn logistic_loss(margin: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-margin)
    } else {
        softplus(margin)
    }
}

/// First and second derivatives of the logistic loss at `margin`:
/// `g = p - y`, `h = p (1 - p)`, with the hessian floored at 1e-16 so leaf
/// weights stay finite even at saturated margins.
pub fn logistic_grad_hess(margin: f64, label: u8) -> (f64, f64) {
    let p = sigmoid(margin);
    let g = p - f64::from(label);
    let h = (p * (1.0 - p)).max(1e-16);
    (g, h)
}

/// Regularization charge of one stored tree: `gamma * leaves + lambda/2 *
/// sum of squared leaf weights`.
///
/// Meaningful only for trees whose leaves are additive margin weights; the
/// typed models keep Gini trees out of here at compile time.
pub fn regularization_omega(tree: &TreeNode, lambda: f64, gamma: f64) -> f64 {
    let leaves = tree.leaf_values();
    gamma * leaves.len() as f64 + 0.5 * lambda * leaves.iter().map(|w| w * w).sum::<f64>()
}

/// Fit `config.n_rounds` boosting rounds on `train`.
///
/// Stops early when a round's tree finds no split with positive gain: such
/// a round would contribute nothing the regularizer approves of, so the
/// tree is discarded and later rounds — which would see the same margins —
/// are skipped.
pub fn fit_boosted(train: &Dataset, config: &BoostConfig) -> Result<BoostedModel> {
    config.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (n0, n1) = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }

    let n = train.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let tree_config = TreeConfig::second_order(Some(config.max_depth), config.lambda, config.gamma);

    let mut margins = vec![logit(config.base_score); n];
    // Summed sequentially: a parallel reduction would reassociate float
    // additions and make the trace differ between runs.
    let total_loss = |margins: &[f64]| -> f64 {
        margins
            .iter()
            .enumerate()
            .map(|(i, &m)| logistic_loss(m, train.label(i)))
            .sum()
    };

    let mut trees: Vec<TreeNode> = Vec::with_capacity(config.n_rounds);
    let mut omega_total = 0.0;
    let mut objective_trace = vec![total_loss(&margins)];

    for round in 0..config.n_rounds {
        let mut gradients = vec![0.0; n];
        let mut hessians = vec![0.0; n];
        for i in 0..n {
            let (g, h) = logistic_grad_hess(margins[i], train.label(i));
            gradients[i] = g;
            hessians[i] = h;
        }

        let mut rng = stream_rng(config.seed, StreamDomain::Boost, round as u32);
        let mut tree = fit_tree(
            train,
            &rows,
            &tree_config,
            Some((&gradients, &hessians)),
            &mut rng,
        )?;
        if tree.is_leaf() {
            break;
        }
        tree.scale_leaves(config.learning_rate);

        margins
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, m)| -> Result<()> {
                *m += predict_tree(&tree, train.row(i))?;
                Ok(())
            })?;

        omega_total += regularization_omega(&tree, config.lambda, config.gamma);
        objective_trace.push(total_loss(&margins) + omega_total);
        trees.push(tree);
    }

    Ok(BoostedModel {
        trees,
        config: config.clone(),
        feature_names: train.feature_names().to_vec(),
        objective_trace,
    })
}

/// Raw additive margin: base margin plus every tree's leaf weight.
pub fn predict_margin_boosted(model: &BoostedModel, row: &[f64]) -> Result<f64> {
    if row.len() != model.feature_names.len() {
        return Err(Error::FeatureCountMismatch {
            expected: model.feature_names.len(),
            found: row.len(),
        });
    }
    let mut margin = model.base_margin();
    for tree in &model.trees {
        margin += predict_tree(tree, row)?;
    }
    Ok(margin)
}

/// Fraud probability: sigmoid of the margin.
pub fn predict_proba_boosted(model: &BoostedModel, row: &[f64]) -> Result<f64> {
    Ok(sigmoid(predict_margin_boosted(model, row)?))
}

/// Hard label: probability at or above 0.5 votes fraud.
pub fn predict_label_boosted(model: &BoostedModel, row: &[f64]) -> Result<u8> {
    Ok(u8::from(predict_proba_boosted(model, row)? >= 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamDomain};
    use rand::Rng;

    fn one_feature(values: &[f64], labels: &[u8]) -> Dataset {
        Dataset::unnamed(values.iter().map(|&v| vec![v]).collect(), labels.to_vec()).unwrap()
    }

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut r = stream_rng(seed, StreamDomain::Synthetic, 20);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let hot = i % 3 == 0;
            let base = if hot { 4.0 } else { 0.0 };
            rows.push(vec![base + r.gen::<f64>(), r.gen::<f64>()]);
            labels.push(u8::from(hot));
        }
        Dataset::unnamed(rows, labels).unwrap()
    }

    #[test]
    fn gradient_and_hessian_match_hand_values() {
        let (g, h) = logistic_grad_hess(2.0, 1);
        assert!((g - (-0.1192)).abs() < 1e-4);
        assert!((h - 0.1050).abs() < 1e-4);

        let (g, h) = logistic_grad_hess(0.0, 0);
        assert!((g - 0.5).abs() < 1e-15);
        assert!((h - 0.25).abs() < 1e-15);

        let (g, _) = logistic_grad_hess(0.0, 1);
        assert!((g + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hessian_is_floored_at_saturation() {
        let (_, h) = logistic_grad_hess(40.0, 1);
        assert_eq!(h, 1e-16);
        let (_, h) = logistic_grad_hess(-40.0, 0);
        assert_eq!(h, 1e-16);
    }

    #[test]
    fn gradients_match_finite_differences_of_the_loss() {
        // Step sizes balance truncation against rounding: ~cbrt(f64 eps)
        // for the first difference, ~eps^(1/4) for the second, where the
        // loss values being subtracted nearly cancel.
        let e1 = 1e-6;
        let e2 = 1e-4;
        for &label in &[0u8, 1u8] {
            for &m in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
                let (g, h) = logistic_grad_hess(m, label);
                let d1 =
                    (logistic_loss(m + e1, label) - logistic_loss(m - e1, label)) / (2.0 * e1);
                let d2 = (logistic_loss(m + e2, label) - 2.0 * logistic_loss(m, label)
                    + logistic_loss(m - e2, label))
                    / (e2 * e2);
                assert!((g - d1).abs() < 1e-6, "grad at m={m}, y={label}");
                assert!((h - d2).abs() < 1e-6, "hess at m={m}, y={label}");
            }
        }
    }

    #[test]
    fn single_newton_round_produces_textbook_leaf_weights() {
        // Margins start at 0, so g = +-0.5 and h = 0.25 per row. The stump
        // splits at 2.5; each side has G = +-1.0, H = 0.5, and with
        // lambda = 1 the leaf weights are -G/(H+1) = +-2/3.
        let d = one_feature(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let cfg = BoostConfig {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: 1,
            lambda: 1.0,
            gamma: 0.0,
            ..BoostConfig::default()
        };
        let model = fit_boosted(&d, &cfg).unwrap();
        assert_eq!(model.trees.len(), 1);
        let leaves = model.trees[0].leaf_values();
        assert!((leaves[0] + 2.0 / 3.0).abs() < 1e-12);
        assert!((leaves[1] - 2.0 / 3.0).abs() < 1e-12);

        for i in 0..4 {
            assert_eq!(predict_label_boosted(&model, d.row(i)).unwrap(), d.label(i));
        }
    }

    #[test]
    fn shrinkage_is_stored_in_the_leaves() {
        let d = one_feature(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let cfg = BoostConfig {
            n_rounds: 1,
            learning_rate: 0.1,
            max_depth: 1,
            lambda: 1.0,
            ..BoostConfig::default()
        };
        let model = fit_boosted(&d, &cfg).unwrap();
        let leaves = model.trees[0].leaf_values();
        assert!((leaves[0] + 2.0 / 30.0).abs() < 1e-12);
        assert!((leaves[1] - 2.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn prohibitive_gamma_stops_before_any_tree() {
        let d = blobs(30, 1);
        let cfg = BoostConfig {
            gamma: 1e6,
            ..BoostConfig::default()
        };
        let model = fit_boosted(&d, &cfg).unwrap();
        assert!(model.trees.is_empty());
        assert_eq!(model.objective_trace.len(), 1);
        // Every prediction is the base score.
        for i in 0..d.n_rows() {
            let p = predict_proba_boosted(&model, d.row(i)).unwrap();
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_starts_at_n_ln2_for_even_prior() {
        let d = blobs(24, 2);
        let model = fit_boosted(&d, &BoostConfig::default()).unwrap();
        let want = 24.0 * std::f64::consts::LN_2;
        assert!((model.objective_trace[0] - want).abs() < 1e-9);
    }

    #[test]
    fn objective_trace_is_nonincreasing_on_learnable_data() {
        let d = blobs(60, 3);
        let cfg = BoostConfig {
            n_rounds: 12,
            ..BoostConfig::default()
        };
        let model = fit_boosted(&d, &cfg).unwrap();
        assert!(model.objective_trace.len() >= 2);
        for w in model.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "objective rose: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert_eq!(model.objective_trace.len(), model.trees.len() + 1);
    }

    #[test]
    fn separable_data_is_learned() {
        let d = blobs(60, 4);
        let model = fit_boosted(
            &d,
            &BoostConfig {
                n_rounds: 20,
                ..BoostConfig::default()
            },
        )
        .unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(
                predict_label_boosted(&model, d.row(i)).unwrap(),
                d.label(i),
                "row {i}"
            );
        }
    }

    #[test]
    fn margin_is_base_plus_tree_sum() {
        let d = blobs(30, 5);
        let model = fit_boosted(
            &d,
            &BoostConfig {
                n_rounds: 5,
                base_score: 0.25,
                ..BoostConfig::default()
            },
        )
        .unwrap();
        let row = d.row(7);
        let mut want = (0.25f64 / 0.75).ln();
        for t in &model.trees {
            want += predict_tree(t, row).unwrap();
        }
        assert_eq!(predict_margin_boosted(&model, row).unwrap(), want);
        let p = predict_proba_boosted(&model, row).unwrap();
        assert!((p - sigmoid(want)).abs() < 1e-15);
    }

    #[test]
    fn omega_charges_leaves_and_weights() {
        let tree = TreeNode::Internal {
            feature: 0,
            threshold: 0.5,
            left: Box::new(TreeNode::Leaf { value: -0.3 }),
            right: Box::new(TreeNode::Leaf { value: 0.4 }),
        };
        let omega = regularization_omega(&tree, 2.0, 0.7);
        // 0.7 * 2 + 1.0 * (0.09 + 0.16)
        assert!((omega - (1.4 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let d = one_feature(&[1.0, 2.0], &[0, 1]);
        let bad = |f: fn(&mut BoostConfig)| {
            let mut c = BoostConfig::default();
            f(&mut c);
            fit_boosted(&d, &c).is_err()
        };
        assert!(bad(|c| c.n_rounds = 0));
        assert!(bad(|c| c.learning_rate = 0.0));
        assert!(bad(|c| c.learning_rate = 1.5));
        assert!(bad(|c| c.max_depth = 0));
        assert!(bad(|c| c.lambda = -1.0));
        assert!(bad(|c| c.gamma = f64::NAN));
        assert!(bad(|c| c.base_score = 0.0));
        assert!(bad(|c| c.base_score = 1.0));
    }

    #[test]
    fn single_class_training_is_rejected() {
        let d = one_feature(&[1.0, 2.0], &[1, 1]);
        assert!(matches!(
            fit_boosted(&d, &BoostConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn fits_are_deterministic() {
        let d = blobs(40, 6);
        let cfg = BoostConfig {
            n_rounds: 8,
            ..BoostConfig::default()
        };
        let a = fit_boosted(&d, &cfg).unwrap();
        let b = fit_boosted(&d, &cfg).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
