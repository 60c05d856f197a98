//! Exact greedy binary decision trees.
//!
//! One tree type serves two masters: class-probability leaves grown on Gini
//! impurity (for the random forest) and additive-weight leaves grown on
//! first/second-derivative statistics (for boosting). Split search is exact:
//! every candidate feature is scanned in sorted order and every midpoint
//! between consecutive distinct values is scored. Rows with a feature value
//! `<=` the threshold go left.
//!
//! Determinism is part of the contract. Ties between candidate splits break
//! toward the lower feature index, then the lower threshold, so the same
//! rows always grow the same tree.

use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A fitted tree: internal tests and leaf values.
///
/// Leaf values are class-1 fractions for Gini trees and additive margin
/// contributions for second-order trees; the containing model knows which.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Longest root-to-leaf edge count; a bare leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Leaf values in left-to-right order.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<f64>) {
        match self {
            TreeNode::Leaf { value } => out.push(*value),
            TreeNode::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Multiply every leaf value by `factor` (shrinkage).
    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        match self {
            TreeNode::Leaf { value } => *value *= factor,
            TreeNode::Internal { left, right, .. } => {
                left.scale_leaves(factor);
                right.scale_leaves(factor);
            }
        }
    }
}

/// Which statistic drives the split search and leaf values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    /// Gini impurity decrease; leaves hold class-1 fractions.
    Gini,
    /// Second-order gain with L2 regularization; leaves hold `-G / (H + lambda)`.
    SecondOrder,
}

/// Growth limits and criterion parameters for a single tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    /// `None` grows until no split helps; `Some(0)` forces a bare leaf.
    pub max_depth: Option<usize>,
    /// Reject splits leaving fewer rows than this on either side.
    pub min_samples_leaf: usize,
    pub criterion: SplitCriterion,
    /// L2 penalty on leaf weights (second-order criterion only).
    pub lambda: f64,
    /// Flat penalty per split (second-order criterion only).
    pub gamma: f64,
    /// Features drawn uniformly per split; `None` considers all of them.
    pub feature_subset: Option<usize>,
}

impl TreeConfig {
    pub fn gini(max_depth: Option<usize>) -> Self {
        TreeConfig {
            max_depth,
            min_samples_leaf: 1,
            criterion: SplitCriterion::Gini,
            lambda: 0.0,
            gamma: 0.0,
            feature_subset: None,
        }
    }

    pub fn second_order(max_depth: Option<usize>, lambda: f64, gamma: f64) -> Self {
        TreeConfig {
            max_depth,
            min_samples_leaf: 1,
            criterion: SplitCriterion::SecondOrder,
            lambda,
            gamma,
            feature_subset: None,
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
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

/// A chosen split and its score (impurity decrease or regularized gain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub score: f64,
}

/// Gini impurity of a node holding `n1` positives out of `n` rows.
pub fn gini_impurity(n1: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p1 = n1 as f64 / n as f64;
    let p0 = 1.0 - p1;
    1.0 - (p0 * p0 + p1 * p1)
}

/// Midpoint between consecutive distinct values, nudged down to `a` if
/// floating-point rounding would land it on `b` (rows equal to the
/// threshold must go left, and the left side is the prefix that was scored).
pub fn split_point(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid < b {
        mid.max(a)
    } else {
        a
    }
}

/// Exact best Gini split over `rows`, or `None` when nothing strictly
/// decreases impurity.
///
/// `rows` may contain duplicates (bootstrap samples); each occurrence counts.
pub fn best_split_gini(data: &Dataset, rows: &[usize], candidate_features: &[usize]) -> Option<Split> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let total1 = rows.iter().filter(|&&i| data.label(i) == 1).count();
    if total1 == 0 || total1 == n {
        return None;
    }
    let parent = gini_impurity(total1, n);
    let nf = n as f64;

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut cells: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in &features {
        cells.clear();
        cells.extend(rows.iter().map(|&i| (data.row(i)[f], data.label(i))));
        cells.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut left_n = 0usize;
        let mut left_1 = 0usize;
        for w in 1..n {
            left_n += 1;
            left_1 += usize::from(cells[w - 1].1);
            let (a, b) = (cells[w - 1].0, cells[w].0);
            if a >= b {
                continue;
            }
            let right_n = n - left_n;
            let right_1 = total1 - left_1;
            let children = (left_n as f64 / nf) * gini_impurity(left_1, left_n)
                + (right_n as f64 / nf) * gini_impurity(right_1, right_n);
            let decrease = parent - children;
            if decrease > 0.0 && best.as_ref().map_or(true, |cur| decrease > cur.score) {
                best = Some(Split {
                    feature: f,
                    threshold: split_point(a, b),
                    score: decrease,
                });
            }
        }
    }
    best
}

/// Exact best second-order split over `rows`, or `Ok(None)` when no split
/// has strictly positive regularized gain.
///
/// `gradients` and `hessians` are indexed by dataset row and must cover
/// every row of `data`. The gain of a candidate split is
/// `(G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) / 2 - gamma`.
pub fn best_split_second_order(
    data: &Dataset,
    rows: &[usize],
    gradients: &[f64],
    hessians: &[f64],
    candidate_features: &[usize],
    lambda: f64,
    gamma: f64,
) -> Result<Option<Split>> {
    if gradients.len() != data.n_rows() || hessians.len() != data.n_rows() {
        return Err(Error::AuxAlignment {
            rows: data.n_rows(),
            gradients: gradients.len(),
            hessians: hessians.len(),
        });
    }
    let n = rows.len();
    if n < 2 {
        return Ok(None);
    }
    let total_g: f64 = rows.iter().map(|&i| gradients[i]).sum();
    let total_h: f64 = rows.iter().map(|&i| hessians[i]).sum();
    let parent_term = total_g * total_g / (total_h + lambda);

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    for &f in &features {
        cells.clear();
        cells.extend(rows.iter().map(|&i| (data.row(i)[f], gradients[i], hessians[i])));
        cells.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut left_g = 0.0;
        let mut left_h = 0.0;
        for w in 1..n {
            left_g += cells[w - 1].1;
            left_h += cells[w - 1].2;
            let (a, b) = (cells[w - 1].0, cells[w].0);
            if a >= b {
                continue;
            }
            let right_g = total_g - left_g;
            let right_h = total_h - left_h;
            let gain = 0.5
                * (left_g * left_g / (left_h + lambda) + right_g * right_g / (right_h + lambda)
                    - parent_term)
                - gamma;
            if gain > 0.0 && best.as_ref().map_or(true, |cur| gain > cur.score) {
                best = Some(Split {
                    feature: f,
                    threshold: split_point(a, b),
                    score: gain,
                });
            }
        }
    }
    Ok(best)
}

/// Grow a tree on the given rows.
///
/// `grad_hess` must be `Some` exactly when the criterion is second-order;
/// both slices are indexed by dataset row. The RNG drives per-split feature
/// subsampling and is consumed in a fixed order (node, then left subtree,
/// then right), so a given RNG state determines the tree completely. `rows`
/// may contain duplicates; each occurrence counts once per appearance.
pub fn fit_tree(
    data: &Dataset,
    rows: &[usize],
    config: &TreeConfig,
    grad_hess: Option<(&[f64], &[f64])>,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode> {
    config.validate(data.n_features())?;
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&max_row) = rows.iter().max() {
        if max_row >= data.n_rows() {
            return Err(Error::InvalidConfig(format!(
                "row index {max_row} out of range for {} rows",
                data.n_rows()
            )));
        }
    }
    match (config.criterion, grad_hess) {
        (SplitCriterion::SecondOrder, None) => {
            return Err(Error::InvalidConfig(
                "second-order fitting needs gradients and hessians".into(),
            ))
        }
        (SplitCriterion::Gini, Some(_)) => {
            return Err(Error::InvalidConfig(
                "gini fitting takes no gradients or hessians".into(),
            ))
        }
        _ => {}
    }
    if let Some((g, h)) = grad_hess {
        if g.len() != data.n_rows() || h.len() != data.n_rows() {
            return Err(Error::AuxAlignment {
                rows: data.n_rows(),
                gradients: g.len(),
                hessians: h.len(),
            });
        }
    }
    Ok(build(data, rows.to_vec(), config, grad_hess, rng, 0))
}

fn leaf_value(
    data: &Dataset,
    rows: &[usize],
    criterion: SplitCriterion,
    grad_hess: Option<(&[f64], &[f64])>,
    lambda: f64,
) -> f64 {
    match criterion {
        SplitCriterion::Gini => {
            let n1 = rows.iter().filter(|&&i| data.label(i) == 1).count();
            n1 as f64 / rows.len() as f64
        }
        SplitCriterion::SecondOrder => {
            let (gradients, hessians) = grad_hess.expect("checked by fit_tree");
            let g: f64 = rows.iter().map(|&i| gradients[i]).sum();
            let h: f64 = rows.iter().map(|&i| hessians[i]).sum();
            -g / (h + lambda)
        }
    }
}

fn build(
    data: &Dataset,
    rows: Vec<usize>,
    config: &TreeConfig,
    grad_hess: Option<(&[f64], &[f64])>,
    rng: &mut ChaCha8Rng,
    depth: usize,
) -> TreeNode {
    let make_leaf = |rows: &[usize]| TreeNode::Leaf {
        value: leaf_value(data, rows, config.criterion, grad_hess, config.lambda),
    };

    if let Some(limit) = config.max_depth {
        if depth >= limit {
            return make_leaf(&rows);
        }
    }

    let all_features: Vec<usize>;
    let sampled: Vec<usize>;
    let candidates: &[usize] = match config.feature_subset {
        Some(m) if m < data.n_features() => {
            let mut picked = rand::seq::index::sample(rng, data.n_features(), m).into_vec();
            picked.sort_unstable();
            sampled = picked;
            &sampled
        }
        // A subset covering every feature is no subset at all.
        Some(_) | None => {
            all_features = (0..data.n_features()).collect();
            &all_features
        }
    };

    let split = match config.criterion {
        SplitCriterion::Gini => best_split_gini(data, &rows, candidates),
        SplitCriterion::SecondOrder => {
            let (g, h) = grad_hess.expect("checked by fit_tree");
            best_split_second_order(data, &rows, g, h, candidates, config.lambda, config.gamma)
                .expect("alignment checked by fit_tree")
        }
    };
    let Some(split) = split else {
        return make_leaf(&rows);
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| data.row(i)[split.feature] <= split.threshold);
    if left_rows.len() < config.min_samples_leaf || right_rows.len() < config.min_samples_leaf {
        return make_leaf(&rows);
    }

    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(build(data, left_rows, config, grad_hess, rng, depth + 1)),
        right: Box::new(build(data, right_rows, config, grad_hess, rng, depth + 1)),
    }
}

/// Route one row to its leaf value. Rows at a threshold go left.
pub fn predict_tree(tree: &TreeNode, row: &[f64]) -> Result<f64> {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { value } => return Ok(*value),
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let Some(&x) = row.get(*feature) else {
                    return Err(Error::FeatureIndexOutOfRange {
                        feature: *feature,
                        len: row.len(),
                    });
                };
                node = if x <= *threshold { left } else { right };
            }
        }
    }
}
