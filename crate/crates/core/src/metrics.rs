//! Binary classification metrics: confusion counts, the scalar scores
//! derived from them, and ROC/AUC.
//!
//! Fraud (label 1) is the positive class everywhere. Ratios with an empty
//! denominator are reported as `None` rather than silently coerced to 0 —
//! a model that never predicts fraud has *undefined* precision, not perfect
//! or zero precision, and downstream formatting renders that as `n/a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of the four prediction outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }

    /// `(tp + tn) / total`.
    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }

    /// `tp / (tp + fp)`; `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_positive;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    /// `tp / (tp + fn)`; `None` when there are no positive rows.
    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_negative;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    /// Harmonic mean of precision and recall; `None` when either is
    /// undefined or both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }
}

/// Count prediction outcomes. Inputs must be equal-length, non-empty, and
/// hold only 0/1.
pub fn confusion(predicted: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predicted.iter().chain(truth).any(|&v| v > 1) {
        return Err(Error::InvalidConfig(
            "labels must be 0 or 1 for binary metrics".into(),
        ));
    }
    let mut cm = ConfusionMatrix {
        true_positive: 0,
        true_negative: 0,
        false_positive: 0,
        false_negative: 0,
    };
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => cm.true_positive += 1,
            (0, 0) => cm.true_negative += 1,
            (1, 0) => cm.false_positive += 1,
            (0, 1) => cm.false_negative += 1,
            _ => unreachable!("values checked above"),
        }
    }
    Ok(cm)
}

/// An ROC curve and the area under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0,0)` to `(1,1)`.
    /// Tied scores advance both rates in one step.
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under `points`.
    pub auc: f64,
}

/// Sweep the decision threshold over the sorted scores.
///
/// Higher scores must mean "more likely fraud". Requires both classes to be
/// present in `truth` — with only one class the curve has no second axis.
pub fn roc_curve(scores: &[f64], truth: &[u8]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("scores must be finite".into()));
    }
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::InvalidConfig(
            "labels must be 0 or 1 for binary metrics".into(),
        ));
    }
    let pos = truth.iter().filter(|&&t| t == 1).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTruth);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        // Consume the whole group of tied scores before emitting a point.
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            match truth[order[i]] {
                1 => tp += 1,
                _ => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Everything the pipeline reports about one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
}

impl EvalReport {
    /// Score rows at the fixed 0.5 threshold and sweep the ROC.
    pub fn from_scores(scores: &[f64], truth: &[u8]) -> Result<EvalReport> {
        let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        let cm = confusion(&predicted, truth)?;
        let roc = roc_curve(scores, truth)?;
        Ok(EvalReport {
            confusion: cm,
            accuracy: cm.accuracy(),
            precision: cm.precision(),
            recall: cm.recall(),
            f1: cm.f1(),
            auc: roc.auc,
            roc_points: roc.points,
        })
    }
}

/// Render an optional ratio, `n/a` when undefined.
pub fn fmt_opt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "n/a".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts_each_quadrant() {
        let cm = confusion(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                true_positive: 1,
                true_negative: 1,
                false_positive: 1,
                false_negative: 1,
            }
        );
        assert_eq!(cm.total(), 4);
        assert_eq!(cm.accuracy(), 0.5);
        assert_eq!(cm.precision(), Some(0.5));
        assert_eq!(cm.recall(), Some(0.5));
        assert_eq!(cm.f1(), Some(0.5));
    }

    #[test]
    fn confusion_validates_inputs() {
        assert!(matches!(
            confusion(&[1, 0], &[1]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(confusion(&[], &[]), Err(Error::EmptyInput)));
        assert!(confusion(&[2], &[0]).is_err());
    }

    #[test]
    fn never_predicting_fraud_leaves_precision_undefined() {
        let cm = confusion(&[0, 0, 0], &[0, 1, 0]).unwrap();
        assert_eq!(cm.precision(), None);
        assert_eq!(cm.recall(), Some(0.0));
        assert_eq!(cm.f1(), None);
        assert_eq!(fmt_opt_metric(cm.precision()), "n/a");
    }

    #[test]
    fn no_positive_rows_leaves_recall_undefined() {
        let cm = confusion(&[0, 1, 0], &[0, 0, 0]).unwrap();
        assert_eq!(cm.recall(), None);
        assert_eq!(cm.precision(), Some(0.0));
        assert_eq!(cm.f1(), None);
    }

    #[test]
    fn zero_precision_and_recall_leave_f1_undefined() {
        // One false positive, one false negative, nothing right.
        let cm = confusion(&[1, 0], &[0, 1]).unwrap();
        assert_eq!(cm.precision(), Some(0.0));
        assert_eq!(cm.recall(), Some(0.0));
        assert_eq!(cm.f1(), None);
    }

    #[test]
    fn roc_of_hand_worked_example_is_three_quarters() {
        let roc = roc_curve(&[0.9, 0.8, 0.4, 0.3], &[1, 0, 1, 0]).unwrap();
        assert_eq!(
            roc.points,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
        assert_eq!(roc.auc, 0.75);
    }

    #[test]
    fn perfect_separation_has_unit_auc() {
        let roc = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn constant_scores_collapse_to_the_diagonal() {
        let roc = roc_curve(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc.auc, 0.5);
    }

    #[test]
    fn roc_rejects_single_class_truth() {
        assert!(matches!(
            roc_curve(&[0.1, 0.9], &[1, 1]),
            Err(Error::SingleClassTruth)
        ));
    }

    #[test]
    fn roc_rejects_non_finite_scores() {
        assert!(roc_curve(&[f64::NAN, 0.5], &[1, 0]).is_err());
        assert!(roc_curve(&[f64::INFINITY, 0.5], &[1, 0]).is_err());
    }

    #[test]
    fn report_thresholds_at_one_half() {
        let report = EvalReport::from_scores(&[0.9, 0.5, 0.2, 0.4], &[1, 1, 0, 0]).unwrap();
        assert_eq!(report.confusion.true_positive, 2); // 0.5 itself votes fraud
        assert_eq!(report.confusion.true_negative, 2);
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.auc, 1.0);
    }

    /// O(P*N) pair-counting definition of AUC.
    fn pairwise_auc(scores: &[f64], truth: &[u8]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == 1)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == 0)
            .map(|(&s, _)| s)
            .collect();
        let mut total = 0.0;
        for &p in &pos {
            for &n in &neg {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    proptest! {
        // Trapezoidal AUC equals the concordant-pair count, ties worth half.
        #[test]
        fn auc_matches_pair_counting(
            scores in proptest::collection::vec(0u32..12, 4..80),
            flip in proptest::collection::vec(any::<bool>(), 4..80),
        ) {
            let n = scores.len().min(flip.len());
            let scores: Vec<f64> = scores[..n].iter().map(|&s| f64::from(s) / 11.0).collect();
            let truth: Vec<u8> = flip[..n].iter().map(|&b| u8::from(b)).collect();
            let pos = truth.iter().filter(|&&t| t == 1).count();
            prop_assume!(pos > 0 && pos < n);

            let roc = roc_curve(&scores, &truth).unwrap();
            let want = pairwise_auc(&scores, &truth);
            prop_assert!((roc.auc - want).abs() < 1e-12,
                "trapezoid {} vs pairs {}", roc.auc, want);
        }

        // Curves are monotone staircases inside the unit square.
        #[test]
        fn roc_points_are_monotone(
            scores in proptest::collection::vec(0.0f64..1.0, 4..60),
            flip in proptest::collection::vec(any::<bool>(), 4..60),
        ) {
            let n = scores.len().min(flip.len());
            let truth: Vec<u8> = flip[..n].iter().map(|&b| u8::from(b)).collect();
            let pos = truth.iter().filter(|&&t| t == 1).count();
            prop_assume!(pos > 0 && pos < n);

            let roc = roc_curve(&scores[..n], &truth).unwrap();
            prop_assert_eq!(roc.points[0], (0.0, 0.0));
            prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
            for w in roc.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
                prop_assert!((0.0..=1.0).contains(&w[1].0));
                prop_assert!((0.0..=1.0).contains(&w[1].1));
            }
        }

        // Accuracy decomposes over the quadrants for any prediction vector.
        #[test]
        fn accuracy_is_fraction_right(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..50),
        ) {
            let pred: Vec<u8> = pairs.iter().map(|&(p, _)| u8::from(p)).collect();
            let truth: Vec<u8> = pairs.iter().map(|&(_, t)| u8::from(t)).collect();
            let cm = confusion(&pred, &truth).unwrap();
            let right = pairs.iter().filter(|&&(p, t)| p == t).count();
            prop_assert_eq!(cm.accuracy(), right as f64 / pairs.len() as f64);
            prop_assert_eq!(cm.total(), pairs.len());
        }
    }
}
