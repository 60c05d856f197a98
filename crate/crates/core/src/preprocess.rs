//! Min-max scaling and stratified train/test splitting.
//!
//! Scaling maps each feature to `(x - min) / (max - min)` using the minima
//! and maxima of the data it was *fitted* on; values outside that range
//! scale outside `[0, 1]` and are not clipped. A constant feature maps to 0.
//!
//! The split is stratified: each class is shuffled and sampled separately so
//! the test set mirrors the class balance of the whole, which matters when
//! one class is a few percent of the data. Which rows land in the test set
//! depends only on the labels and the seed — never on feature values.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};

/// Fitted per-feature `(min, max)` pairs, in feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub ranges: Vec<(f64, f64)>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.ranges.len()
    }

    /// Scale a single value of feature `j`.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    /// Undo [`Self::transform_value`] for a non-constant feature.
    pub fn invert_value(&self, j: usize, scaled: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        if hi > lo {
            lo + scaled * (hi - lo)
        } else {
            lo
        }
    }

    /// Scale every row of `data`.
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.n_features() {
            return Err(Error::FeatureCountMismatch {
                expected: self.n_features(),
                found: data.n_features(),
            });
        }
        let mut rows = Vec::with_capacity(data.n_rows());
        for i in 0..data.n_rows() {
            rows.push(
                data.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| self.transform_value(j, x))
                    .collect::<Vec<f64>>(),
            );
        }
        let mut out = Dataset::new(rows, data.labels().to_vec(), data.feature_names().to_vec())?;
        if let Some(enc) = data.encoder() {
            out.set_encoder(enc.clone());
        }
        Ok(out)
    }
}

/// Learn per-feature minima and maxima from `data`.
pub fn fit_scaler(data: &Dataset) -> Result<ScalerParams> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let ranges = (0..data.n_features())
        .map(|j| data.column_min_max(j))
        .collect();
    Ok(ScalerParams { ranges })
}

/// Scale `data` with previously fitted parameters.
pub fn transform(data: &Dataset, params: &ScalerParams) -> Result<Dataset> {
    params.transform(data)
}

/// The two halves of a stratified split, plus the seed that produced them.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Pick test-row indices per class: shuffle each class's rows with its own
/// seeded stream, take `round(test_fraction * class size)` of them (round
/// half up), and leave the remainder in train. Both returned index lists are
/// ascending, so relative row order survives the split.
pub fn split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidTestFraction(test_fraction));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        let n_test = ((test_fraction * rows.len() as f64) + 0.5).floor() as usize;
        let n_test = n_test.min(rows.len());
        if n_test == rows.len() || n_test == 0 {
            return Err(Error::ClassTooSmall {
                label: class,
                count: rows.len(),
                need: 2,
            });
        }
        let mut rng = stream_rng(seed, StreamDomain::Split, u32::from(class));
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified train/test split of `data`.
///
/// Requires both classes to be present and each class to be large enough
/// to land at least one row on each side.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let (train_idx, test_idx) = split_indices(data.labels(), test_fraction, seed)?;
    Ok(SplitPair {
        train: data.select(&train_idx),
        test: data.select(&test_idx),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        Dataset::unnamed(rows, labels).unwrap()
    }

    #[test]
    fn scales_to_unit_range_on_training_data() {
        let d = toy(vec![vec![2.0], vec![4.0], vec![6.0]], vec![0, 0, 1]);
        let params = fit_scaler(&d).unwrap();
        assert_eq!(params.ranges, vec![(2.0, 6.0)]);
        let scaled = transform(&d, &params).unwrap();
        assert_eq!(scaled.row(0), &[0.0]);
        assert_eq!(scaled.row(1), &[0.5]);
        assert_eq!(scaled.row(2), &[1.0]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let d = toy(vec![vec![7.0], vec![7.0]], vec![0, 1]);
        let params = fit_scaler(&d).unwrap();
        let scaled = transform(&d, &params).unwrap();
        assert_eq!(scaled.row(0), &[0.0]);
        assert_eq!(scaled.row(1), &[0.0]);
    }

    #[test]
    fn out_of_range_values_are_not_clipped() {
        let train = toy(vec![vec![0.0], vec![10.0]], vec![0, 1]);
        let params = fit_scaler(&train).unwrap();
        let test = toy(vec![vec![-5.0], vec![15.0]], vec![0, 1]);
        let scaled = transform(&test, &params).unwrap();
        assert_eq!(scaled.row(0), &[-0.5]);
        assert_eq!(scaled.row(1), &[1.5]);
    }

    #[test]
    fn transform_checks_feature_count() {
        let params = ScalerParams {
            ranges: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let d = toy(vec![vec![1.0]], vec![0]);
        assert!(matches!(
            transform(&d, &params),
            Err(Error::FeatureCountMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    fn labels_for_split(n0: usize, n1: usize) -> Vec<u8> {
        // Interleave so class rows are not contiguous.
        let mut labels = Vec::with_capacity(n0 + n1);
        let (mut a, mut b) = (n0, n1);
        while a > 0 || b > 0 {
            if a > 0 {
                labels.push(0);
                a -= 1;
            }
            if b > 0 {
                labels.push(1);
                b -= 1;
            }
        }
        labels
    }

    #[test]
    fn split_is_stratified_with_round_half_up() {
        let labels = labels_for_split(80, 20);
        let (train, test) = split_indices(&labels, 0.25, 7).unwrap();
        let count = |idx: &[usize], class: u8| idx.iter().filter(|&&i| labels[i] == class).count();
        assert_eq!(count(&test, 0), 20);
        assert_eq!(count(&test, 1), 5);
        assert_eq!(count(&train, 0), 60);
        assert_eq!(count(&train, 1), 15);

        // 10 rows of class 1 at fraction 0.25 -> 2.5 -> rounds up to 3.
        let labels = labels_for_split(10, 10);
        let (_, test) = split_indices(&labels, 0.25, 7).unwrap();
        let count1 = test.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(count1, 3);
    }

    #[test]
    fn split_depends_only_on_labels_and_seed() {
        let labels = labels_for_split(30, 10);
        let a = split_indices(&labels, 0.3, 11).unwrap();
        let b = split_indices(&labels, 0.3, 11).unwrap();
        let c = split_indices(&labels, 0.3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_degenerate_inputs() {
        let one_class = toy(vec![vec![1.0], vec![2.0]], vec![1, 1]);
        assert!(matches!(split(&one_class, 0.5, 0), Err(Error::SingleClass)));

        let d = toy(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0, 0, 1, 1],
        );
        assert!(matches!(
            split(&d, 0.0, 0),
            Err(Error::InvalidTestFraction(_))
        ));
        assert!(matches!(
            split(&d, 1.0, 0),
            Err(Error::InvalidTestFraction(_))
        ));

        // A 1-row class cannot land on both sides.
        let tiny = toy(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 0, 1]);
        assert!(matches!(
            split(&tiny, 0.5, 0),
            Err(Error::ClassTooSmall { label: 1, .. })
        ));
    }

    #[test]
    fn split_halves_partition_the_rows() {
        let labels = labels_for_split(25, 15);
        let (train, test) = split_indices(&labels, 0.4, 3).unwrap();
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        assert!(train.windows(2).all(|w| w[0] < w[1]));
        assert!(test.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn scaling_round_trips_for_nonconstant_features(
            values in proptest::collection::vec(-1e6f64..1e6, 3..40),
        ) {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi > lo);

            let labels: Vec<u8> = values.iter().enumerate().map(|(i, _)| (i % 2) as u8).collect();
            let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
            let d = Dataset::unnamed(rows, labels).unwrap();
            let params = fit_scaler(&d).unwrap();
            let scaled = transform(&d, &params).unwrap();

            for i in 0..d.n_rows() {
                let s = scaled.row(i)[0];
                prop_assert!((0.0..=1.0).contains(&s));
                let back = params.invert_value(0, s);
                let tol = 1e-9 * (hi - lo).max(1.0);
                prop_assert!((back - d.row(i)[0]).abs() <= tol);
            }
        }

        #[test]
        fn split_test_counts_match_round_half_up(
            n0 in 2usize..60,
            n1 in 2usize..60,
            frac in 0.05f64..0.95,
            seed in 0u64..1000,
        ) {
            let n_test = |n: usize| ((frac * n as f64) + 0.5).floor() as usize;
            prop_assume!(n_test(n0) > 0 && n_test(n0) < n0);
            prop_assume!(n_test(n1) > 0 && n_test(n1) < n1);

            let labels = labels_for_split(n0, n1);
            let (train, test) = split_indices(&labels, frac, seed).unwrap();
            prop_assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), n_test(n0));
            prop_assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), n_test(n1));
            prop_assert_eq!(train.len() + test.len(), labels.len());
        }
    }
}
