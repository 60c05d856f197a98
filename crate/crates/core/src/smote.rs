//! SMOTE: synthetic minority oversampling.
//!
//! New minority rows are interpolated between existing minority rows and
//! their nearest minority neighbors: `x_new = x_i + u * (x_nn - x_i)` with
//! `u` uniform on `[0, 1]`. Majority rows are never touched, and the
//! original rows come through bit-identical, with synthetics appended after
//! them.
//!
//! Neighbor search is exact (full pairwise Euclidean distances within the
//! minority class) with ties broken toward the lower row index, so the same
//! input and seed always produce the same synthetic rows.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};

/// Oversampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    /// Neighbors considered per minority row (capped at minority size - 1).
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after balancing; 1.0 = full balance.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 42,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidConfig("smote k_neighbors must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "smote target_ratio {} is outside (0, 1]",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The label held by strictly fewer rows; `1` when the classes tie.
///
/// With balanced classes nothing needs oversampling, so `balance` never
/// consults the tie case; it only matters for calling the neighbor search
/// directly on balanced data.
pub fn minority_label(data: &Dataset) -> u8 {
    let (n0, n1) = data.class_counts();
    if n0 < n1 {
        0
    } else {
        1
    }
}

/// How many synthetic rows bring `minority` up to `ratio * majority`.
pub fn planned_synthetics(minority: usize, majority: usize, ratio: f64) -> usize {
    let target = (ratio * majority as f64).round() as usize;
    target.saturating_sub(minority)
}

/// Indices of the `k` nearest minority rows to minority row `index`,
/// ordered by distance (ties toward the lower row index), excluding the row
/// itself.
pub fn nearest_minority_neighbors(data: &Dataset, index: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let minority = minority_label(data);
    if index >= data.n_rows() || data.label(index) != minority {
        return Err(Error::NotMinorityRow { index });
    }
    let rows = data.class_indices(minority);
    if rows.len() < 2 {
        return Err(Error::ClassTooSmall {
            label: minority,
            count: rows.len(),
            need: 2,
        });
    }

    let mut scored: Vec<(f64, usize)> = rows
        .iter()
        .filter(|&&i| i != index)
        .map(|&i| (squared_distance(data.row(index), data.row(i)), i))
        .collect();
    // Stable order: distance first, row index second.
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.iter().take(k).map(|&(_, i)| i).collect())
}

/// Interpolate one synthetic row at fraction `u` along `x_i -> x_nn`.
pub fn synthesize(x_i: &[f64], x_nn: &[f64], u: f64) -> Result<Vec<f64>> {
    if x_i.len() != x_nn.len() {
        return Err(Error::RowLengthMismatch {
            left: x_i.len(),
            right: x_nn.len(),
        });
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidConfig(format!(
            "interpolation fraction {u} is outside [0, 1]"
        )));
    }
    Ok(x_i
        .iter()
        .zip(x_nn)
        .map(|(&a, &b)| a + u * (b - a))
        .collect())
}

/// Oversample the minority class of `data` up to
/// `target_ratio * majority count`.
///
/// Already-balanced data (or a ratio at or below the current one) comes back
/// unchanged. Parent rows are visited in a seeded random order, cycling
/// until enough synthetics exist, so the work spreads evenly across the
/// minority rather than hammering a few rows.
pub fn balance(data: &Dataset, config: &SmoteConfig) -> Result<Dataset> {
    config.validate()?;
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    if n0 == n1 {
        return Ok(data.clone());
    }
    let minority = if n0 < n1 { 0u8 } else { 1u8 };
    let (n_min, n_maj) = if minority == 0 { (n0, n1) } else { (n1, n0) };

    let n_synth = planned_synthetics(n_min, n_maj, config.target_ratio);
    if n_synth == 0 {
        return Ok(data.clone());
    }
    if n_min < 2 {
        return Err(Error::ClassTooSmall {
            label: minority,
            count: n_min,
            need: 2,
        });
    }

    let minority_rows = data.class_indices(minority);
    let k = config.k_neighbors.min(n_min - 1);
    let neighbors: Vec<Vec<usize>> = minority_rows
        .iter()
        .map(|&i| nearest_minority_neighbors(data, i, k))
        .collect::<Result<_>>()?;

    let mut rng = stream_rng(config.seed, StreamDomain::Smote, 0);
    let mut order: Vec<usize> = (0..minority_rows.len()).collect();
    order.shuffle(&mut rng);

    let mut out = data.clone();
    for s in 0..n_synth {
        let parent_pos = order[s % order.len()];
        let parent = minority_rows[parent_pos];
        let nbrs = &neighbors[parent_pos];
        let nn = nbrs[rng.gen_range(0..nbrs.len())];
        let u: f64 = rng.gen();
        let row = synthesize(data.row(parent), data.row(nn), u)?;
        out.push_row(&row, minority)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighbors_by_euclidean_distance() {
        // Minority at (0,0), (3,4), (6,8): distances from the first are 5
        // and 10.
        let d = Dataset::unnamed(
            vec![
                vec![0.0, 0.0],
                vec![3.0, 4.0],
                vec![6.0, 8.0],
                vec![100.0, 100.0],
                vec![101.0, 100.0],
                vec![102.0, 100.0],
                vec![103.0, 100.0],
            ],
            vec![1, 1, 1, 0, 0, 0, 0],
        )
        .unwrap();
        assert_eq!(nearest_minority_neighbors(&d, 0, 2).unwrap(), vec![1, 2]);
        assert_eq!(nearest_minority_neighbors(&d, 0, 1).unwrap(), vec![1]);
        // k larger than available neighbors returns what exists.
        assert_eq!(nearest_minority_neighbors(&d, 0, 9).unwrap(), vec![1, 2]);
    }

    #[test]
    fn neighbor_ties_break_toward_lower_index() {
        let d = Dataset::unnamed(
            vec![
                vec![0.0],
                vec![1.0],
                vec![-1.0],
                vec![50.0],
                vec![51.0],
                vec![52.0],
            ],
            vec![1, 1, 1, 0, 0, 0],
        )
        .unwrap();
        // Rows 1 and 2 are both at distance 1 from row 0.
        assert_eq!(nearest_minority_neighbors(&d, 0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn neighbor_search_rejects_majority_rows() {
        let d = Dataset::unnamed(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![1, 1, 0, 0],
        )
        .unwrap();
        // Classes tie, so the minority defaults to 1; row 2 carries 0.
        assert!(matches!(
            nearest_minority_neighbors(&d, 2, 1),
            Err(Error::NotMinorityRow { index: 2 })
        ));
    }

    #[test]
    fn synthesize_interpolates() {
        let row = synthesize(&[1.0, 2.0], &[3.0, 6.0], 0.25).unwrap();
        assert_eq!(row, vec![1.5, 3.0]);
        assert_eq!(synthesize(&[1.0], &[5.0], 0.0).unwrap(), vec![1.0]);
        assert_eq!(synthesize(&[1.0], &[5.0], 1.0).unwrap(), vec![5.0]);
    }

    #[test]
    fn synthesize_validates_inputs() {
        assert!(matches!(
            synthesize(&[1.0, 2.0], &[1.0], 0.5),
            Err(Error::RowLengthMismatch { left: 2, right: 1 })
        ));
        assert!(synthesize(&[1.0], &[2.0], 1.5).is_err());
        assert!(synthesize(&[1.0], &[2.0], -0.1).is_err());
    }

    #[test]
    fn planned_synthetics_matches_hand_arithmetic() {
        // 101,174 records, 8,830 fraudulent: full balance needs
        // 92,344 - 8,830 = 83,514 synthetic rows.
        assert_eq!(planned_synthetics(8_830, 92_344, 1.0), 83_514);
        assert_eq!(planned_synthetics(10, 20, 1.0), 10);
        assert_eq!(planned_synthetics(10, 20, 0.5), 0);
        assert_eq!(planned_synthetics(15, 20, 0.5), 0);
        assert_eq!(planned_synthetics(3, 10, 0.75), 5);
    }

    fn imbalanced(n_min: usize, n_maj: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = stream_rng(seed, StreamDomain::Synthetic, 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..(n_min + n_maj) {
            let is_min = i < n_min;
            let center = if is_min { 5.0 } else { 0.0 };
            rows.push(vec![
                center + rng.gen::<f64>(),
                center - rng.gen::<f64>(),
                rng.gen::<f64>(),
            ]);
            labels.push(u8::from(is_min));
        }
        Dataset::unnamed(rows, labels).unwrap()
    }

    #[test]
    fn balance_reaches_the_target_ratio() {
        let d = imbalanced(6, 40, 1);
        let out = balance(&d, &SmoteConfig::default()).unwrap();
        let (n0, n1) = out.class_counts();
        assert_eq!(n0, 40);
        assert_eq!(n1, 40);
        assert_eq!(out.n_rows(), d.n_rows() + 34);
    }

    #[test]
    fn balance_respects_partial_ratio() {
        let d = imbalanced(6, 40, 2);
        let cfg = SmoteConfig {
            target_ratio: 0.5,
            ..SmoteConfig::default()
        };
        let out = balance(&d, &cfg).unwrap();
        let (_, n1) = out.class_counts();
        assert_eq!(n1, 20);
    }

    #[test]
    fn original_rows_come_through_bit_identical() {
        let d = imbalanced(5, 30, 3);
        let out = balance(&d, &SmoteConfig::default()).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(out.row(i), d.row(i), "row {i} changed");
            assert_eq!(out.label(i), d.label(i));
        }
        // Everything appended carries the minority label.
        for i in d.n_rows()..out.n_rows() {
            assert_eq!(out.label(i), 1);
        }
    }

    #[test]
    fn balanced_input_is_a_no_op() {
        let d = imbalanced(10, 10, 4);
        let out = balance(&d, &SmoteConfig::default()).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn ratio_already_met_is_a_no_op() {
        let d = imbalanced(15, 20, 5);
        let cfg = SmoteConfig {
            target_ratio: 0.5,
            ..SmoteConfig::default()
        };
        assert_eq!(balance(&d, &cfg).unwrap(), d);
    }

    #[test]
    fn single_minority_row_cannot_be_oversampled() {
        let d = imbalanced(1, 10, 6);
        assert!(matches!(
            balance(&d, &SmoteConfig::default()),
            Err(Error::ClassTooSmall { count: 1, .. })
        ));
    }

    #[test]
    fn same_seed_same_synthetics_different_seed_different() {
        let d = imbalanced(6, 40, 7);
        let a = balance(&d, &SmoteConfig::default()).unwrap();
        let b = balance(&d, &SmoteConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = balance(
            &d,
            &SmoteConfig {
                seed: 43,
                ..SmoteConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation() {
        let d = imbalanced(5, 10, 8);
        assert!(balance(
            &d,
            &SmoteConfig {
                k_neighbors: 0,
                ..SmoteConfig::default()
            }
        )
        .is_err());
        assert!(balance(
            &d,
            &SmoteConfig {
                target_ratio: 0.0,
                ..SmoteConfig::default()
            }
        )
        .is_err());
        assert!(balance(
            &d,
            &SmoteConfig {
                target_ratio: 1.5,
                ..SmoteConfig::default()
            }
        )
        .is_err());
    }

    proptest! {
        // Synthetic rows stay inside the axis-aligned bounding box of the
        // minority class: interpolation cannot extrapolate.
        #[test]
        fn synthetics_stay_in_minority_bounding_box(
            n_min in 3usize..12,
            n_maj in 13usize..40,
            seed in 0u64..200,
        ) {
            let d = imbalanced(n_min, n_maj, seed);
            let out = balance(&d, &SmoteConfig { seed, ..SmoteConfig::default() }).unwrap();

            let minority_rows = d.class_indices(1);
            for j in 0..d.n_features() {
                let lo = minority_rows.iter().map(|&i| d.row(i)[j]).fold(f64::INFINITY, f64::min);
                let hi = minority_rows.iter().map(|&i| d.row(i)[j]).fold(f64::NEG_INFINITY, f64::max);
                for i in d.n_rows()..out.n_rows() {
                    let v = out.row(i)[j];
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12,
                        "synthetic {i} feature {j}: {v} outside [{lo}, {hi}]");
                }
            }
        }

        // Class counts after balancing hit the planned target exactly.
        #[test]
        fn balance_counts_are_exact(
            n_min in 2usize..10,
            extra in 1usize..30,
            ratio_pct in 10u32..=100,
        ) {
            let n_maj = n_min + extra;
            let ratio = f64::from(ratio_pct) / 100.0;
            let d = imbalanced(n_min, n_maj, 9);
            let out = balance(&d, &SmoteConfig { target_ratio: ratio, ..SmoteConfig::default() }).unwrap();
            let (n0, n1) = out.class_counts();
            prop_assert_eq!(n0, n_maj);
            prop_assert_eq!(n1, n_min + planned_synthetics(n_min, n_maj, ratio));
        }
    }
}
