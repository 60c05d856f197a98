//! Synthetic data shared by the benchmarks.

use rand::Rng;

use telfraud::rng::{stream_rng, StreamDomain};
use telfraud::Dataset;

/// Build an `n`-row, `p`-feature dataset where the label depends on two
/// features through a threshold rule and `fraud_rate` controls prevalence.
/// Deterministic in the seed, like everything else in the library.
pub fn synthetic_dataset(n: usize, p: usize, fraud_rate: f64, seed: u64) -> Dataset {
    assert!(p >= 2, "the label rule reads two features");
    // P(f0 > a and f1 > a) = fraud_rate for independent uniforms.
    let a = 1.0 - fraud_rate.sqrt();
    let mut rng = stream_rng(seed, StreamDomain::Synthetic, 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        labels.push(u8::from(row[0] > a && row[1] > a));
        rows.push(row);
    }
    Dataset::unnamed(rows, labels).expect("synthetic rows are finite and binary-labeled")
}
