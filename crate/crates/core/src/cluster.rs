//! Unsupervised baselines: k-means and DBSCAN, plus the majority-label
//! bridge that lets clusterings be scored like classifiers.
//!
//! K-means uses k-means++ seeding (distance-squared-weighted draws from a
//! seeded stream) and Lloyd iterations. Empty clusters are reseeded to the
//! point farthest from its own centroid, which keeps the inertia trace
//! nonincreasing. The fit always ends on an assignment pass, so the
//! returned labels are a fixed point of the returned centroids.
//!
//! DBSCAN is the classic density clustering: a point is core when at least
//! `min_pts` points (itself included) sit within `eps`; clusters are the
//! connected components of core points; non-core points within `eps` of a
//! core join the first cluster that discovers them, and the rest are noise.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};

/// K-means hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    /// Cap on Lloyd update passes.
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this between passes.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 2,
            max_iters: 300,
            tol: 1e-6,
            seed: 42,
        }
    }
}

/// DBSCAN hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanConfig {
    /// Neighborhood radius (Euclidean).
    pub eps: f64,
    /// Minimum neighborhood size (the point itself counts) to be core.
    pub min_pts: usize,
}

/// What a clustering run assigned to each row.
///
/// `labels[i]` is `None` only for DBSCAN noise. K-means populates the
/// centroid fields; DBSCAN populates `core`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<Option<usize>>,
    /// Number of cluster ids handed out (k for k-means, discovered count
    /// for DBSCAN). Ids run `0..n_clusters`; a k-means id can end up with
    /// no rows when k exceeds the structure in the data.
    pub n_clusters: usize,
    pub centroids: Option<Vec<Vec<f64>>>,
    /// Final sum of squared distances to assigned centroids.
    pub inertia: Option<f64>,
    /// Inertia after the initial assignment and after each Lloyd pass.
    pub inertia_trace: Option<Vec<f64>>,
    /// Per-row core flags (DBSCAN only).
    pub core: Option<Vec<bool>>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the centroid nearest to `row`, ties toward the lower index.
pub fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(row, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn kmeans_plus_plus(data: &Dataset, k: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = stream_rng(seed, StreamDomain::KMeans, 0);
    let n = data.n_rows();
    let mut chosen_rows: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut best_d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.row(i), data.row(chosen_rows[0])))
        .collect();

    while chosen_rows.len() < k {
        let total: f64 = best_d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = n - 1;
            for (i, &d) in best_d2.iter().enumerate() {
                cum += d;
                if cum > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // Every point coincides with a chosen center; take the lowest
            // index not already used so the centers stay distinct rows.
            (0..n)
                .find(|i| !chosen_rows.contains(i))
                .unwrap_or(chosen_rows.len() % n)
        };
        chosen_rows.push(next);
        for i in 0..n {
            let d = squared_distance(data.row(i), data.row(next));
            if d < best_d2[i] {
                best_d2[i] = d;
            }
        }
    }
    chosen_rows
        .iter()
        .map(|&i| data.row(i).to_vec())
        .collect()
}

fn assign_all(data: &Dataset, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..data.n_rows())
        .map(|i| nearest_centroid(data.row(i), centroids))
        .collect()
}

fn inertia_of(data: &Dataset, centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    (0..data.n_rows())
        .map(|i| squared_distance(data.row(i), &centroids[labels[i]]))
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_fit(data: &Dataset, config: &KMeansConfig) -> Result<ClusterAssignment> {
    if config.k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if data.n_rows() < config.k {
        return Err(Error::TooFewRows {
            rows: data.n_rows(),
            k: config.k,
        });
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    if !config.tol.is_finite() || config.tol < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tol {} must be finite and >= 0",
            config.tol
        )));
    }

    let k = config.k;
    let p = data.n_features();
    let mut centroids = kmeans_plus_plus(data, k, config.seed);
    let mut labels = assign_all(data, &centroids);
    let mut trace = vec![inertia_of(data, &centroids, &labels)];

    for _ in 0..config.max_iters {
        // Update step: means of the clusters under the current labels.
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (j, &v) in data.row(i).iter().enumerate() {
                sums[c][j] += v;
            }
        }
        let mut new_centroids = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    new_centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        // Reseed each empty cluster to the point farthest from its own
        // (updated) centroid. The moved centroid served no one, so this
        // never increases inertia.
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_row = None;
            let mut far_d = -1.0;
            for i in 0..data.n_rows() {
                if taken.contains(&i) {
                    continue;
                }
                let d = squared_distance(data.row(i), &new_centroids[labels[i]]);
                if d > far_d {
                    far_d = d;
                    far_row = Some(i);
                }
            }
            if let Some(i) = far_row {
                new_centroids[c] = data.row(i).to_vec();
                taken.push(i);
            }
        }

        let shift = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = new_centroids;

        let new_labels = assign_all(data, &centroids);
        trace.push(inertia_of(data, &centroids, &new_labels));
        let converged = new_labels == labels;
        labels = new_labels;
        if converged || shift < config.tol {
            break;
        }
    }

    let inertia = *trace.last().expect("trace has the initial entry");
    Ok(ClusterAssignment {
        labels: labels.into_iter().map(Some).collect(),
        n_clusters: k,
        centroids: Some(centroids),
        inertia: Some(inertia),
        inertia_trace: Some(trace),
        core: None,
    })
}

/// Density clustering. Deterministic: rows are scanned in order, and
/// cluster ids appear in discovery order.
pub fn dbscan_fit(data: &Dataset, config: &DbscanConfig) -> Result<ClusterAssignment> {
    if !(config.eps > 0.0 && config.eps.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "eps {} must be finite and > 0",
            config.eps
        )));
    }
    if config.min_pts == 0 {
        return Err(Error::InvalidConfig("min_pts must be >= 1".into()));
    }

    let n = data.n_rows();
    let eps2 = config.eps * config.eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| squared_distance(data.row(i), data.row(j)) <= eps2)
            .collect()
    };

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut core = vec![false; n];
    let mut visited = vec![false; n];
    let mut queued = vec![false; n];
    let mut n_clusters = 0;

    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let nbrs = neighbors(start);
        if nbrs.len() < config.min_pts {
            continue; // noise unless a later cluster claims it as border
        }
        let cluster = n_clusters;
        n_clusters += 1;
        core[start] = true;
        labels[start] = Some(cluster);

        let mut queue: std::collections::VecDeque<usize> = nbrs.into();
        for &q in &queue {
            queued[q] = true;
        }
        while let Some(j) = queue.pop_front() {
            queued[j] = false;
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let jn = neighbors(j);
            if jn.len() >= config.min_pts {
                core[j] = true;
                for q in jn {
                    if !queued[q] && (!visited[q] || labels[q].is_none()) {
                        queued[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
    }

    Ok(ClusterAssignment {
        labels,
        n_clusters,
        centroids: None,
        inertia: None,
        inertia_trace: None,
        core: Some(core),
    })
}

/// Attach an out-of-sample row to a fitted DBSCAN clustering: the cluster
/// of the nearest core point within `eps`, or noise when none is that close.
pub fn dbscan_assign(
    data: &Dataset,
    assignment: &ClusterAssignment,
    config: &DbscanConfig,
    row: &[f64],
) -> Result<Option<usize>> {
    let Some(core) = assignment.core.as_ref() else {
        return Err(Error::InvalidConfig(
            "assignment does not carry core flags (not a DBSCAN fit)".into(),
        ));
    };
    if row.len() != data.n_features() {
        return Err(Error::FeatureCountMismatch {
            expected: data.n_features(),
            found: row.len(),
        });
    }
    let eps2 = config.eps * config.eps;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..data.n_rows() {
        if !core[i] {
            continue;
        }
        let d = squared_distance(data.row(i), row);
        if d <= eps2 && best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    Ok(best.map(|(_, i)| assignment.labels[i].expect("core points are always labeled")))
}

/// Majority true label of each cluster, fitted on training rows.
///
/// Ties, empty clusters, and noise all map to fraud: when a region gives no
/// clear signal, the cautious reading for a fraud screen is "flag it".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabelMap {
    pub cluster_labels: Vec<u8>,
    pub noise_label: u8,
}

impl ClusterLabelMap {
    pub fn apply(&self, labels: &[Option<usize>]) -> Vec<u8> {
        labels
            .iter()
            .map(|l| match l {
                Some(c) => self.cluster_labels[*c],
                None => self.noise_label,
            })
            .collect()
    }
}

/// Learn the cluster -> label mapping from training truth.
pub fn fit_label_map(assignment: &ClusterAssignment, truth: &[u8]) -> Result<ClusterLabelMap> {
    if truth.len() != assignment.labels.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: assignment.labels.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::InvalidConfig(
            "labels must be 0 or 1 for the cluster label map".into(),
        ));
    }
    let mut ones = vec![0usize; assignment.n_clusters];
    let mut totals = vec![0usize; assignment.n_clusters];
    for (l, &t) in assignment.labels.iter().zip(truth) {
        if let Some(c) = l {
            totals[*c] += 1;
            ones[*c] += usize::from(t == 1);
        }
    }
    let cluster_labels = (0..assignment.n_clusters)
        .map(|c| u8::from(2 * ones[c] >= totals[c]))
        .collect();
    Ok(ClusterLabelMap {
        cluster_labels,
        noise_label: 1,
    })
}

/// Fit the majority map and apply it to the fitting rows in one go.
pub fn clusters_to_labels(assignment: &ClusterAssignment, truth: &[u8]) -> Result<Vec<u8>> {
    let map = fit_label_map(assignment, truth)?;
    Ok(map.apply(&assignment.labels))
}
