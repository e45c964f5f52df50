//! Within/between sum-of-squares decompositions and the RF fitness.
//!
//! All sums use squared Euclidean norms. The balanced variants weight each
//! cluster by `n_bar / n_i`, so a large cluster cannot dominate the between
//! term.

use crate::model::{squared_distance, FeatureDataset, Partition};

/// Fitness assigned to degenerate solutions; sorts after every real value.
pub const WORST_FITNESS: f64 = f64::INFINITY;

/// `B'` below this is treated as degenerate.
pub const MIN_BETWEEN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumOfSquaresReport {
    pub within: f64,
    pub between: f64,
    pub total: f64,
    pub within_bal: f64,
    pub between_bal: f64,
    pub total_bal: f64,
}

/// Per-cluster `Σ‖x − x̄_i‖²` and `Σ‖x − x̄‖²`.
fn cluster_scatters(dataset: &FeatureDataset, partition: &Partition) -> (Vec<f64>, Vec<f64>) {
    let k = partition.k_eff();
    let means = partition.cluster_means();
    let grand = partition.grand_mean();
    let mut within = vec![0.0; k];
    let mut total = vec![0.0; k];
    for (i, &l) in partition.labels().iter().enumerate() {
        let p = dataset.point(i);
        within[l] += squared_distance(p, means.row(l));
        total[l] += squared_distance(p, grand);
    }
    (within, total)
}

/// Classic `(W, B, T)`.
pub fn classic_sums(dataset: &FeatureDataset, partition: &Partition) -> (f64, f64, f64) {
    let (within, total) = cluster_scatters(dataset, partition);
    let means = partition.cluster_means();
    let grand = partition.grand_mean();
    let between = partition
        .counts()
        .iter()
        .enumerate()
        .map(|(i, &n_i)| n_i as f64 * squared_distance(means.row(i), grand))
        .sum();
    (within.iter().sum(), between, total.iter().sum())
}

/// Balanced `(W', B', T')`.
pub fn balanced_sums(dataset: &FeatureDataset, partition: &Partition) -> (f64, f64, f64) {
    let (within, total) = cluster_scatters(dataset, partition);
    let (w, b, t) = balanced_from_scatters(partition, &within, &total);
    (w, b, t)
}

fn balanced_from_scatters(partition: &Partition, within: &[f64], total: &[f64]) -> (f64, f64, f64) {
    let n_bar = partition.n_bar();
    let means = partition.cluster_means();
    let grand = partition.grand_mean();
    let mut w = 0.0;
    let mut b = 0.0;
    let mut t = 0.0;
    for (i, &n_i) in partition.counts().iter().enumerate() {
        let inv = 1.0 / n_i as f64;
        w += within[i] * inv;
        t += total[i] * inv;
        b += squared_distance(means.row(i), grand);
    }
    (n_bar * w, n_bar * b, n_bar * t)
}

pub fn sum_of_squares(dataset: &FeatureDataset, partition: &Partition) -> SumOfSquaresReport {
    let (within, between, total) = classic_sums(dataset, partition);
    let (within_bal, between_bal, total_bal) = balanced_sums(dataset, partition);
    SumOfSquaresReport {
        within,
        between,
        total,
        within_bal,
        between_bal,
        total_bal,
    }
}

/// `W' / B'`, or [`WORST_FITNESS`] when fewer than two clusters exist or the
/// clusters are not separated.
pub fn rf_fitness(dataset: &FeatureDataset, partition: &Partition) -> f64 {
    if partition.k_eff() < 2 {
        return WORST_FITNESS;
    }
    let k = partition.k_eff();
    let means = partition.cluster_means();
    let mut within = vec![0.0; k];
    for (i, &l) in partition.labels().iter().enumerate() {
        within[l] += squared_distance(dataset.point(i), means.row(l));
    }
    let n_bar = partition.n_bar();
    let grand = partition.grand_mean();
    let mut w = 0.0;
    let mut b = 0.0;
    for (i, &n_i) in partition.counts().iter().enumerate() {
        w += within[i] / n_i as f64;
        b += squared_distance(means.row(i), grand);
    }
    let (w, b) = (n_bar * w, n_bar * b);
    if b < MIN_BETWEEN {
        WORST_FITNESS
    } else {
        w / b
    }
}
