//! Davies–Bouldin validity index and a fixed-k K-means baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::WORST_FITNESS;
use crate::model::{nearest_center, squared_distance, FeatureDataset, Matrix, Partition};
use crate::rng::{Purpose, Stream};

/// Separations below this make a DB ratio degenerate.
pub const MIN_SEPARATION: f64 = 1e-12;

/// Orders of the DB index: `q_order` for the within-cluster scatter and
/// `t_order` for the Minkowski distance between centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbParams {
    pub q_order: u32,
    pub t_order: u32,
}

impl Default for DbParams {
    fn default() -> Self {
        DbParams {
            q_order: 2,
            t_order: 2,
        }
    }
}

impl DbParams {
    pub fn new(q_order: u32, t_order: u32) -> Result<Self> {
        if q_order < 1 || t_order < 1 {
            return Err(Error::config("DB orders q and t must be at least 1"));
        }
        Ok(DbParams { q_order, t_order })
    }
}

/// `((1/n) Σ ‖x − c‖₂^q)^(1/q)` over a non-empty cluster.
pub fn cluster_scatter<'a, I>(points: I, center: &[f64], q: u32) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = 0.0;
    let mut count = 0usize;
    for p in points {
        acc += distance_power(squared_distance(p, center), q);
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("scatter of an empty cluster"));
    }
    Ok(root(acc / count as f64, q))
}

#[inline]
fn distance_power(squared: f64, q: u32) -> f64 {
    match q {
        2 => squared,
        1 => squared.sqrt(),
        _ => squared.sqrt().powi(q as i32),
    }
}

#[inline]
fn root(value: f64, q: u32) -> f64 {
    match q {
        1 => value,
        2 => value.sqrt(),
        _ => value.powf(1.0 / q as f64),
    }
}

/// Minkowski-`t` distance.
pub fn center_distance(a: &[f64], b: &[f64], t: u32) -> f64 {
    match t {
        1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        2 => squared_distance(a, b).sqrt(),
        _ => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powi(t as i32))
            .sum::<f64>()
            .powf(1.0 / t as f64),
    }
}

/// Davies–Bouldin index of a partition, using its cluster means as centers.
/// Coincident centers make the index infinite.
pub fn db_index(dataset: &FeatureDataset, partition: &Partition, params: DbParams) -> Result<f64> {
    let k = partition.k_eff();
    if k < 2 {
        return Err(Error::invalid("DB undefined for k < 2"));
    }
    if partition.n() != dataset.n() {
        return Err(Error::invalid("partition does not match dataset"));
    }
    let means = partition.cluster_means();
    let mut acc = vec![0.0; k];
    for (i, &l) in partition.labels().iter().enumerate() {
        acc[l] += distance_power(squared_distance(dataset.point(i), means.row(l)), params.q_order);
    }
    let scatter: Vec<f64> = acc
        .iter()
        .zip(partition.counts())
        .map(|(&a, &n_i)| root(a / n_i as f64, params.q_order))
        .collect();

    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in (0..k).filter(|&j| j != i) {
            let sep = center_distance(means.row(i), means.row(j), params.t_order);
            let ratio = if sep < MIN_SEPARATION {
                WORST_FITNESS
            } else {
                (scatter[i] + scatter[j]) / sep
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Lloyd's K-means from uniformly sampled data points, best of `restarts`
/// by within-cluster sum of squares. Empty clusters are re-seeded from the
/// point farthest from its center.
pub fn kmeans_baseline(
    dataset: &FeatureDataset,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<Partition> {
    let n = dataset.n();
    if k < 2 {
        return Err(Error::invalid("k-means needs k >= 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} points")));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut stream = Stream::new(seed, Purpose::KMeans, restart as u64, 0);
        let (labels, sse) = lloyd(dataset, k, max_iter.max(1), &mut stream);
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    Partition::from_labels(dataset, &labels)
}

fn lloyd(dataset: &FeatureDataset, k: usize, max_iter: usize, stream: &mut Stream) -> (Vec<usize>, f64) {
    let n = dataset.n();
    let d = dataset.d();
    let mut centers = Matrix::zeros(k, d);
    for (c, &i) in stream.sample_indices(n, k).iter().enumerate() {
        centers.row_mut(c).copy_from_slice(dataset.point(i));
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let c = nearest_center(dataset.point(i), &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(dataset.point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for m in 0..d {
                    centers.set(c, m, sums.get(c, m) / counts[c] as f64);
                }
            }
        }
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            let mut dist: Vec<f64> = (0..n)
                .map(|i| squared_distance(dataset.point(i), centers.row(labels[i])))
                .collect();
            for c in empty {
                let far = (0..n)
                    .fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
                centers.row_mut(c).copy_from_slice(dataset.point(far));
                dist[far] = -1.0;
            }
        }
    }
    let sse = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_distance(dataset.point(i), centers.row(l)))
        .sum();
    (labels, sse)
}
