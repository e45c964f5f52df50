//! Datasets, search bounds, partitions and nearest-center assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `n` points with `d` real features each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    points: Matrix,
    dim_names: Vec<String>,
}

impl FeatureDataset {
    pub fn new(points: Matrix, dim_names: Vec<String>) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::invalid(format!(
                "a dataset needs at least 2 points, got {}",
                points.rows()
            )));
        }
        if points.cols() == 0 {
            return Err(Error::invalid("a dataset needs at least one feature"));
        }
        if dim_names.len() != points.cols() {
            return Err(Error::invalid(format!(
                "{} dimension names for {} features",
                dim_names.len(),
                points.cols()
            )));
        }
        if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at point {}, dimension {}",
                pos / points.cols(),
                pos % points.cols()
            )));
        }
        Ok(FeatureDataset { points, dim_names })
    }

    /// Builds a dataset with generated dimension names `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let points = Matrix::from_rows(rows)?;
        let names = (0..points.cols()).map(|m| format!("f{m}")).collect();
        Self::new(points, names)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.points.cols()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d());
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self::new(
            Matrix::from_vec(indices.len(), self.d(), data)?,
            self.dim_names.clone(),
        )
    }

    pub fn grand_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d()];
        for p in self.points.iter_rows() {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        let n = self.n() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Per-dimension search interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::invalid("bounds have mismatched dimensions"));
        }
        if let Some(m) = (0..lo.len()).find(|&m| !(lo[m] <= hi[m])) {
            return Err(Error::invalid(format!(
                "lower bound exceeds upper bound in dimension {m}"
            )));
        }
        Ok(SearchBounds { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, m: usize, value: f64) -> bool {
        self.lo[m] <= value && value <= self.hi[m]
    }
}

/// Per-dimension min/max of the data. Degenerate dimensions are widened by 1.
pub fn compute_bounds(dataset: &FeatureDataset) -> SearchBounds {
    let d = dataset.d();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in dataset.points().iter_rows() {
        for m in 0..d {
            lo[m] = lo[m].min(p[m]);
            hi[m] = hi[m].max(p[m]);
        }
    }
    for m in 0..d {
        if lo[m] == hi[m] {
            hi[m] += 1.0;
        }
    }
    SearchBounds { lo, hi }
}

/// Bounds computed from raw rows; an empty slice is an error.
pub fn compute_bounds_of_rows(rows: &[Vec<f64>]) -> Result<SearchBounds> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot compute bounds of an empty dataset"));
    }
    let d = rows[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in rows {
        if row.len() != d {
            return Err(Error::invalid("ragged rows"));
        }
        for m in 0..d {
            lo[m] = lo[m].min(row[m]);
            hi[m] = hi[m].max(row[m]);
        }
    }
    for m in 0..d {
        if lo[m] == hi[m] {
            hi[m] += 1.0;
        }
    }
    Ok(SearchBounds { lo, hi })
}

/// Clips feature columns into the bounds and the trailing activation column
/// into `[0, 1]`. The matrix must have `bounds.dim() + 1` columns.
pub fn clamp_position(position: &mut Matrix, bounds: &SearchBounds) {
    let d = bounds.dim();
    debug_assert_eq!(position.cols(), d + 1);
    for r in 0..position.rows() {
        let row = position.row_mut(r);
        for m in 0..d {
            row[m] = row[m].clamp(bounds.lo[m], bounds.hi[m]);
        }
        row[d] = row[d].clamp(0.0, 1.0);
    }
}

/// Crisp assignment of every point to a non-empty cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    counts: Vec<usize>,
    cluster_means: Matrix,
    grand_mean: Vec<f64>,
    /// For each retained cluster, the index of the center (or raw label)
    /// it came from.
    sources: Vec<usize>,
}

impl Partition {
    /// Builds a partition from arbitrary non-negative labels. Unused label
    /// values are dropped and the rest re-indexed densely in ascending order.
    pub fn from_labels(dataset: &FeatureDataset, labels: &[usize]) -> Result<Self> {
        if labels.len() != dataset.n() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                dataset.n()
            )));
        }
        let width = labels.iter().max().map_or(0, |&m| m + 1);
        let mut raw_counts = vec![0usize; width];
        for &l in labels {
            raw_counts[l] += 1;
        }
        Ok(Self::build(dataset, labels, &raw_counts))
    }

    fn build(dataset: &FeatureDataset, raw_labels: &[usize], raw_counts: &[usize]) -> Self {
        let d = dataset.d();
        let mut remap = vec![usize::MAX; raw_counts.len()];
        let mut sources = Vec::new();
        let mut counts = Vec::new();
        for (c, &count) in raw_counts.iter().enumerate() {
            if count > 0 {
                remap[c] = sources.len();
                sources.push(c);
                counts.push(count);
            }
        }
        let k = sources.len();
        let labels: Vec<usize> = raw_labels.iter().map(|&l| remap[l]).collect();

        let mut sums = Matrix::zeros(k, d);
        let mut grand = vec![0.0; d];
        for (i, &l) in labels.iter().enumerate() {
            let p = dataset.point(i);
            for (s, v) in sums.row_mut(l).iter_mut().zip(p) {
                *s += v;
            }
            for (g, v) in grand.iter_mut().zip(p) {
                *g += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            sums.row_mut(c).iter_mut().for_each(|s| *s /= count as f64);
        }
        let n = dataset.n() as f64;
        grand.iter_mut().for_each(|g| *g /= n);

        Partition {
            labels,
            counts,
            cluster_means: sums,
            grand_mean: grand,
            sources,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k_eff(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cluster_means(&self) -> &Matrix {
        &self.cluster_means
    }

    pub fn grand_mean(&self) -> &[f64] {
        &self.grand_mean
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Mean number of points per non-empty cluster.
    pub fn n_bar(&self) -> f64 {
        self.labels.len() as f64 / self.counts.len() as f64
    }
}

/// Index of the nearest center; ties go to the lowest index.
#[inline]
pub fn nearest_center(point: &[f64], centers: &Matrix) -> usize {
    let d = point.len();
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, center) in centers.as_slice().chunks_exact(d).enumerate() {
        let dist = squared_distance(point, center);
        if dist < best_dist {
            best_dist = dist;
            best = c;
        }
    }
    best
}

/// Labels each point with its Euclidean-nearest center, drops centers that
/// attract nothing and recomputes the partition statistics.
pub fn assign_to_centers(dataset: &FeatureDataset, centers: &Matrix) -> Partition {
    assert!(centers.rows() >= 1, "at least one center is required");
    assert_eq!(centers.cols(), dataset.d(), "center dimension mismatch");
    let mut raw_counts = vec![0usize; centers.rows()];
    let labels: Vec<usize> = dataset
        .points()
        .iter_rows()
        .map(|p| {
            let c = nearest_center(p, centers);
            raw_counts[c] += 1;
            c
        })
        .collect();
    Partition::build(dataset, &labels, &raw_counts)
}
