//! Direct double-loop evaluations used as independent oracles. Nothing here
//! goes through `Partition` statistics or the library's sums.
#![allow(dead_code)]

use musselseg::model::FeatureDataset;

pub fn rows(data: &FeatureDataset) -> Vec<Vec<f64>> {
    (0..data.n()).map(|i| data.point(i).to_vec()).collect()
}

fn members(points: &[Vec<f64>], labels: &[usize], c: usize) -> Vec<Vec<f64>> {
    points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == c)
        .map(|(p, _)| p.clone())
        .collect()
}

fn mean(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    (0..d)
        .map(|m| points.iter().map(|p| p[m]).sum::<f64>() / points.len() as f64)
        .collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for m in 0..a.len() {
        s += (a[m] - b[m]) * (a[m] - b[m]);
    }
    s
}

fn used_labels(labels: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = labels.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

/// (W, B, T, W', B', T') straight from the definitions.
pub fn brute_sums(points: &[Vec<f64>], labels: &[usize]) -> [f64; 6] {
    let grand = mean(points);
    let clusters = used_labels(labels);
    let k = clusters.len() as f64;
    let n_bar = points.len() as f64 / k;
    let (mut w, mut b, mut t, mut wb, mut bb, mut tb) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &c in &clusters {
        let pts = members(points, labels, c);
        let n_i = pts.len() as f64;
        let centre = mean(&pts);
        let mut wi = 0.0;
        let mut ti = 0.0;
        for p in &pts {
            wi += sq(p, &centre);
            ti += sq(p, &grand);
        }
        w += wi;
        t += ti;
        b += n_i * sq(&centre, &grand);
        wb += wi / n_i;
        tb += ti / n_i;
        bb += sq(&centre, &grand);
    }
    [w, b, t, n_bar * wb, n_bar * bb, n_bar * tb]
}

pub fn brute_rf(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let s = brute_sums(points, labels);
    if used_labels(labels).len() < 2 || s[4] < 1e-12 {
        f64::INFINITY
    } else {
        s[3] / s[4]
    }
}

/// Davies–Bouldin index with scatter order `q` and Minkowski order `t`.
pub fn brute_db(points: &[Vec<f64>], labels: &[usize], q: u32, t: u32) -> f64 {
    let clusters = used_labels(labels);
    let centres: Vec<Vec<f64>> = clusters.iter().map(|&c| mean(&members(points, labels, c))).collect();
    let scatter: Vec<f64> = clusters
        .iter()
        .zip(&centres)
        .map(|(&c, centre)| {
            let pts = members(points, labels, c);
            let s: f64 = pts.iter().map(|p| sq(p, centre).sqrt().powf(q as f64)).sum();
            (s / pts.len() as f64).powf(1.0 / q as f64)
        })
        .collect();
    let k = clusters.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let dist: f64 = centres[i]
                .iter()
                .zip(&centres[j])
                .map(|(a, b)| (a - b).abs().powf(t as f64))
                .sum::<f64>()
                .powf(1.0 / t as f64);
            worst = worst.max((scatter[i] + scatter[j]) / dist);
        }
        total += worst;
    }
    total / k as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
