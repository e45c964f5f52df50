//! Batch evaluation over an image folder: per-image runs plus mean and
//! variance of the DB index.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::{content_digest, decode_image, digest_word, ImageFormat};
use crate::engine::{self, MwoConfig};
use crate::error::{Error, Result};
use crate::evaluation::{db_index, kmeans_baseline, DbParams};
use crate::features::{image_to_dataset, FeatureMode};
use crate::rng::mix64;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub config: MwoConfig,
    pub mode: FeatureMode,
    pub spatial_weight: f64,
    pub db_params: DbParams,
    pub repeats: usize,
    /// Fixed-k K-means baseline evaluated alongside, if set.
    pub kmeans_k: Option<usize>,
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// Path relative to the benchmark directory.
    pub path: String,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub k_eff: usize,
    pub rf: f64,
    pub db: f64,
    pub wall_ms: Option<u64>,
    pub kmeans_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Mean DB over successful runs with a finite DB.
    pub mean_db: f64,
    /// Population variance of the same values.
    pub variance_db: f64,
    pub failures: usize,
}

/// Seed for one image: the master seed xor the leading digest word, further
/// mixed for repeats after the first.
pub fn derive_seed(master: u64, digest: &str, repeat: usize) -> u64 {
    let base = master ^ digest_word(digest);
    if repeat == 0 {
        base
    } else {
        base ^ mix64(repeat as u64)
    }
}

/// Image files (`.png`, `.ppm`, `.pnm`) directly inside `dir`, sorted.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Mean and population variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn run_one(bytes: &[u8], seed: u64, opts: &BenchOptions) -> Result<RunSummary> {
    let image = decode_image(bytes)?;
    let dataset = image_to_dataset(&image, opts.mode, opts.spatial_weight)?;
    let config = MwoConfig { seed, ..opts.config.clone() };
    let (result, _) = engine::run_observed(&dataset, &config, opts.db_params, |_| {})?;
    let kmeans_db = match opts.kmeans_k {
        Some(k) => {
            let part = kmeans_baseline(&dataset, k.min(dataset.n()), 3, 100, seed)?;
            Some(if part.k_eff() >= 2 {
                db_index(&dataset, &part, opts.db_params)?
            } else {
                f64::INFINITY
            })
        }
        None => None,
    };
    Ok(RunSummary {
        k_eff: result.k_eff,
        rf: result.rf,
        db: result.db,
        wall_ms: opts.record_timing.then_some(result.wall_ms),
        kmeans_db,
    })
}

pub fn run_bench(dir: &Path, opts: &BenchOptions) -> Result<BenchReport> {
    opts.config.validate()?;
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(Error::invalid(format!("{}: no .png or .ppm images found", dir.display())));
    }
    let repeats = opts.repeats.max(1);
    let jobs: Vec<(PathBuf, usize)> = paths
        .iter()
        .flat_map(|p| (0..repeats).map(move |r| (p.clone(), r)))
        .collect();
    let rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|(path, repeat)| {
            let name = path
                .strip_prefix(dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned();
            match std::fs::read(path) {
                Err(e) => BenchRow {
                    path: name,
                    repeat: *repeat,
                    seed: opts.config.seed,
                    outcome: Err(e.to_string()),
                },
                Ok(bytes) => {
                    let seed = derive_seed(opts.config.seed, &content_digest(&bytes), *repeat);
                    BenchRow {
                        path: name,
                        repeat: *repeat,
                        seed,
                        outcome: run_one(&bytes, seed, opts).map_err(|e| e.to_string()),
                    }
                }
            }
        })
        .collect();

    let dbs: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|s| s.db)
        .filter(|db| db.is_finite())
        .collect();
    let (mean_db, variance_db) = mean_variance(&dbs);
    let failures = rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(BenchReport {
        rows,
        mean_db,
        variance_db,
        failures,
    })
}

pub const REPORT_HEADER: &str = "path,repeat,seed,status,k_eff,rf,db,wall_ms,kmeans_db,error";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{},", csv_field(&row.path), row.repeat, row.seed);
            match &row.outcome {
                Ok(s) => {
                    let wall = s.wall_ms.map(|w| w.to_string()).unwrap_or_default();
                    let km = s.kmeans_db.map(|v| v.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "ok,{},{},{},{},{},", s.k_eff, s.rf, s.db, wall, km);
                }
                Err(msg) => {
                    let _ = writeln!(out, "error,,,,,,{}", csv_field(msg));
                }
            }
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!("mean={}, variance={}", self.mean_db, self.variance_db)
    }
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_variance() {
        let (m, v) = mean_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_eq!(v, 1.25);
        let (m, v) = mean_variance(&[0.7]);
        assert_eq!((m, v), (0.7, 0.0));
        assert!(mean_variance(&[]).0.is_nan());
    }

    #[test]
    fn seeds_follow_digest() {
        let d = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
        assert_eq!(derive_seed(0, d, 0), 0xba7816bf8f01cfea);
        assert_eq!(derive_seed(1, d, 0), 0xba7816bf8f01cfeb);
        assert_ne!(derive_seed(1, d, 1), derive_seed(1, d, 0));
        assert_ne!(derive_seed(1, d, 1), derive_seed(1, d, 2));
    }

    #[test]
    fn csv_rows() {
        let report = BenchReport {
            rows: vec![
                BenchRow {
                    path: "a.png".into(),
                    repeat: 0,
                    seed: 5,
                    outcome: Ok(RunSummary { k_eff: 3, rf: 0.5, db: 0.25, wall_ms: None, kmeans_db: Some(0.5) }),
                },
                BenchRow {
                    path: "b.png".into(),
                    repeat: 0,
                    seed: 6,
                    outcome: Err("decode error: bad, very bad".into()),
                },
            ],
            mean_db: 0.25,
            variance_db: 0.0,
            failures: 1,
        };
        assert_eq!(
            report.to_csv(),
            "path,repeat,seed,status,k_eff,rf,db,wall_ms,kmeans_db,error\n\
             a.png,0,5,ok,3,0.5,0.25,,0.5,\n\
             b.png,0,6,error,,,,,,decode error: bad  very bad\n"
        );
        assert_eq!(report.summary_line(), "mean=0.25, variance=0");
    }
}
