//! Generators for the synthetic experiment inputs.

use crate::codec::RgbImage;
use crate::error::{Error, Result};
use crate::model::{FeatureDataset, Matrix};
use crate::rng::{Purpose, Stream};

/// Isotropic Gaussian blobs plus uniform background noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub points_per_blob: usize,
    pub noise_points: usize,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            centers: vec![[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]],
            sigma: 1.0,
            points_per_blob: 150,
            noise_points: 50,
            seed: 0,
        }
    }
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::config("at least one blob center is required"));
        }
        if self.points_per_blob < 1 {
            return Err(Error::config("points per blob must be >= 1"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("sigma must be positive"));
        }
        Ok(())
    }
}

/// Blob points in blob order, followed by the noise points.
pub fn gen_blobs(spec: &BlobSpec) -> Result<FeatureDataset> {
    spec.validate()?;
    let mut data = Vec::new();
    for (b, c) in spec.centers.iter().enumerate() {
        let mut s = Stream::new(spec.seed, Purpose::Blobs, 0, b as u64);
        for _ in 0..spec.points_per_blob {
            data.push(c[0] + spec.sigma * s.normal());
            data.push(c[1] + spec.sigma * s.normal());
        }
    }
    let pad = 3.0 * spec.sigma;
    let lo = [0, 1].map(|m| spec.centers.iter().map(|c| c[m]).fold(f64::INFINITY, f64::min) - pad);
    let hi = [0, 1].map(|m| spec.centers.iter().map(|c| c[m]).fold(f64::NEG_INFINITY, f64::max) + pad);
    let mut s = Stream::new(spec.seed, Purpose::Blobs, 1, 0);
    for _ in 0..spec.noise_points {
        data.push(s.uniform(lo[0], hi[0]));
        data.push(s.uniform(lo[1], hi[1]));
    }
    let n = data.len() / 2;
    FeatureDataset::new(Matrix::from_vec(n, 2, data)?, vec!["x".into(), "y".into()])
}

pub const BLACK: [u8; 3] = [0, 0, 0];
pub const WHITE: [u8; 3] = [255, 255, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const ORANGE: [u8; 3] = [255, 165, 0];
pub const YELLOW: [u8; 3] = [255, 255, 0];
pub const PURPLE: [u8; 3] = [128, 0, 128];

fn in_square(x: usize, y: usize, left: usize, top: usize, side: usize) -> bool {
    (left..left + side).contains(&x) && (top..top + side).contains(&y)
}

/// 120x120 black image with red, green and blue 30x30 squares.
pub fn gen_rgb_squares() -> RgbImage {
    let squares = [(15, 15, RED), (75, 15, GREEN), (45, 75, BLUE)];
    RgbImage::from_fn(120, 120, |x, y| {
        squares
            .iter()
            .find(|&&(l, t, _)| in_square(x, y, l, t, 30))
            .map_or(BLACK, |&(_, _, c)| c)
    })
}

/// 180x120 white image with six 30x30 squares on a 3x2 grid.
pub fn gen_six_colors() -> RgbImage {
    let colors = [RED, GREEN, BLUE, ORANGE, YELLOW, PURPLE];
    // 10px outer margins, squares evenly spaced in between.
    let lefts = [10, 75, 140];
    let tops = [10, 80];
    RgbImage::from_fn(180, 120, |x, y| {
        for (i, &c) in colors.iter().enumerate() {
            if in_square(x, y, lefts[i % 3], tops[i / 3], 30) {
                return c;
            }
        }
        WHITE
    })
}
