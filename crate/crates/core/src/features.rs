//! Conversion of images and CSV point files into feature datasets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::RgbImage;
use crate::error::{Error, Result};
use crate::model::{FeatureDataset, Matrix};

/// Feature space used to describe each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Rgbxy,
    Rgb,
    Labxy,
    Lab,
    /// CSV passthrough.
    Raw,
}

impl FeatureMode {
    pub fn has_xy(self) -> bool {
        matches!(self, FeatureMode::Rgbxy | FeatureMode::Labxy)
    }

    pub fn is_lab(self) -> bool {
        matches!(self, FeatureMode::Labxy | FeatureMode::Lab)
    }

    /// The color-only counterpart of an XY mode.
    pub fn without_xy(self) -> Self {
        match self {
            FeatureMode::Rgbxy => FeatureMode::Rgb,
            FeatureMode::Labxy => FeatureMode::Lab,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Rgbxy => "rgbxy",
            FeatureMode::Rgb => "rgb",
            FeatureMode::Labxy => "labxy",
            FeatureMode::Lab => "lab",
            FeatureMode::Raw => "raw",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgbxy" => Ok(FeatureMode::Rgbxy),
            "rgb" => Ok(FeatureMode::Rgb),
            "labxy" => Ok(FeatureMode::Labxy),
            "lab" => Ok(FeatureMode::Lab),
            "raw" => Ok(FeatureMode::Raw),
            other => Err(Error::config(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[inline]
fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIELAB. The white point is the XYZ of sRGB white, so pure
/// white maps to `a = b = 0` exactly.
pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let rgb = [srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)];
    let mut xyz = [0.0; 3];
    let mut white = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            xyz[i] += SRGB_TO_XYZ[i][j] * rgb[j];
            white[i] += SRGB_TO_XYZ[i][j];
        }
    }
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Spatial coordinate scaled to `[0, 255 * weight]`.
#[inline]
fn spatial(index: usize, extent: usize, weight: f64) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        weight * 255.0 * (index as f64 / (extent - 1) as f64)
    }
}

/// One point per pixel in row-major order. XY columns are dropped when
/// `spatial_weight` is zero.
pub fn image_to_dataset(
    image: &RgbImage,
    mode: FeatureMode,
    spatial_weight: f64,
) -> Result<FeatureDataset> {
    let (points, names) = pixel_features(image, mode, spatial_weight)?;
    FeatureDataset::new(points, names)
}

/// Per-pixel feature matrix and dimension names, without the dataset size
/// requirements.
pub fn pixel_features(
    image: &RgbImage,
    mode: FeatureMode,
    spatial_weight: f64,
) -> Result<(Matrix, Vec<String>)> {
    if mode == FeatureMode::Raw {
        return Err(Error::config("raw features apply to CSV input only"));
    }
    if !(spatial_weight >= 0.0) || !spatial_weight.is_finite() {
        return Err(Error::config(format!(
            "spatial weight must be finite and >= 0, got {spatial_weight}"
        )));
    }
    let mode = if spatial_weight == 0.0 { mode.without_xy() } else { mode };
    let (w, h) = (image.width(), image.height());
    let names: &[&str] = match mode {
        FeatureMode::Rgbxy => &["R", "G", "B", "X", "Y"],
        FeatureMode::Rgb => &["R", "G", "B"],
        FeatureMode::Labxy => &["L", "a", "b", "X", "Y"],
        FeatureMode::Lab => &["L", "a", "b"],
        FeatureMode::Raw => unreachable!(),
    };
    let d = names.len();
    let mut data = Vec::with_capacity(w * h * d);
    for row in 0..h {
        for col in 0..w {
            let [r, g, b] = image.pixel(col, row);
            if mode.is_lab() {
                let (l, a, bb) = srgb_to_lab(r, g, b);
                data.extend_from_slice(&[l, a, bb]);
            } else {
                data.extend_from_slice(&[r as f64, g as f64, b as f64]);
            }
            if mode.has_xy() {
                data.push(spatial(col, w, spatial_weight));
                data.push(spatial(row, h, spatial_weight));
            }
        }
    }
    Ok((
        Matrix::from_vec(w * h, d, data)?,
        names.iter().map(|s| s.to_string()).collect(),
    ))
}

/// A parsed comma-separated table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based source line of each row.
    pub lines: Vec<usize>,
}

impl CsvTable {
    /// Plain comma splitting; quoting is not supported. Blank lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            match &header {
                None => header = Some(fields),
                Some(h) => {
                    if fields.len() != h.len() {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("expected {} fields, found {}", h.len(), fields.len()),
                        });
                    }
                    rows.push(fields);
                    lines.push(i + 1);
                }
            }
        }
        let header = header.ok_or(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        })?;
        Ok(CsvTable { header, rows, lines })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h.eq_ignore_ascii_case(name))
    }

    /// Numeric dataset from every column except `exclude`.
    pub fn to_dataset(&self, exclude: Option<usize>) -> Result<FeatureDataset> {
        let keep: Vec<usize> = (0..self.header.len()).filter(|&c| Some(c) != exclude).collect();
        if keep.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no numeric feature columns".into(),
            });
        }
        let mut data = Vec::with_capacity(self.rows.len() * keep.len());
        for (row, &line) in self.rows.iter().zip(&self.lines) {
            for &c in &keep {
                let v: f64 = row[c].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric value {:?} in column {:?}", row[c], self.header[c]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value in column {:?}", self.header[c]),
                    });
                }
                data.push(v);
            }
        }
        let names = keep.iter().map(|&c| self.header[c].clone()).collect();
        FeatureDataset::new(Matrix::from_vec(self.rows.len(), keep.len(), data)?, names)
    }
}

/// RAW-mode dataset parsed from CSV, with the optional trailing `label`
/// column held aside.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: FeatureDataset,
    pub labels: Option<Vec<String>>,
    pub table: CsvTable,
}

pub fn csv_to_dataset(text: &str) -> Result<CsvDataset> {
    let table = CsvTable::parse(text)?;
    let label_col = table
        .header
        .last()
        .filter(|h| h.eq_ignore_ascii_case("label"))
        .map(|_| table.header.len() - 1);
    let dataset = table.to_dataset(label_col)?;
    let labels = label_col.map(|c| table.rows.iter().map(|r| r[c].clone()).collect());
    Ok(CsvDataset {
        dataset,
        labels,
        table,
    })
}
