//! Image decode/encode, segmentation rendering, run manifests and
//! convergence traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Cursor, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::engine::{ConvergenceTrace, MwoConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMode;

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn histogram(&self) -> BTreeMap<[u8; 3], usize> {
        let mut hist = BTreeMap::new();
        for p in self.pixels() {
            *hist.entry(p).or_insert(0) += 1;
        }
        hist
    }
}

/// Supported image container formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "ppm" | "pnm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes PNG or binary PPM (P6), detected from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(Error::Decode("unrecognized image format (expected PNG or P6 PPM)".into()))
    }
}

pub fn encode_image(image: &RgbImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(image),
        ImageFormat::Ppm => Ok(encode_ppm(image)),
    }
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Writes PNG or PPM depending on the file extension.
pub fn write_image(path: &Path, image: &RgbImage) -> Result<()> {
    let format = ImageFormat::from_path(path).ok_or_else(|| {
        Error::invalid(format!("{}: output must end in .png or .ppm", path.display()))
    })?;
    let bytes = encode_image(image, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let png_err = |e: png::DecodingError| Error::Decode(format!("png: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let raw = &buf[..info.buffer_size()];
    let data: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => raw.to_vec(),
        png::ColorType::Rgba => raw.chunks_exact(4).flat_map(|c| [c[0], c[1], c[2]]).collect(),
        png::ColorType::Grayscale => raw.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => raw.chunks_exact(2).flat_map(|c| [c[0], c[0], c[0]]).collect(),
        other => return Err(Error::Decode(format!("png: unsupported pixel layout {other:?}"))),
    };
    RgbImage::new(w, h, data).map_err(|e| Error::Decode(e.to_string()))
}

fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let enc_err = |e: png::EncodingError| Error::invalid(format!("png encode: {e}"));
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(enc_err)?;
        writer.write_image_data(&image.data).map_err(enc_err)?;
        writer.finish().map_err(enc_err)?;
    }
    Ok(out)
}

fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode("ppm: malformed header".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Decode("ppm: malformed header".into()));
    }
    pos += 1;
    let [w, h, maxval] = header;
    if maxval != 255 {
        return Err(Error::Decode(format!("ppm: unsupported maxval {maxval}")));
    }
    let len = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Decode("ppm: dimensions overflow".into()))?;
    let body = bytes
        .get(pos..pos + len)
        .ok_or_else(|| Error::Decode("ppm: truncated pixel data".into()))?;
    RgbImage::new(w, h, body.to_vec()).map_err(|e| Error::Decode(e.to_string()))
}

/// How a segmentation is painted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderStyle {
    /// Cluster `i` of `k` painted gray level `round(255 i / (k - 1))`.
    GrayLabels,
    /// Every pixel painted with its cluster's mean source color.
    MeanColor,
}

impl FromStr for RenderStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray-labels" => Ok(RenderStyle::GrayLabels),
            "mean-color" => Ok(RenderStyle::MeanColor),
            other => Err(Error::config(format!("unknown render style {other:?}"))),
        }
    }
}

pub fn render_segmentation(
    width: usize,
    height: usize,
    labels: &[usize],
    source: &RgbImage,
    style: RenderStyle,
) -> Result<RgbImage> {
    if labels.len() != width * height {
        return Err(Error::invalid(format!(
            "{} labels for a {width}x{height} image",
            labels.len()
        )));
    }
    if source.width != width || source.height != height {
        return Err(Error::invalid("source image dimensions do not match labels"));
    }
    let k = labels.iter().max().map_or(1, |&m| m + 1);
    let palette: Vec<[u8; 3]> = match style {
        RenderStyle::GrayLabels => (0..k)
            .map(|i| {
                let g = if k == 1 {
                    128
                } else {
                    (255.0 * i as f64 / (k - 1) as f64).round() as u8
                };
                [g, g, g]
            })
            .collect(),
        RenderStyle::MeanColor => {
            let mut sums = vec![[0u64; 3]; k];
            let mut counts = vec![0u64; k];
            for (p, &l) in source.pixels().zip(labels) {
                counts[l] += 1;
                for c in 0..3 {
                    sums[l][c] += p[c] as u64;
                }
            }
            sums.iter()
                .zip(&counts)
                .map(|(s, &n)| {
                    let n = n.max(1) as f64;
                    [0, 1, 2].map(|c| (s[c] as f64 / n).round() as u8)
                })
                .collect()
        }
    };
    let mut data = Vec::with_capacity(labels.len() * 3);
    for &l in labels {
        data.extend_from_slice(&palette[l]);
    }
    RgbImage::new(width, height, data)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in hash.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// First eight digest bytes as an integer, for seed derivation.
pub fn digest_word(digest: &str) -> u64 {
    u64::from_str_radix(&digest[..16.min(digest.len())], 16).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub mode: FeatureMode,
    /// `None` for CSV input.
    pub spatial_weight: Option<f64>,
    /// How spatial columns were scaled.
    pub xy_scaling: Option<String>,
    pub dim_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbReport {
    /// `None` when undefined (fewer than two clusters or coincident centers).
    pub value: Option<f64>,
    pub q_order: u32,
    pub t_order: u32,
}

/// Everything needed to reproduce and compare a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub tool: String,
    pub input_digest: String,
    pub seed: u64,
    pub config: MwoConfig,
    pub features: FeatureInfo,
    pub points: usize,
    pub eval_points: usize,
    pub k_eff: usize,
    pub centers: Vec<Vec<f64>>,
    /// `None` when the best solution is degenerate.
    pub rf: Option<f64>,
    pub db: DbReport,
    pub iterations: usize,
    /// Only recorded on request, so that manifests stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Pretty JSON with every float printed to 17 significant digits.
struct Float17 {
    inner: PrettyFormatter<'static>,
}

impl Formatter for Float17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn manifest_to_string(manifest: &ResultManifest) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        Float17 {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    manifest.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn parse_manifest(text: &str) -> Result<ResultManifest> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_manifest(path: &Path, manifest: &ResultManifest) -> Result<()> {
    let text = manifest_to_string(manifest)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const TRACE_HEADER: &str = "iteration,best_rf,best_db,best_k";

pub fn trace_to_csv(trace: &ConvergenceTrace) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::invalid("empty convergence trace"));
    }
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(out, "{},{},{},{}", r.iteration, r.best_rf, r.best_db, r.best_k);
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<()> {
    let text = trace_to_csv(trace)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
