//! C ABI over the `musselseg` clustering engine.
//!
//! Datasets and results are opaque heap handles released with their matching
//! `*_free` function. Every fallible call returns an [`MsStatus`]; on failure
//! a message is available from [`ms_last_error`] on the same thread. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use musselseg::engine::{run_observed, ClusteringResult, ConvergenceTrace, MwoConfig};
use musselseg::evaluation::{db_index, DbParams};
use musselseg::features::{image_to_dataset, FeatureMode};
use musselseg::model::{FeatureDataset, Matrix, Partition};
use musselseg::{Error, RgbImage};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Undefined = 4,
    Panic = 5,
}

/// Feature layout for image input.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsFeatures {
    Rgbxy = 0,
    Rgb = 1,
    Labxy = 2,
    Lab = 3,
}

/// Engine parameters. Obtain defaults from [`ms_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsConfig {
    pub population: usize,
    pub k_max: usize,
    pub top_count: usize,
    pub gamma: f64,
    pub mu: f64,
    pub activation_threshold: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub subsample_cap: usize,
    pub levy_cap: f64,
    /// Non-zero redraws the step length per iteration.
    pub levy_resample: u8,
    /// 0 disables early stopping.
    pub stagnation_window: usize,
    pub db_q_order: u32,
    pub db_t_order: u32,
}

impl From<&MsConfig> for MwoConfig {
    fn from(c: &MsConfig) -> Self {
        MwoConfig {
            population: c.population,
            k_max: c.k_max,
            top_count: c.top_count,
            gamma: c.gamma,
            mu: c.mu,
            activation_threshold: c.activation_threshold,
            max_iter: c.max_iter,
            seed: c.seed,
            subsample_cap: c.subsample_cap,
            levy_cap: c.levy_cap,
            levy_resample: c.levy_resample != 0,
            stagnation_window: c.stagnation_window,
        }
    }
}

/// Opaque feature dataset.
pub struct MsDataset {
    inner: FeatureDataset,
}

/// Opaque clustering result.
pub struct MsResult {
    result: ClusteringResult,
    trace: ConvergenceTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MsStatus {
    match err {
        Error::Config(_) => MsStatus::Config,
        _ => MsStatus::InvalidInput,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MsStatus::Panic
        }
    }
}

fn lib_err(err: Error) -> (MsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ms_config_default() -> MsConfig {
    let c = MwoConfig::default();
    let db = DbParams::default();
    MsConfig {
        population: c.population,
        k_max: c.k_max,
        top_count: c.top_count,
        gamma: c.gamma,
        mu: c.mu,
        activation_threshold: c.activation_threshold,
        max_iter: c.max_iter,
        seed: c.seed,
        subsample_cap: c.subsample_cap,
        levy_cap: c.levy_cap,
        levy_resample: c.levy_resample as u8,
        stagnation_window: c.stagnation_window,
        db_q_order: db.q_order,
        db_t_order: db.t_order,
    }
}

/// Builds a dataset from `n * d` row-major values.
///
/// # Safety
/// `points` must point to `n * d` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_from_points(
    points: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut MsDataset,
) -> MsStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(d).ok_or((MsStatus::InvalidInput, "n * d overflows".into()))?;
        let data = std::slice::from_raw_parts(points, len).to_vec();
        let matrix = Matrix::from_vec(n, d, data).map_err(lib_err)?;
        let names = (0..d).map(|j| format!("x{j}")).collect();
        let inner = FeatureDataset::new(matrix, names).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MsDataset { inner }));
        Ok(())
    })
}

/// Builds per-pixel features from `width * height * 3` row-major RGB bytes.
/// `features` is one of the [`MsFeatures`] values.
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_from_rgb(
    rgb: *const u8,
    width: usize,
    height: usize,
    features: u32,
    spatial_weight: f64,
    out: *mut *mut MsDataset,
) -> MsStatus {
    guard(|| {
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .ok_or((MsStatus::InvalidInput, "image size overflows".into()))?;
        let bytes = std::slice::from_raw_parts(rgb, len).to_vec();
        let image = RgbImage::new(width, height, bytes).map_err(lib_err)?;
        let mode = match features {
            x if x == MsFeatures::Rgbxy as u32 => FeatureMode::Rgbxy,
            x if x == MsFeatures::Rgb as u32 => FeatureMode::Rgb,
            x if x == MsFeatures::Labxy as u32 => FeatureMode::Labxy,
            x if x == MsFeatures::Lab as u32 => FeatureMode::Lab,
            x => return Err((MsStatus::InvalidInput, format!("unknown feature mode {x}"))),
        };
        let inner = image_to_dataset(&image, mode, spatial_weight).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MsDataset { inner }));
        Ok(())
    })
}

/// Number of points, or 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_len(dataset: *const MsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n())
}

/// Feature dimension, or 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_dim(dataset: *const MsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.d())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_free(dataset: *mut MsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the optimizer. `config` may be null for defaults.
///
/// # Safety
/// `dataset` must be a live handle, `config` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_run(
    dataset: *const MsDataset,
    config: *const MsConfig,
    out: *mut *mut MsResult,
) -> MsStatus {
    guard(|| {
        let data = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config.as_ref().copied().unwrap_or_else(|| ms_config_default());
        let db = DbParams::new(cfg.db_q_order, cfg.db_t_order).map_err(lib_err)?;
        let (result, trace) =
            run_observed(&data.inner, &MwoConfig::from(&cfg), db, |_| {}).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MsResult { result, trace }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_result_free(result: *mut MsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of clusters in the result, or 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_k_eff(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.k_eff)
}

/// Best fitness; infinite for a degenerate result, NaN for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_rf(result: *const MsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.rf)
}

/// DB index of the result; infinite when undefined, NaN for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_db(result: *const MsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.db)
}

/// Feature dimension of the centers, or 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_dim(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.centers.cols())
}

/// Number of trace rows (iterations run), or 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_trace_len(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.trace.len())
}

/// Copies the best fitness after each iteration into `out[0..len]`.
///
/// # Safety
/// `result` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_result_trace_rf(result: *const MsResult, out: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let src: Vec<f64> = r.trace.records.iter().map(|t| t.best_rf).collect();
        copy_out(&src, out, len)
    })
}

/// Copies one label per dataset point into `out[0..len]`; `len` must equal
/// the dataset length.
///
/// # Safety
/// `result` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ms_result_labels(result: *const MsResult, out: *mut u32, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let src: Vec<u32> = r.result.labels.iter().map(|&l| l as u32).collect();
        copy_out(&src, out, len)
    })
}

/// Copies the `k_eff * dim` row-major centers into `out[0..len]`.
///
/// # Safety
/// `result` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_result_centers(result: *const MsResult, out: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        copy_out(r.result.centers.as_slice(), out, len)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), (MsStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != src.len() {
        return Err((MsStatus::InvalidInput, format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

/// DB index of `labels` (one per point) on `dataset`. Returns
/// [`MsStatus::Undefined`] for fewer than two clusters.
///
/// # Safety
/// `dataset` must be a live handle, `labels` readable for `len` values and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_db_index(
    dataset: *const MsDataset,
    labels: *const u32,
    len: usize,
    q_order: u32,
    t_order: u32,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let data = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if len != data.inner.n() {
            return Err((MsStatus::InvalidInput, format!("{len} labels for {} points", data.inner.n())));
        }
        let labels: Vec<usize> = std::slice::from_raw_parts(labels, len).iter().map(|&l| l as usize).collect();
        let params = DbParams::new(q_order, t_order).map_err(lib_err)?;
        let part = Partition::from_labels(&data.inner, &labels).map_err(lib_err)?;
        if part.k_eff() < 2 {
            return Err((MsStatus::Undefined, "DB undefined for k < 2".into()));
        }
        *out = db_index(&data.inner, &part, params).map_err(lib_err)?;
        Ok(())
    })
}
