use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use musselseg::fitness::rf_fitness;
use musselseg::model::{FeatureDataset, Partition};
use musselseg_ffi::*;

fn blob_points() -> Vec<f64> {
    let mut v = Vec::new();
    for (cx, cy) in [(0.0, 0.0), (50.0, 0.0), (25.0, 40.0)] {
        for i in 0..20 {
            let t = i as f64 * 0.7;
            v.extend([cx + t.sin(), cy + t.cos()]);
        }
    }
    v
}

fn last_error() -> String {
    let p = ms_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_and_read_back() {
    let pts = blob_points();
    let mut ds = ptr::null_mut();
    let mut res = ptr::null_mut();
    let mut cfg = ms_config_default();
    cfg.max_iter = 40;
    cfg.seed = 9;
    unsafe {
        assert_eq!(ms_dataset_from_points(pts.as_ptr(), 60, 2, &mut ds), MsStatus::Ok);
        assert_eq!((ms_dataset_len(ds), ms_dataset_dim(ds)), (60, 2));
        assert_eq!(ms_run(ds, &cfg, &mut res), MsStatus::Ok);

        let k = ms_result_k_eff(res);
        assert!(k >= 2);
        assert_eq!(ms_result_dim(res), 2);
        assert_eq!(ms_result_trace_len(res), 40);

        let mut labels = vec![0u32; 60];
        assert_eq!(ms_result_labels(res, labels.as_mut_ptr(), 60), MsStatus::Ok);
        assert!(labels.iter().all(|&l| (l as usize) < k));
        let mut centers = vec![0.0; k * 2];
        assert_eq!(ms_result_centers(res, centers.as_mut_ptr(), k * 2), MsStatus::Ok);
        let mut trace = vec![0.0; 40];
        assert_eq!(ms_result_trace_rf(res, trace.as_mut_ptr(), 40), MsStatus::Ok);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));

        // Reported RF equals RF of the returned labels recomputed by the library.
        let rows: Vec<Vec<f64>> = pts.chunks(2).map(|c| c.to_vec()).collect();
        let data = FeatureDataset::from_rows(&rows).unwrap();
        let lab: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        let rf = rf_fitness(&data, &Partition::from_labels(&data, &lab).unwrap());
        assert!((rf - ms_result_rf(res)).abs() <= 1e-9 * rf.max(1.0));

        let mut db = 0.0;
        assert_eq!(ms_db_index(ds, labels.as_ptr(), 60, 2, 2, &mut db), MsStatus::Ok);
        assert_eq!(db, ms_result_db(res));

        ms_result_free(res);
        ms_dataset_free(ds);
    }
}

#[test]
fn runs_are_deterministic() {
    let pts = blob_points();
    let mut cfg = ms_config_default();
    cfg.max_iter = 15;
    let mut out = Vec::new();
    for _ in 0..2 {
        unsafe {
            let mut ds = ptr::null_mut();
            let mut res = ptr::null_mut();
            ms_dataset_from_points(pts.as_ptr(), 60, 2, &mut ds);
            assert_eq!(ms_run(ds, &cfg, &mut res), MsStatus::Ok);
            let mut labels = vec![0u32; 60];
            ms_result_labels(res, labels.as_mut_ptr(), 60);
            out.push((labels, ms_result_rf(res).to_bits()));
            ms_result_free(res);
            ms_dataset_free(ds);
        }
    }
    assert_eq!(out[0], out[1]);
}

#[test]
fn rgb_dataset_dimensions() {
    let rgb = [200u8; 4 * 3 * 3];
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(ms_dataset_from_rgb(rgb.as_ptr(), 4, 3, MsFeatures::Rgbxy as u32, 1.0, &mut ds), MsStatus::Ok);
        assert_eq!((ms_dataset_len(ds), ms_dataset_dim(ds)), (12, 5));
        ms_dataset_free(ds);
        assert_eq!(ms_dataset_from_rgb(rgb.as_ptr(), 4, 3, MsFeatures::Lab as u32, 1.0, &mut ds), MsStatus::Ok);
        assert_eq!(ms_dataset_dim(ds), 3);
        ms_dataset_free(ds);
        assert_eq!(ms_dataset_from_rgb(rgb.as_ptr(), 4, 3, 17, 1.0, &mut ds), MsStatus::InvalidInput);
        assert!(last_error().contains("feature mode"));
    }
}

#[test]
fn errors_are_reported() {
    let pts = blob_points();
    let mut ds = ptr::null_mut();
    let mut res = ptr::null_mut();
    unsafe {
        assert_eq!(ms_dataset_from_points(ptr::null(), 60, 2, &mut ds), MsStatus::NullPointer);
        assert!(last_error().contains("points"));
        assert_eq!(ms_dataset_from_points(pts.as_ptr(), 1, 2, &mut ds), MsStatus::InvalidInput);
        let nan = [0.0, f64::NAN, 1.0, 2.0];
        assert_eq!(ms_dataset_from_points(nan.as_ptr(), 2, 2, &mut ds), MsStatus::InvalidInput);

        assert_eq!(ms_dataset_from_points(pts.as_ptr(), 60, 2, &mut ds), MsStatus::Ok);
        let mut cfg = ms_config_default();
        cfg.population = 0;
        assert_eq!(ms_run(ds, &cfg, &mut res), MsStatus::Config);
        assert!(res.is_null());
        assert_eq!(ms_run(ptr::null(), &cfg, &mut res), MsStatus::NullPointer);

        let one = vec![0u32; 60];
        let mut db = 0.0;
        assert_eq!(ms_db_index(ds, one.as_ptr(), 60, 2, 2, &mut db), MsStatus::Undefined);
        assert!(last_error().contains("k < 2"));
        assert_eq!(ms_db_index(ds, one.as_ptr(), 59, 2, 2, &mut db), MsStatus::InvalidInput);
        let two: Vec<u32> = (0..60).map(|i| (i / 20 % 2) as u32).collect();
        assert_eq!(ms_db_index(ds, two.as_ptr(), 60, 0, 2, &mut db), MsStatus::Config);

        cfg = ms_config_default();
        cfg.max_iter = 2;
        assert_eq!(ms_run(ds, &cfg, &mut res), MsStatus::Ok);
        let mut small = [0u32; 3];
        assert_eq!(ms_result_labels(res, small.as_mut_ptr(), 3), MsStatus::InvalidInput);
        ms_result_free(res);
        ms_dataset_free(ds);
        ms_dataset_free(ptr::null_mut());
        ms_result_free(ptr::null_mut());
    }
    assert!(unsafe { ms_result_rf(ptr::null()) }.is_nan());
}

#[test]
fn defaults_match_engine() {
    let c = ms_config_default();
    let e = musselseg::MwoConfig::default();
    assert_eq!((c.population, c.k_max, c.top_count, c.max_iter), (e.population, e.k_max, e.top_count, e.max_iter));
    assert_eq!((c.gamma, c.mu, c.activation_threshold), (1.0, 2.0, 0.5));
    assert_eq!((c.db_q_order, c.db_t_order), (2, 2));
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/musselseg.h")).unwrap();
    for sym in [
        "typedef struct MsDataset MsDataset",
        "typedef struct MsResult MsResult",
        "MS_STATUS_UNDEFINED = 4",
        "MS_FEATURES_LABXY = 2",
        "ms_dataset_from_points",
        "ms_dataset_from_rgb",
        "ms_run",
        "ms_result_labels",
        "ms_result_centers",
        "ms_db_index",
        "ms_last_error",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

/// Compiles and links a small C program against the static library when a C
/// compiler is on PATH.
#[test]
fn c_program_links() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let manifest = env!("CARGO_MANIFEST_DIR");
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libmusselseg_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built; skipping");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include "musselseg.h"
#include <stdio.h>
int main(void) {
  double pts[] = {0,0, 0,1, 1,0, 10,10, 10,11, 11,10};
  MsDataset *ds = NULL; MsResult *res = NULL;
  MsConfig cfg = ms_config_default();
  cfg.max_iter = 10; cfg.population = 8; cfg.top_count = 1;
  if (ms_dataset_from_points(pts, 6, 2, &ds) != MS_STATUS_OK) return 1;
  if (ms_run(ds, &cfg, &res) != MS_STATUS_OK) return 2;
  unsigned labels[6];
  if (ms_result_labels(res, labels, 6) != MS_STATUS_OK) return 3;
  printf("k=%zu\n", ms_result_k_eff(res));
  ms_result_free(res); ms_dataset_free(ds);
  return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("k="));
}
