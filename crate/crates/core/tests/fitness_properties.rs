mod common;

use common::{brute_db, brute_rf, brute_sums, rel_close};
use musselseg::evaluation::{db_index, DbParams};
use musselseg::fitness::{rf_fitness, sum_of_squares};
use musselseg::model::{FeatureDataset, Partition};
use proptest::prelude::*;

/// Random points with labels covering every cluster at least once.
fn instance(max_n: usize, max_d: usize, max_k: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..=max_k, 1usize..=max_d).prop_flat_map(move |(k, d)| {
        (k..=max_n.max(k)).prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, d), n),
                prop::collection::vec(0..k, n),
            )
                .prop_map(move |(pts, mut labels)| {
                    for c in 0..k {
                        labels[c] = c;
                    }
                    (pts, labels)
                })
        })
    })
}

fn build(pts: &[Vec<f64>], labels: &[usize]) -> (FeatureDataset, Partition) {
    let data = FeatureDataset::from_rows(pts).unwrap();
    let part = Partition::from_labels(&data, labels).unwrap();
    (data, part)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sums_match_brute_force((pts, labels) in instance(30, 4, 6)) {
        let (data, part) = build(&pts, &labels);
        let r = sum_of_squares(&data, &part);
        let o = brute_sums(&pts, &labels);
        let got = [r.within, r.between, r.total, r.within_bal, r.between_bal, r.total_bal];
        for (g, w) in got.iter().zip(o) {
            prop_assert!(rel_close(*g, w, 1e-9), "{g} vs {w}");
        }
        let rf = rf_fitness(&data, &part);
        let orf = brute_rf(&pts, &labels);
        prop_assert!(rel_close(rf, orf, 1e-9) || (rf.is_infinite() && orf.is_infinite()));
    }

    #[test]
    fn decompositions_hold((pts, labels) in instance(200, 6, 10)) {
        let (data, part) = build(&pts, &labels);
        let r = sum_of_squares(&data, &part);
        prop_assert!(rel_close(r.total, r.within + r.between, 1e-9));
        prop_assert!(rel_close(r.total_bal, r.within_bal + r.between_bal, 1e-9));
        for v in [r.within, r.between, r.total, r.within_bal, r.between_bal, r.total_bal] {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn translation_and_scale((pts, labels) in instance(40, 3, 5), shift in -1e3f64..1e3, s in 0.1f64..10.0) {
        let (data, part) = build(&pts, &labels);
        let base = sum_of_squares(&data, &part);
        let rf = rf_fitness(&data, &part);

        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v + shift).collect()).collect();
        let (mdata, mpart) = build(&moved, &labels);
        let m = sum_of_squares(&mdata, &mpart);
        for (a, b) in [(base.within, m.within), (base.between, m.between), (base.total, m.total),
                       (base.within_bal, m.within_bal), (base.between_bal, m.between_bal), (base.total_bal, m.total_bal)] {
            // The shifted copy loses a few digits to the offset itself.
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(base.total));
        }
        prop_assert!(rel_close(rf, rf_fitness(&mdata, &mpart), 1e-7) || rf.is_infinite());

        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        let (sdata, spart) = build(&scaled, &labels);
        let sc = sum_of_squares(&sdata, &spart);
        prop_assert!(rel_close(sc.total, s * s * base.total, 1e-9));
        prop_assert!(rel_close(sc.within_bal, s * s * base.within_bal, 1e-9) || base.within_bal == 0.0);
        prop_assert!(rel_close(sc.between_bal, s * s * base.between_bal, 1e-9));
        prop_assert!(rel_close(rf_fitness(&sdata, &spart), rf, 1e-9) || rf.is_infinite() || rf == 0.0);
    }

    #[test]
    fn equal_sizes_reduce_to_classic(k in 2usize..6, per in 1usize..8, d in 1usize..4,
                                     seed_pts in prop::collection::vec(-20.0f64..20.0, 5 * 8 * 3)) {
        let n = k * per;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|m| seed_pts[(i * 3 + m) % seed_pts.len()] + i as f64).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let (data, part) = build(&pts, &labels);
        let r = sum_of_squares(&data, &part);
        prop_assert!(rel_close(r.within_bal, r.within, 1e-12) || r.within == 0.0);
        prop_assert!(rel_close(r.between_bal, r.between, 1e-12));
    }

    #[test]
    fn db_matches_brute_force((pts, labels) in instance(20, 3, 5), q in 1u32..4, t in 1u32..4) {
        let (data, part) = build(&pts, &labels);
        let db = db_index(&data, &part, DbParams::new(q, t).unwrap()).unwrap();
        let o = brute_db(&pts, &labels, q, t);
        prop_assert!(rel_close(db, o, 1e-9), "{db} vs {o}");
        prop_assert!(db >= 0.0);
    }

    #[test]
    fn db_is_invariant_to_relabeling_translation_and_scale(
        (pts, labels) in instance(30, 3, 5), shift in -100.0f64..100.0, s in 0.5f64..5.0,
    ) {
        let (data, part) = build(&pts, &labels);
        let db = db_index(&data, &part, DbParams::default()).unwrap();
        let k = labels.iter().max().unwrap() + 1;
        let relabeled: Vec<usize> = labels.iter().map(|&l| k - 1 - l).collect();
        let (rdata, rpart) = build(&pts, &relabeled);
        prop_assert!(rel_close(db, db_index(&rdata, &rpart, DbParams::default()).unwrap(), 1e-12));
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| (v + shift) * s).collect()).collect();
        let (mdata, mpart) = build(&moved, &labels);
        prop_assert!(rel_close(db, db_index(&mdata, &mpart, DbParams::default()).unwrap(), 1e-8));
    }
}
