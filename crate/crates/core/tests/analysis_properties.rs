//! Similarity, histogram and SNR summaries.

mod common;

use common::{config, random_perm, rng};
use metapower::analysis::{assignment_histogram, cka_matrix, empirical_sinr_stats, linear_cka, ProbeBatch};
use metapower::meta::modular::{HardAssignment, ModuleSet};
use metapower::netsim::{generate_period, SimConfig, SizePolicy};
use metapower::RngStream;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn features(r: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn cka_is_a_bounded_scale_free_similarity(seed in any::<u64>(), c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], center: bool) {
        let mut r = rng(seed);
        let rows = r.random_range(3..20);
        let (ci, cj) = (r.random_range(1..6), r.random_range(1..6));
        let zi = features(&mut r, rows, ci);
        let zj = features(&mut r, rows, cj);
        let v = linear_cka(&zi, &zj, center).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "cka {v}");
        prop_assert!((linear_cka(&zi, &zi, center).unwrap() - 1.0).abs() <= 1e-9);
        prop_assert!((linear_cka(&zi, &zi.mapv(|x| c * x), center).unwrap() - 1.0).abs() <= 1e-9);
        prop_assert!((linear_cka(&zi, &zj, center).unwrap() - linear_cka(&zj, &zi, center).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn histograms_normalize_and_follow_relabeling(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(1..7);
        let runs: Vec<HardAssignment> =
            (0..r.random_range(1..20)).map(|_| HardAssignment((0..3).map(|_| r.random_range(0..m)).collect())).collect();
        let h = assignment_histogram(&runs, m).unwrap();
        prop_assert!((h.sum() - 1.0).abs() <= 1e-12);
        let perm = random_perm(m, &mut r);
        let relabeled: Vec<HardAssignment> = runs.iter().map(|s| HardAssignment(s.0.iter().map(|&i| perm[i]).collect())).collect();
        let hp = assignment_histogram(&relabeled, m).unwrap();
        for i in 0..m {
            prop_assert_eq!(hp[perm[i]], h[i]);
        }
    }
}

#[test]
fn snr_summary_ignores_link_labels() {
    let cfg = SimConfig { size_policy: SizePolicy::Fixed(7), ..SimConfig::default() };
    let d = generate_period(&cfg, 0, &RngStream::new(71)).unwrap();
    let p = d.permuted(&random_perm(7, &mut rng(72))).unwrap();
    let (a, b) = (
        empirical_sinr_stats(&d, cfg.pmax_linear(), cfg.noise_linear()).unwrap(),
        empirical_sinr_stats(&p, cfg.pmax_linear(), cfg.noise_linear()).unwrap(),
    );
    assert_eq!(a.count, b.count);
    assert!((a.mean_db - b.mean_db).abs() < 1e-9);
    assert_eq!((a.min_db, a.max_db), (b.min_db, b.max_db));
}

#[test]
fn cka_matrix_of_a_module_set_has_unit_diagonal() {
    let probe = ProbeBatch::draw(&SimConfig::default(), 16, 6, &RngStream::new(73)).unwrap();
    let mods = ModuleSet::init(4, 4, 1.0, &mut rng(74)).unwrap();
    let c = cka_matrix(&mods, &probe).unwrap();
    for i in 0..4 {
        assert!((c.0[[i, i]] - 1.0).abs() <= 1e-9);
        for j in 0..4 {
            assert_eq!(c.0[[i, j]], c.0[[j, i]]);
        }
    }
}
