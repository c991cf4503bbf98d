//! Statistical and structural checks on the channel simulator.

mod common;

use common::{config, rng};
use metapower::netsim::{draw_fading, draw_topology, generate_meta_dataset, generate_period, SimConfig, SizePolicy};
use metapower::RngStream;
use proptest::prelude::*;

#[test]
fn fading_power_has_mean_two() {
    let mut r = rng(61);
    let h = draw_fading(320, &mut r);
    assert!(h.len() >= 100_000);
    let mean = h.mapv(|v| v * v).mean().unwrap();
    assert!((mean - 2.0).abs() < 0.02, "E|h|^2 = {mean}");
}

#[test]
fn transmitters_fill_the_quadrants_evenly() {
    let cfg = SimConfig { size_policy: SizePolicy::Fixed(20), ..SimConfig::default() };
    let mut counts = [0usize; 4];
    let mut total = 0;
    for i in 0..500u64 {
        let t = draw_topology(&cfg, i, &mut RngStream::new(62).child_indexed("drop", i));
        for p in &t.tx_positions {
            assert!(p[0].abs() <= 20.0 && p[1].abs() <= 20.0);
            counts[usize::from(p[0] >= 0.0) * 2 + usize::from(p[1] >= 0.0)] += 1;
            total += 1;
        }
    }
    let expect = total as f64 / 4.0;
    let sd = (total as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - expect).abs() <= 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn datasets_are_reproducible_bitwise() {
    let cfg = SimConfig::default();
    let a = generate_meta_dataset(&cfg, 3, &RngStream::new(63)).unwrap();
    let b = generate_meta_dataset(&cfg, 3, &RngStream::new(63)).unwrap();
    assert_eq!(a, b);
    let c = generate_meta_dataset(&cfg, 3, &RngStream::new(64)).unwrap();
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn gains_respect_the_mask_and_radius_only_adds_edges(seed in any::<u64>(), r1 in 0.5f64..20.0, dr in 0.0f64..10.0) {
        let base = SimConfig {
            size_policy: SizePolicy::Uniform { lo: 2, hi: 12 },
            slots_per_period: 3,
            train_slots: 2,
            test_slots: 1,
            ..SimConfig::default()
        };
        let stream = RngStream::new(seed);
        let small = generate_period(&SimConfig { interference_radius: Some(r1), ..base.clone() }, 0, &stream).unwrap();
        let large = generate_period(&SimConfig { interference_radius: Some(r1 + dr), ..base }, 0, &stream).unwrap();
        for d in [&small, &large] {
            for g in &d.realizations {
                for ((j, k), &v) in g.gains().indexed_iter() {
                    prop_assert!(v.is_finite() && v >= 0.0);
                    prop_assert!(v == 0.0 || d.topology.adjacency[[j, k]]);
                }
            }
        }
        for (a, b) in small.topology.adjacency.iter().zip(&large.topology.adjacency) {
            prop_assert!(!a || *b, "a larger radius dropped an edge");
        }
    }
}
