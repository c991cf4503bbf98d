#![allow(dead_code)]

use metapower::netsim::{ChannelRealization, ShiftScaling};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use metapower::RngStream;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;

/// Gains in `[0.05, 2)` with a few masked cross links.
pub fn random_channel(k: usize, rng: &mut impl Rng, scaling: ShiftScaling) -> ChannelRealization {
    let gains = Array2::from_shape_fn((k, k), |(j, i)| {
        if j != i && rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.05..2.0)
        }
    });
    ChannelRealization::with_scaling(gains, scaling, 0, 0).unwrap()
}

pub fn random_perm(k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(rng);
    p
}

pub fn rng(seed: u64) -> RngStream {
    RngStream::new(seed)
}

/// Fixed-seed proptest configuration so failures reproduce.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// `|a - b| <= max(ABS_FLOOR, REL_TOL * max(|a|, |b|))`.
pub fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    (analytic - numeric).abs() <= ABS_FLOOR.max(REL_TOL * scale)
}

/// Central difference of `f` along every entry of `x`.
pub fn central_diff(x: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + FD_STEP;
        let up = f(&probe);
        probe[idx] = orig - FD_STEP;
        let down = f(&probe);
        probe[idx] = orig;
        out[idx] = (up - down) / (2.0 * FD_STEP);
    }
    out
}

pub fn assert_grad_close(what: &str, analytic: &Array2<f64>, numeric: &Array2<f64>) -> Result<(), TestCaseError> {
    for (idx, &a) in analytic.indexed_iter() {
        let n = numeric[idx];
        prop_assert!(close(a, n), "{what}{idx:?}: analytic {a:e} vs numeric {n:e}");
    }
    Ok(())
}
