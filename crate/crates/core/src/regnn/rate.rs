use ndarray::{Array1, ArrayView1};

use super::policy::PowerVector;
use crate::netsim::ChannelRealization;

/// Per-link interference-plus-noise `sigma2 + sum_{j != k} g[j,k] p_j`.
fn interference_plus_noise(g: &ChannelRealization, p: ArrayView1<f64>, sigma2: f64) -> Array1<f64> {
    let gains = g.gains();
    let k = g.k();
    Array1::from_shape_fn(k, |rx| {
        let mut acc = sigma2;
        for tx in 0..k {
            if tx != rx {
                acc += gains[[tx, rx]] * p[tx];
            }
        }
        acc
    })
}

/// Sum over links of `log2(1 + SINR_k)`, in bits per channel use.
pub fn sum_rate(g: &ChannelRealization, p: &PowerVector, sigma2: f64) -> f64 {
    sum_rate_of(g, p.0.view(), sigma2)
}

pub(crate) fn sum_rate_of(g: &ChannelRealization, p: ArrayView1<f64>, sigma2: f64) -> f64 {
    let gains = g.gains();
    let den = interference_plus_noise(g, p, sigma2);
    den.iter()
        .enumerate()
        .map(|(k, d)| (gains[[k, k]] * p[k] / d).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Exact gradient of [`sum_rate`] with respect to the powers.
///
/// With `D_k` the interference-plus-noise of link `k` and
/// `T_k = D_k + g[k,k] p_k`, each rate is `log2 T_k - log2 D_k`, so
/// `d/dp_m = (g[m,m]/T_m + sum_{k != m} g[m,k] (1/T_k - 1/D_k)) / ln 2`.
pub fn sum_rate_grad_p(g: &ChannelRealization, p: &PowerVector, sigma2: f64) -> Array1<f64> {
    sum_rate_grad_of(g, p.0.view(), sigma2)
}

pub(crate) fn sum_rate_grad_of(g: &ChannelRealization, p: ArrayView1<f64>, sigma2: f64) -> Array1<f64> {
    let gains = g.gains();
    let k = g.k();
    let den = interference_plus_noise(g, p, sigma2);
    let tot = Array1::from_shape_fn(k, |i| den[i] + gains[[i, i]] * p[i]);
    // Cross-term weight of receiver k, shared by every interferer.
    let cross = Array1::from_shape_fn(k, |i| 1.0 / tot[i] - 1.0 / den[i]);
    Array1::from_shape_fn(k, |m| {
        let mut acc = gains[[m, m]] / tot[m];
        for rx in 0..k {
            if rx != m {
                acc += gains[[m, rx]] * cross[rx];
            }
        }
        acc / std::f64::consts::LN_2
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn chan(g: Array2<f64>) -> ChannelRealization {
        ChannelRealization::new(g, 0, 0).unwrap()
    }

    #[test]
    fn zero_power_zero_rate() {
        let g = chan(array![[1.0, 0.2], [0.3, 2.0]]);
        assert_eq!(sum_rate(&g, &PowerVector(array![0.0, 0.0]), 1.0), 0.0);
    }

    #[test]
    fn unit_snr_single_link() {
        let g = chan(array![[1.0]]);
        assert_eq!(sum_rate(&g, &PowerVector(array![1.0]), 1.0), 1.0);
        let d = sum_rate_grad_p(&g, &PowerVector(array![1.0]), 1.0);
        assert!((d[0] - 1.0 / (2.0 * std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn two_link_closed_form() {
        let g = chan(array![[1.0, 0.5], [0.5, 1.0]]);
        let c = sum_rate(&g, &PowerVector(array![1.0, 1.0]), 1.0);
        assert!((c - 2.0 * (5.0f64 / 3.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn decoupled_links_gradient() {
        let g = chan(array![[2.0, 0.0], [0.0, 3.0]]);
        let p = PowerVector(array![0.5, 0.25]);
        let d = sum_rate_grad_p(&g, &p, 0.5);
        let ln2 = std::f64::consts::LN_2;
        assert!((d[0] - 2.0 / (ln2 * (0.5 + 1.0))).abs() < 1e-15);
        assert!((d[1] - 3.0 / (ln2 * (0.5 + 0.75))).abs() < 1e-15);
        assert!(d.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(12);
        let g = chan(Array2::from_shape_simple_fn((4, 4), || rng.random_range(0.01..2.0)));
        let p = Array1::from_shape_simple_fn(4, || rng.random_range(0.1..1.0));
        let sigma2 = 0.3;
        let d = sum_rate_grad_of(&g, p.view(), sigma2);
        let h = 1e-6;
        for m in 0..4 {
            let mut plus = p.clone();
            plus[m] += h;
            let mut minus = p.clone();
            minus[m] -= h;
            let fd = (sum_rate_of(&g, plus.view(), sigma2) - sum_rate_of(&g, minus.view(), sigma2)) / (2.0 * h);
            assert!((fd - d[m]).abs() / fd.abs() < 1e-6, "link {m}: {fd} vs {}", d[m]);
        }
    }

    #[test]
    fn masked_gains_do_not_interfere() {
        let g = chan(array![[1.0, 0.0], [0.0, 1.0]]);
        let c = sum_rate(&g, &PowerVector(array![1.0, 1.0]), 1.0);
        assert_eq!(c, 2.0);
    }
}
