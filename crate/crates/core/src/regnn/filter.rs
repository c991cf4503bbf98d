use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::netsim::ChannelRealization;

/// Coefficients `phi_1..phi_N` of the polynomial filter `sum_n phi_n S^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps(pub Vec<f64>);

impl FilterTaps {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidConfig("a filter needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("filter taps must be finite".into()));
        }
        Ok(Self(taps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.0[..])
    }
}

/// `[S x, S^2 x, ..., S^N x]` by repeated matrix-vector products.
pub fn shifted_powers(shift: &Array2<f64>, x: ArrayView1<f64>, n: usize) -> Vec<Array1<f64>> {
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let next = match i {
            0 => shift.dot(&x),
            _ => shift.dot(&out[i - 1]),
        };
        out.push(next);
    }
    out
}

/// Applies `sum_{n=1}^N taps[n-1] * S^n` to `x`; there is no identity term.
pub fn graph_filter(taps: &FilterTaps, g: &ChannelRealization, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let k = g.k();
    if x.len() != k {
        return Err(Error::shape(format!("input of length {k}"), x.len()));
    }
    Ok(filter_from_powers(taps.view(), &shifted_powers(g.shift(), x, taps.len())))
}

pub(crate) fn filter_from_powers(taps: ArrayView1<f64>, powers: &[Array1<f64>]) -> Array1<f64> {
    let mut y = Array1::zeros(powers[0].len());
    for (phi, p) in taps.iter().zip(powers) {
        y.scaled_add(*phi, p);
    }
    y
}

/// Pulls an output gradient back through the filter:
/// `sum_n taps[n-1] * (S^T)^n * upstream`, evaluated Horner-style.
pub fn graph_filter_adjoint(
    taps: ArrayView1<f64>,
    shift: &Array2<f64>,
    upstream: ArrayView1<f64>,
) -> Array1<f64> {
    let st = shift.t();
    let n = taps.len();
    let mut acc = upstream.mapv(|u| u * taps[n - 1]);
    for i in (0..n - 1).rev() {
        acc = st.dot(&acc);
        acc.scaled_add(taps[i], &upstream);
    }
    st.dot(&acc)
}

/// `sum_n (S^T)^n c[n-1]` for per-power coefficient vectors, Horner-style.
/// With `c[n-1] = phi_n u` this is [`graph_filter_adjoint`].
pub(crate) fn adjoint_of_sums(shift: &Array2<f64>, coeffs: &[Array1<f64>]) -> Array1<f64> {
    let st = shift.t();
    let n = coeffs.len();
    let mut acc = coeffs[n - 1].clone();
    for c in coeffs[..n - 1].iter().rev() {
        acc = st.dot(&acc);
        acc += c;
    }
    st.dot(&acc)
}
