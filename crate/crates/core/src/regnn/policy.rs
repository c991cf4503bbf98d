use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use super::filter::{filter_from_powers, graph_filter_adjoint, shifted_powers, FilterTaps};
use crate::error::{Error, Result};
use crate::netsim::ChannelRealization;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Logistic function, evaluated on the branch that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Filter taps of every layer (`L x N`) and the per-link power budget.
///
/// All links share the same budget, so one set of parameters applies to
/// networks of any size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReGnnParams {
    pub taps: Array2<f64>,
    pub pmax: f64,
}

impl ReGnnParams {
    pub fn new(taps: Array2<f64>, pmax: f64) -> Result<Self> {
        if taps.nrows() == 0 || taps.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "a policy needs at least one layer and one tap".into(),
            ));
        }
        if !(pmax > 0.0 && pmax.is_finite()) {
            return Err(Error::InvalidConfig("pmax must be positive".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("taps must be finite".into()));
        }
        Ok(Self { taps, pmax })
    }

    pub fn from_layers(layers: &[FilterTaps], pmax: f64) -> Result<Self> {
        let n = layers.first().map_or(0, FilterTaps::len);
        if layers.iter().any(|l| l.len() != n) {
            return Err(Error::InvalidConfig("all layers need the same number of taps".into()));
        }
        let flat: Vec<f64> = layers.iter().flat_map(|l| l.0.iter().copied()).collect();
        let taps = Array2::from_shape_vec((layers.len(), n), flat)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::new(taps, pmax)
    }

    /// Uniform `[-1/sqrt(N), 1/sqrt(N)]` initialization.
    /// Taps uniform on `[-a, a]`, `a = 1/sqrt(N)`, folded to `[0, a]` on
    /// the hidden layers. The input and every shift power are nonnegative, so
    /// a hidden layer with mixed-sign taps often starts with every ReLU
    /// closed and then never receives a gradient.
    pub fn init(layers: usize, n: usize, pmax: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut taps = init_taps(layers, n, rng);
        let hidden = layers.saturating_sub(1);
        taps.slice_mut(ndarray::s![..hidden, ..]).mapv_inplace(f64::abs);
        Self::new(taps, pmax)
    }

    pub fn layers(&self) -> usize {
        self.taps.nrows()
    }

    pub fn filter_len(&self) -> usize {
        self.taps.ncols()
    }

    pub fn layer(&self, l: usize) -> FilterTaps {
        FilterTaps(self.taps.row(l).to_vec())
    }
}

pub fn init_taps(rows: usize, n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = 1.0 / (n as f64).sqrt();
    Array2::from_shape_simple_fn((rows, n), || rng.random_range(-a..=a))
}

/// Transmit powers in linear mW, within `[0, pmax]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(pub Array1<f64>);

impl PowerVector {
    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }
}

/// Activations cached by the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input of each layer, `z_0..z_{L-1}`.
    pub inputs: Vec<Array1<f64>>,
    /// `[S z, ..., S^N z]` for each layer input.
    pub powers: Vec<Vec<Array1<f64>>>,
    /// Filter outputs before the nonlinearity.
    pub pre: Vec<Array1<f64>>,
    /// Nonlinearity outputs (the final entry is the unscaled sigmoid).
    pub post: Vec<Array1<f64>>,
}

/// Gradient of an objective with respect to [`ReGnnParams::taps`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads(pub Array2<f64>);

pub(crate) fn default_input(k: usize) -> Array1<f64> {
    Array1::ones(k)
}

/// Runs the policy on one slot. `x` defaults to the all-ones signal.
pub fn regnn_forward(
    params: &ReGnnParams,
    g: &ChannelRealization,
    x: Option<ArrayView1<f64>>,
) -> Result<(PowerVector, ForwardTrace)> {
    let k = g.k();
    let mut z = match x {
        Some(x) if x.len() != k => return Err(Error::shape(format!("input of length {k}"), x.len())),
        Some(x) => x.to_owned(),
        None => default_input(k),
    };
    let layers = params.layers();
    let n = params.filter_len();
    let mut trace = ForwardTrace {
        inputs: Vec::with_capacity(layers),
        powers: Vec::with_capacity(layers),
        pre: Vec::with_capacity(layers),
        post: Vec::with_capacity(layers),
    };
    for l in 0..layers {
        let powers = shifted_powers(g.shift(), z.view(), n);
        let a = filter_from_powers(params.taps.row(l), &powers);
        let out = if l + 1 == layers {
            a.mapv(sigmoid)
        } else {
            a.mapv(relu)
        };
        trace.inputs.push(std::mem::replace(&mut z, out.clone()));
        trace.powers.push(powers);
        trace.pre.push(a);
        trace.post.push(out);
    }
    let p = z.mapv(|s| params.pmax * s);
    Ok((PowerVector(p), trace))
}

/// Reverse pass: maps `d objective / d p` to `d objective / d taps`.
///
/// ReLU passes gradient only where its input is strictly positive.
pub fn regnn_backward(
    params: &ReGnnParams,
    g: &ChannelRealization,
    trace: &ForwardTrace,
    grad_p: ArrayView1<f64>,
) -> Result<ParamGrads> {
    let layers = params.layers();
    let n = params.filter_len();
    let k = g.k();
    let consistent = trace.pre.len() == layers
        && trace.powers.len() == layers
        && trace.inputs.len() == layers
        && trace.post.len() == layers
        && trace.powers.iter().all(|p| p.len() == n && p.iter().all(|v| v.len() == k))
        && trace.pre.iter().all(|a| a.len() == k);
    if !consistent {
        return Err(Error::TraceMismatch);
    }
    if grad_p.len() != k {
        return Err(Error::shape(format!("gradient of length {k}"), grad_p.len()));
    }
    let mut grads = Array2::zeros((layers, n));
    let last = layers - 1;
    let s = &trace.post[last];
    let mut upstream: Array1<f64> = ndarray::Zip::from(&grad_p)
        .and(s)
        .map_collect(|&gp, &s| gp * params.pmax * s * (1.0 - s));
    for l in (0..layers).rev() {
        if l != last {
            upstream.zip_mut_with(&trace.pre[l], |u, &a| {
                if a <= 0.0 {
                    *u = 0.0;
                }
            });
        }
        for (i, p) in trace.powers[l].iter().enumerate() {
            grads[[l, i]] = upstream.dot(p);
        }
        if l > 0 {
            upstream = graph_filter_adjoint(params.taps.row(l), g.shift(), upstream.view());
        }
    }
    Ok(ParamGrads(grads))
}
