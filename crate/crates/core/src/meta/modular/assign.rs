use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};

/// Logits `eta` (`L x M`) of the per-layer module distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentLogits(pub Array2<f64>);

impl AssignmentLogits {
    /// All-zero logits: every module equally likely.
    pub fn uniform(layers: usize, modules: usize) -> Self {
        Self(Array2::zeros((layers, modules)))
    }

    pub fn layers(&self) -> usize {
        self.0.nrows()
    }

    pub fn modules(&self) -> usize {
        self.0.ncols()
    }

    /// Softmax of every row.
    pub fn probabilities(&self) -> Array2<f64> {
        let mut p = self.0.clone();
        for mut row in p.rows_mut() {
            softmax_in_place(row.view_mut());
        }
        p
    }
}

/// Module index (0-based) used at each layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HardAssignment(pub Vec<usize>);

impl HardAssignment {
    pub fn validate(&self, modules: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= modules) {
            Some(&index) => Err(Error::IndexOutOfRange { index, modules }),
            None => Ok(()),
        }
    }

    /// Row-stochastic one-hot encoding.
    pub fn one_hot(&self, modules: usize) -> Result<SoftAssignment> {
        self.validate(modules)?;
        let mut s = Array2::zeros((self.0.len(), modules));
        for (l, &i) in self.0.iter().enumerate() {
            s[[l, i]] = 1.0;
        }
        Ok(SoftAssignment(s))
    }
}

/// Relaxed assignment: each row is a probability vector over modules.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment(pub Array2<f64>);

/// `lambda(e) = max(lambda0 * decay^e, lambda_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSchedule {
    pub lambda0: f64,
    pub decay: f64,
    pub lambda_min: f64,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            decay: (-0.025f64).exp(),
            lambda_min: 0.5,
        }
    }
}

impl TemperatureSchedule {
    pub fn new(lambda0: f64, decay: f64, lambda_min: f64) -> Result<Self> {
        let s = Self {
            lambda0,
            decay,
            lambda_min,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda0 >= self.lambda_min && self.lambda0.is_finite()) {
            return Err(Error::InvalidConfig("temperatures need lambda0 >= lambda_min > 0".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig("temperature decay must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn at(&self, epoch: usize) -> f64 {
        let e = i32::try_from(epoch).unwrap_or(i32::MAX);
        (self.lambda0 * self.decay.powi(e)).max(self.lambda_min)
    }
}

/// Standard Gumbel noise `-ln(-ln u)`, `u` uniform on the open unit interval.
pub fn gumbel_noise(layers: usize, modules: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((layers, modules), || {
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        -(-u.ln()).ln()
    })
}

/// Index of the largest entry; the lowest index wins ties.
pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(mut row: ndarray::ArrayViewMut1<f64>) {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    row.mapv_inplace(|v| (v - max).exp());
    let total = row.sum();
    row /= total;
}

fn check_noise(eta: &AssignmentLogits, eps: &Array2<f64>) -> Result<()> {
    if eta.0.dim() != eps.dim() {
        return Err(Error::shape(format!("{:?} noise", eta.0.dim()), format!("{:?}", eps.dim())));
    }
    Ok(())
}

/// Gumbel-Max sample: `argmax_i (eta_l,i + eps_l,i)` per layer.
pub fn sample_hard(eta: &AssignmentLogits, eps: &Array2<f64>) -> Result<HardAssignment> {
    check_noise(eta, eps)?;
    let perturbed = &eta.0 + eps;
    Ok(HardAssignment(perturbed.rows().into_iter().map(argmax).collect()))
}

/// Concrete sample: `softmax((eta_l + eps_l) / lambda)` per layer.
pub fn sample_soft(eta: &AssignmentLogits, eps: &Array2<f64>, lambda: f64) -> Result<SoftAssignment> {
    check_noise(eta, eps)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("temperature must be positive".into()));
    }
    let mut s = (&eta.0 + eps) / lambda;
    for row in s.rows_mut() {
        softmax_in_place(row);
    }
    Ok(SoftAssignment(s))
}

/// Most likely assignment under `eta`: the per-layer argmax.
pub fn select_mode(eta: &AssignmentLogits) -> HardAssignment {
    HardAssignment(eta.0.rows().into_iter().map(argmax).collect())
}
