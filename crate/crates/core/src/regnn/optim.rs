use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `theta <- theta + step * grad`.
    GradientAscent,
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Ascent optimizer state. Every update *increases* the objective whose
/// gradient it is given.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub step_size: f64,
    first: Option<Array2<f64>>,
    second: Option<Array2<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        Ok(Self {
            kind,
            step_size,
            first: None,
            second: None,
            steps: 0,
        })
    }

    pub fn gradient_ascent(step_size: f64) -> Result<Self> {
        Self::new(OptimizerKind::GradientAscent, step_size)
    }

    pub fn adam(step_size: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), step_size)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one ascent step in place.
    pub fn step(&mut self, params: &mut Array2<f64>, grads: &Array2<f64>) -> Result<()> {
        if params.dim() != grads.dim() {
            return Err(Error::shape(format!("{:?}", params.dim()), format!("{:?}", grads.dim())));
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::GradientAscent => params.scaled_add(self.step_size, grads),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let m = self.first.get_or_insert_with(|| Array2::zeros(grads.raw_dim()));
                let v = self.second.get_or_insert_with(|| Array2::zeros(grads.raw_dim()));
                if m.dim() != grads.dim() {
                    return Err(Error::shape(format!("{:?}", m.dim()), format!("{:?}", grads.dim())));
                }
                m.zip_mut_with(grads, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
                v.zip_mut_with(grads, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let lr = self.step_size;
                ndarray::Zip::from(params).and(&*m).and(&*v).for_each(|p, &m, &v| {
                    *p += lr * (m / c1) / ((v / c2).sqrt() + eps);
                });
            }
        }
        Ok(())
    }
}

/// Functional form of [`Optimizer::step`].
pub fn optimizer_step(state: &mut Optimizer, params: &Array2<f64>, grads: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = params.clone();
    state.step(&mut out, grads)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn plain_ascent() {
        let mut opt = Optimizer::gradient_ascent(0.1).unwrap();
        let p = array![[1.0, 2.0]];
        assert_eq!(optimizer_step(&mut opt, &p, &array![[0.0, 0.0]]).unwrap(), p);
        let q = optimizer_step(&mut opt, &p, &array![[1.0, 0.0]]).unwrap();
        assert!((q[[0, 0]] - 1.1).abs() < 1e-15);
        assert_eq!(q[[0, 1]], 2.0);
    }

    #[test]
    fn adam_hand_simulated() {
        // Constant gradient g: m_t/c1 = g and v_t/c2 = g^2 exactly, so every
        // step moves by lr * g / (|g| + eps).
        let mut opt = Optimizer::adam(0.01).unwrap();
        let mut p = array![[0.0]];
        let g = array![[2.0]];
        let mut prev = 0.0;
        for t in 1..=3 {
            opt.step(&mut p, &g).unwrap();
            let expected = t as f64 * 0.01 * 2.0 / (2.0 + 1e-8);
            assert!((p[[0, 0]] - expected).abs() < 1e-12, "step {t}");
            assert!(p[[0, 0]] > prev);
            prev = p[[0, 0]];
        }
    }

    #[test]
    fn rejects_bad_step_and_shapes() {
        assert!(Optimizer::adam(0.0).is_err());
        let mut opt = Optimizer::adam(0.1).unwrap();
        assert!(opt.step(&mut array![[1.0]], &array![[1.0, 2.0]]).is_err());
    }
}
