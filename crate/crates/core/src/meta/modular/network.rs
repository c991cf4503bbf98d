use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use super::assign::{HardAssignment, SoftAssignment};
use crate::error::{Error, Result};
use crate::netsim::ChannelRealization;
use crate::regnn::{
    adjoint_of_sums, default_input, filter_from_powers, init_taps, regnn_forward, relu, shifted_powers,
    sigmoid, FilterTaps, PowerVector, ReGnnParams,
};

/// Repository of `M` filters (`M x N` taps), any of which may serve at any
/// layer, and the shared per-link power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSet {
    pub taps: Array2<f64>,
    pub pmax: f64,
}

impl ModuleSet {
    pub fn new(taps: Array2<f64>, pmax: f64) -> Result<Self> {
        // Same invariants as a policy with one row per module.
        let p = ReGnnParams::new(taps, pmax)?;
        Ok(Self { taps: p.taps, pmax })
    }

    /// Independent draws on `[0, a]`, `a = 1/sqrt(N)`: any module may land
    /// on a hidden layer, where negative taps can close every ReLU.
    pub fn init(modules: usize, n: usize, pmax: f64, rng: &mut impl Rng) -> Result<Self> {
        Self::new(init_taps(modules, n, rng).mapv(f64::abs), pmax)
    }

    pub fn modules(&self) -> usize {
        self.taps.nrows()
    }

    pub fn filter_len(&self) -> usize {
        self.taps.ncols()
    }

    pub fn module(&self, i: usize) -> FilterTaps {
        FilterTaps(self.taps.row(i).to_vec())
    }

    /// Policy whose layer `l` is module `s[l]`.
    pub fn assemble(&self, s: &HardAssignment) -> Result<ReGnnParams> {
        s.validate(self.modules())?;
        if s.0.is_empty() {
            return Err(Error::InvalidConfig("an assignment needs at least one layer".into()));
        }
        let taps = Array2::from_shape_fn((s.0.len(), self.filter_len()), |(l, n)| self.taps[[s.0[l], n]]);
        ReGnnParams::new(taps, self.pmax)
    }
}

/// Activations of the soft forward pass.
#[derive(Debug, Clone)]
pub struct ModularTrace {
    /// `[S z, ..., S^N z]` for each layer input.
    pub powers: Vec<Vec<Array1<f64>>>,
    /// Filter output of every module at every layer (`M` vectors per layer).
    pub pre: Vec<Vec<Array1<f64>>>,
    /// Activated output of every module at every layer (the final layer
    /// stores the unscaled sigmoid).
    pub post: Vec<Vec<Array1<f64>>>,
}

/// Gradients of the soft forward with respect to module taps and to the
/// soft assignment weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularGrads {
    pub modules: Array2<f64>,
    pub weights: Array2<f64>,
}

fn check_soft(mods: &ModuleSet, s: &SoftAssignment) -> Result<()> {
    if s.0.ncols() != mods.modules() || s.0.nrows() == 0 {
        return Err(Error::shape(
            format!("L x {} soft assignment", mods.modules()),
            format!("{:?}", s.0.dim()),
        ));
    }
    Ok(())
}

/// Soft mixture network: layer `l` outputs `sum_i s[l,i] act(filter_i(z))`,
/// mixing activated module outputs. The last layer mixes sigmoids and is
/// scaled by the power budget.
pub fn modular_forward_soft(
    mods: &ModuleSet,
    s: &SoftAssignment,
    g: &ChannelRealization,
    x: Option<ArrayView1<f64>>,
) -> Result<(PowerVector, ModularTrace)> {
    check_soft(mods, s)?;
    let k = g.k();
    let mut z = match x {
        Some(x) if x.len() != k => return Err(Error::shape(format!("input of length {k}"), x.len())),
        Some(x) => x.to_owned(),
        None => default_input(k),
    };
    let layers = s.0.nrows();
    let mut trace = ModularTrace {
        powers: Vec::with_capacity(layers),
        pre: Vec::with_capacity(layers),
        post: Vec::with_capacity(layers),
    };
    for l in 0..layers {
        let powers = shifted_powers(g.shift(), z.view(), mods.filter_len());
        let act: fn(f64) -> f64 = if l + 1 == layers { sigmoid } else { relu };
        let pre: Vec<Array1<f64>> = mods.taps.rows().into_iter().map(|t| filter_from_powers(t, &powers)).collect();
        let post: Vec<Array1<f64>> = pre.iter().map(|a| a.mapv(act)).collect();
        z = Array1::zeros(k);
        for (w, o) in s.0.row(l).iter().zip(&post) {
            z.scaled_add(*w, o);
        }
        trace.powers.push(powers);
        trace.pre.push(pre);
        trace.post.push(post);
    }
    z *= mods.pmax;
    Ok((PowerVector(z), trace))
}

/// Reverse pass of [`modular_forward_soft`].
pub fn modular_backward(
    mods: &ModuleSet,
    s: &SoftAssignment,
    g: &ChannelRealization,
    trace: &ModularTrace,
    grad_p: ArrayView1<f64>,
) -> Result<ModularGrads> {
    check_soft(mods, s)?;
    let (layers, m) = s.0.dim();
    let n = mods.filter_len();
    let k = g.k();
    let consistent = trace.powers.len() == layers
        && trace.pre.len() == layers
        && trace.post.len() == layers
        && trace.powers.iter().all(|p| p.len() == n && p.iter().all(|v| v.len() == k))
        && trace.pre.iter().chain(&trace.post).all(|v| v.len() == m && v.iter().all(|a| a.len() == k));
    if !consistent {
        return Err(Error::TraceMismatch);
    }
    if grad_p.len() != k {
        return Err(Error::shape(format!("gradient of length {k}"), grad_p.len()));
    }
    let mut grads = ModularGrads {
        modules: Array2::zeros((m, n)),
        weights: Array2::zeros((layers, m)),
    };
    // Gradient with respect to the mixed output of the current layer.
    let mut upstream = grad_p.mapv(|v| v * mods.pmax);
    for l in (0..layers).rev() {
        let last = l + 1 == layers;
        let mut coeffs = vec![Array1::<f64>::zeros(k); n];
        for i in 0..m {
            grads.weights[[l, i]] = upstream.dot(&trace.post[l][i]);
            let w = s.0[[l, i]];
            // Gradient at module i's filter output.
            let da: Array1<f64> = ndarray::Zip::from(&upstream)
                .and(&trace.pre[l][i])
                .and(&trace.post[l][i])
                .map_collect(|&u, &a, &o| {
                    let d = if last { o * (1.0 - o) } else if a > 0.0 { 1.0 } else { 0.0 };
                    w * u * d
                });
            for (t, p) in trace.powers[l].iter().enumerate() {
                grads.modules[[i, t]] += da.dot(p);
                coeffs[t].scaled_add(mods.taps[[i, t]], &da);
            }
        }
        if l > 0 {
            upstream = adjoint_of_sums(g.shift(), &coeffs);
        }
    }
    Ok(grads)
}

/// Discrete network with module `s[l]` at layer `l`; identical to
/// [`regnn_forward`] on [`ModuleSet::assemble`].
pub fn modular_forward_hard(
    mods: &ModuleSet,
    s: &HardAssignment,
    g: &ChannelRealization,
    x: Option<ArrayView1<f64>>,
) -> Result<PowerVector> {
    Ok(regnn_forward(&mods.assemble(s)?, g, x)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::modular::{gumbel_noise, sample_soft, AssignmentLogits};
    use crate::regnn::{sum_rate, sum_rate_grad_p};
    use crate::rng::RngStream;
    use ndarray::array;
    use rand::Rng;

    fn channel(k: usize, rng: &mut RngStream) -> ChannelRealization {
        ChannelRealization::new(Array2::from_shape_simple_fn((k, k), || rng.random_range(0.05..1.0)), 0, 0).unwrap()
    }

    #[test]
    fn one_hot_soft_equals_hard() {
        let mut rng = RngStream::new(1);
        let mods = ModuleSet::init(3, 4, 2.0, &mut rng).unwrap();
        let g = channel(5, &mut rng);
        let s = HardAssignment(vec![2, 0, 1]);
        let (soft, _) = modular_forward_soft(&mods, &s.one_hot(3).unwrap(), &g, None).unwrap();
        let hard = modular_forward_hard(&mods, &s, &g, None).unwrap();
        for (a, b) in soft.0.iter().zip(hard.0.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_modules_ignore_weights() {
        let mut rng = RngStream::new(2);
        let row = init_taps(1, 3, &mut rng);
        let mods = ModuleSet::new(ndarray::concatenate![ndarray::Axis(0), row, row], 1.0).unwrap();
        let g = channel(4, &mut rng);
        let a = modular_forward_soft(&mods, &SoftAssignment(array![[0.9, 0.1], [0.2, 0.8]]), &g, None).unwrap().0;
        let b = modular_forward_soft(&mods, &SoftAssignment(array![[0.5, 0.5], [0.0, 1.0]]), &g, None).unwrap().0;
        for (x, y) in a.0.iter().zip(b.0.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn half_mixture_on_two_nodes() {
        // Single layer so the output is the mean of the two sigmoid responses.
        let mods = ModuleSet::new(array![[1.0], [-0.5]], 2.0).unwrap();
        let g = ChannelRealization::new(array![[0.0, 1.0], [1.0, 0.0]], 0, 0).unwrap();
        let (p, _) = modular_forward_soft(&mods, &SoftAssignment(array![[0.5, 0.5]]), &g, None).unwrap();
        let expected = 2.0 * 0.5 * (sigmoid(1.0) + sigmoid(-0.5));
        assert!(p.0.iter().all(|&v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn single_module_matches_plain_policy() {
        let mut rng = RngStream::new(3);
        let mods = ModuleSet::init(1, 4, 1.0, &mut rng).unwrap();
        let g = channel(5, &mut rng);
        let params = ReGnnParams::new(ndarray::concatenate![ndarray::Axis(0), mods.taps, mods.taps], 1.0).unwrap();
        assert_eq!(
            modular_forward_hard(&mods, &HardAssignment(vec![0, 0]), &g, None).unwrap(),
            regnn_forward(&params, &g, None).unwrap().0
        );
        assert_eq!(
            modular_forward_hard(&mods, &HardAssignment(vec![0, 1]), &g, None).unwrap_err(),
            Error::IndexOutOfRange { index: 1, modules: 1 }
        );
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let sigma2 = 0.1;
        for _ in 0..5 {
            let mods = ModuleSet::init(3, 3, 1.0, &mut rng).unwrap();
            let g = channel(4, &mut rng);
            let s = sample_soft(&AssignmentLogits(gumbel_noise(2, 3, &mut rng)), &gumbel_noise(2, 3, &mut rng), 0.7)
                .unwrap();
            let f = |m: &ModuleSet, s: &SoftAssignment| {
                let (p, _) = modular_forward_soft(m, s, &g, None).unwrap();
                sum_rate(&g, &p, sigma2)
            };
            let (p, trace) = modular_forward_soft(&mods, &s, &g, None).unwrap();
            let grads = modular_backward(&mods, &s, &g, &trace, sum_rate_grad_p(&g, &p, sigma2).view()).unwrap();
            let h = 1e-6;
            let check = |fd: f64, an: f64| assert!((fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()) + 1e-8, "{fd} vs {an}");
            for idx in ndarray::indices(mods.taps.dim()) {
                let (mut a, mut b) = (mods.clone(), mods.clone());
                a.taps[idx] += h;
                b.taps[idx] -= h;
                check((f(&a, &s) - f(&b, &s)) / (2.0 * h), grads.modules[idx]);
            }
            for idx in ndarray::indices(s.0.dim()) {
                let (mut a, mut b) = (s.clone(), s.clone());
                a.0[idx] += h;
                b.0[idx] -= h;
                check((f(&mods, &a) - f(&mods, &b)) / (2.0 * h), grads.weights[idx]);
            }
        }
    }
}
