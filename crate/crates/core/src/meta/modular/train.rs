use std::time::Instant;

use ndarray::{Array1, Array2, Axis};

use super::assign::{
    gumbel_noise, sample_soft, select_mode, AssignmentLogits, HardAssignment, SoftAssignment, TemperatureSchedule,
};
use super::network::{modular_backward, modular_forward_soft, ModuleSet};
use crate::error::{Error, Result};
use crate::meta::blackbox::{select_periods, wall_ms, MetaConfig, MetaLogRow};
use crate::netsim::{ChannelRealization, SlotSource};
use crate::par::try_map_indexed;
use crate::regnn::{batch_objective, sum_rate, sum_rate_grad_p, Optimizer};
use crate::rng::RngStream;

/// Largest `M^L` the exhaustive search accepts by default.
pub const DEFAULT_SEARCH_CAP: u128 = 4096;

/// Settings of modular meta-learning. `meta.inner_steps` counts logit
/// updates per period; `meta.outer_steps` counts module-set updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularConfig {
    pub meta: MetaConfig,
    pub modules: usize,
    pub layers: usize,
    pub schedule: TemperatureSchedule,
}

impl Default for ModularConfig {
    fn default() -> Self {
        Self {
            meta: MetaConfig {
                inner_steps: 2,
                ..MetaConfig::default()
            },
            modules: 6,
            layers: 2,
            schedule: TemperatureSchedule::default(),
        }
    }
}

impl ModularConfig {
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        self.schedule.validate()?;
        if self.modules == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig("need at least one module and one layer".into()));
        }
        Ok(())
    }
}

/// Temperature used by [`adapt_logits`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Annealing {
    /// One temperature for every step (meta-training anneals per iteration).
    Fixed(f64),
    /// Step `t` uses `schedule.at(t)` (runtime adaptation).
    PerStep(TemperatureSchedule),
}

impl Annealing {
    fn at(&self, step: usize) -> f64 {
        match self {
            Annealing::Fixed(l) => *l,
            Annealing::PerStep(s) => s.at(step),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptLogRow {
    pub step: usize,
    pub temperature: f64,
    /// Mean train sum-rate of the relaxed network before the step.
    pub train_sum_rate: f64,
    /// Mean entropy (nats) of the assignment distribution rows after the step.
    pub entropy_of_rows: f64,
}

fn mean_row_entropy(eta: &AssignmentLogits) -> f64 {
    let p = eta.probabilities();
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    h / p.nrows() as f64
}

/// Mean objective of the relaxed network over `batch` and its gradients
/// with respect to the modules and the soft weights.
fn soft_objective_and_grads(
    mods: &ModuleSet,
    s: &SoftAssignment,
    batch: &[&ChannelRealization],
    sigma2: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_slot = try_map_indexed(batch.len(), |i| {
        let g = batch[i];
        let (p, trace) = modular_forward_soft(mods, s, g, None)?;
        let grads = modular_backward(mods, s, g, &trace, sum_rate_grad_p(g, &p, sigma2).view())?;
        Ok::<_, Error>((sum_rate(g, &p, sigma2), grads))
    })?;
    let mut value = 0.0;
    let mut dm = Array2::zeros(mods.taps.raw_dim());
    let mut ds = Array2::zeros(s.0.raw_dim());
    for (v, g) in &per_slot {
        value += v;
        dm += &g.modules;
        ds += &g.weights;
    }
    let n = batch.len() as f64;
    Ok((value / n, dm / n, ds / n))
}

/// Mean relaxed objective over `batch` at `softmax((eta + eps) / lambda)`
/// and its exact gradient with respect to `eta`.
pub fn logits_grad(
    mods: &ModuleSet,
    eta: &AssignmentLogits,
    eps: &Array2<f64>,
    lambda: f64,
    batch: &[&ChannelRealization],
    sigma2: f64,
) -> Result<(f64, Array2<f64>)> {
    let s = sample_soft(eta, eps, lambda)?;
    let (value, _, ds) = soft_objective_and_grads(mods, &s, batch, sigma2)?;
    // Softmax Jacobian: d eta_j = s_j (ds_j - <s, ds>) / lambda.
    let inner: Array1<f64> = (&s.0 * &ds).sum_axis(Axis(1));
    let mut grad = &ds - &inner.insert_axis(Axis(1));
    grad *= &s.0;
    grad /= lambda;
    Ok((value, grad))
}

/// Ascent on the logits with one Gumbel sample per step. The modules are
/// only read.
#[allow(clippy::too_many_arguments)]
pub fn adapt_logits(
    mods: &ModuleSet,
    eta: &AssignmentLogits,
    train: &[&ChannelRealization],
    steps: usize,
    gamma: f64,
    annealing: Annealing,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<(AssignmentLogits, Vec<AdaptLogRow>)> {
    if eta.modules() != mods.modules() {
        return Err(Error::shape(format!("logits over {} modules", mods.modules()), eta.modules()));
    }
    if train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut eta = eta.clone();
    let mut log = Vec::with_capacity(steps);
    for step in 0..steps {
        let lambda = annealing.at(step);
        let eps = gumbel_noise(eta.layers(), eta.modules(), rng);
        let (value, grad) = logits_grad(mods, &eta, &eps, lambda, train, sigma2)?;
        eta.0.scaled_add(gamma, &grad);
        log.push(AdaptLogRow {
            step,
            temperature: lambda,
            train_sum_rate: value,
            entropy_of_rows: mean_row_entropy(&eta),
        });
    }
    Ok((eta, log))
}

/// One first-order update of the module set from each selected period's
/// test slots at its adapted logits. `etas[i]` belongs to `selected[i]`.
/// Returns the new set and the mean relaxed test objective.
#[allow(clippy::too_many_arguments)]
pub fn modules_outer_step<S: SlotSource>(
    mods: &ModuleSet,
    etas: &[AssignmentLogits],
    periods: &[S],
    selected: &[usize],
    lambda: f64,
    sigma2: f64,
    opt: &mut Optimizer,
    rng: &RngStream,
) -> Result<(ModuleSet, f64)> {
    if selected.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if etas.len() != selected.len() {
        return Err(Error::shape(format!("{} adapted logits", selected.len()), etas.len()));
    }
    let per_period = try_map_indexed(selected.len(), |i| {
        let eta = &etas[i];
        let eps = gumbel_noise(eta.layers(), eta.modules(), &mut rng.child_indexed("noise", i as u64));
        let s = sample_soft(eta, &eps, lambda)?;
        let (v, dm, _) = soft_objective_and_grads(mods, &s, &periods[selected[i]].test_slots(), sigma2)?;
        Ok::<_, Error>((v, dm))
    })?;
    let mut grads = Array2::zeros(mods.taps.raw_dim());
    let mut objective = 0.0;
    for (v, g) in &per_period {
        objective += v;
        grads += g;
    }
    let n = selected.len() as f64;
    grads /= n;
    let mut next = mods.clone();
    opt.step(&mut next.taps, &grads)?;
    Ok((next, objective / n))
}

/// Alternates per-period logit adaptation on train slots (from uniform
/// logits every iteration) with module-set updates on test slots. The
/// temperature follows `cfg.schedule` across iterations.
pub fn meta_train_modular<S: SlotSource>(
    meta_data: &[S],
    init: ModuleSet,
    cfg: &ModularConfig,
    rng: &RngStream,
) -> Result<(ModuleSet, Vec<MetaLogRow>)> {
    cfg.validate()?;
    if meta_data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if init.modules() != cfg.modules {
        return Err(Error::shape(format!("{} modules", cfg.modules), init.modules()));
    }
    let meta = &cfg.meta;
    let start = Instant::now();
    let mut opt = Optimizer::adam(meta.outer_lr)?;
    let mut sampler = rng.child("meta-batch");
    let mut mods = init;
    let mut log = Vec::with_capacity(meta.meta_iters);
    for it in 0..meta.meta_iters {
        let lambda = cfg.schedule.at(it);
        let iter_rng = rng.child_indexed("iteration", it as u64);
        let selected = select_periods(meta_data.len(), meta.meta_batch, &mut sampler);
        let etas = try_map_indexed(selected.len(), |i| {
            let tau = selected[i];
            let mut r = iter_rng.child_indexed("adapt", tau as u64);
            let eta = AssignmentLogits::uniform(cfg.layers, cfg.modules);
            let train = meta_data[tau].train_slots();
            adapt_logits(&mods, &eta, &train, meta.inner_steps, meta.inner_lr, Annealing::Fixed(lambda), meta.sigma2, &mut r)
                .map(|(eta, _)| eta)
        })?;
        let mut objective = 0.0;
        for o in 0..meta.outer_steps {
            let step_rng = iter_rng.child_indexed("outer", o as u64);
            let (next, v) =
                modules_outer_step(&mods, &etas, meta_data, &selected, lambda, meta.sigma2, &mut opt, &step_rng)?;
            mods = next;
            objective += v;
        }
        log.push(MetaLogRow {
            meta_iter: it,
            objective: objective / meta.outer_steps as f64,
            wall_ms: wall_ms(meta, start),
        });
    }
    Ok((mods, log))
}

/// Runtime adaptation with a frozen repository: logits start uniform, are
/// adapted on the first `budget` train slots with the temperature annealed
/// per step, and the mode of the result is returned.
#[allow(clippy::too_many_arguments)]
pub fn runtime_adapt_modular<S: SlotSource>(
    mods: &ModuleSet,
    layers: usize,
    test_period: &S,
    budget: usize,
    steps: usize,
    gamma: f64,
    schedule: TemperatureSchedule,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<(HardAssignment, AssignmentLogits, Vec<AdaptLogRow>)> {
    let eta = AssignmentLogits::uniform(layers, mods.modules());
    if budget == 0 || steps == 0 {
        return Ok((select_mode(&eta), eta, Vec::new()));
    }
    let train = test_period.train_slots();
    let used = &train[..budget.min(train.len())];
    let (eta, log) = adapt_logits(mods, &eta, used, steps, gamma, Annealing::PerStep(schedule), sigma2, rng)?;
    Ok((select_mode(&eta), eta, log))
}

/// Every assignment of `modules` modules to `layers` layers, in
/// lexicographic order.
pub fn enumerate_assignments(modules: usize, layers: usize, cap: u128) -> Result<Vec<HardAssignment>> {
    let size = u32::try_from(layers)
        .ok()
        .and_then(|l| (modules as u128).checked_pow(l))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0; layers];
    for _ in 0..size {
        out.push(HardAssignment(cur.clone()));
        for d in (0..layers).rev() {
            cur[d] += 1;
            if cur[d] < modules {
                break;
            }
            cur[d] = 0;
        }
    }
    Ok(out)
}

/// Best hard assignment on `train` by full enumeration; ties go to the
/// lexicographically smallest assignment.
pub fn exhaustive_assignment(
    mods: &ModuleSet,
    layers: usize,
    train: &[&ChannelRealization],
    sigma2: f64,
    cap: u128,
) -> Result<(HardAssignment, f64)> {
    if train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let candidates = enumerate_assignments(mods.modules(), layers, cap)?;
    let values = try_map_indexed(candidates.len(), |i| batch_objective(&mods.assemble(&candidates[i])?, train, sigma2))?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok((candidates[best].clone(), values[best]))
}
