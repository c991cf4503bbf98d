use std::time::Instant;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::netsim::{ChannelRealization, SlotSource};
use crate::par::try_map_indexed;
use crate::regnn::{batch_objective_and_grad, Optimizer, ReGnnParams};
use crate::rng::RngStream;

/// How many periods each meta-step draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaBatch {
    All,
    /// Sampled without replacement, clamped to the number of periods.
    Sample(usize),
}

/// Step counts and sizes shared by the meta-learners and the joint baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    /// Meta-iterations `I`.
    pub meta_iters: usize,
    /// Task-specific updates per period.
    pub inner_steps: usize,
    /// Outer (shared-parameter) updates per meta-iteration.
    pub outer_steps: usize,
    /// Plain gradient-ascent step of the task-specific updates.
    pub inner_lr: f64,
    /// Adam step of the shared update.
    pub outer_lr: f64,
    pub meta_batch: MetaBatch,
    /// Mini-batch of (period, slot) pairs for joint learning.
    pub joint_batch: usize,
    /// Receiver noise power, linear mW.
    pub sigma2: f64,
    /// Fill the `wall_ms` log column. Off by default so logs are reproducible.
    pub record_wall_clock: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            meta_iters: 200,
            inner_steps: 5,
            outer_steps: 5,
            inner_lr: 1e-4,
            outer_lr: 1e-4,
            meta_batch: MetaBatch::All,
            joint_batch: 64,
            sigma2: crate::netsim::dbm_to_linear(-70.0),
            record_wall_clock: false,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.outer_steps == 0 || self.joint_batch == 0 {
            return bad("outer_steps and joint_batch must be positive");
        }
        if !(self.inner_lr > 0.0 && self.outer_lr > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad("noise power must be positive");
        }
        if self.meta_batch == MetaBatch::Sample(0) {
            return bad("meta-batch must draw at least one period");
        }
        Ok(())
    }
}

/// One row of a training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaLogRow {
    pub meta_iter: usize,
    /// Mean test-slot sum-rate after adaptation (pooled train objective for
    /// joint learning).
    pub objective: f64,
    pub wall_ms: f64,
}

/// `steps` plain ascent steps on the mean sum-rate of `train`.
pub fn inner_adapt(
    init: &ReGnnParams,
    train: &[&ChannelRealization],
    steps: usize,
    gamma: f64,
    sigma2: f64,
) -> Result<ReGnnParams> {
    if train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut params = init.clone();
    for _ in 0..steps {
        let (_, grads) = batch_objective_and_grad(&params, train, sigma2)?;
        params.taps.scaled_add(gamma, &grads.0);
    }
    Ok(params)
}

pub(crate) fn select_periods(n: usize, batch: MetaBatch, rng: &mut RngStream) -> Vec<usize> {
    match batch {
        MetaBatch::All => (0..n).collect(),
        MetaBatch::Sample(b) if b >= n => (0..n).collect(),
        MetaBatch::Sample(b) => {
            let mut idx = sample(rng, n, b).into_vec();
            idx.sort_unstable();
            idx
        }
    }
}

/// One first-order MAML update of the shared initialization.
///
/// Each selected period adapts a copy of `init` on its train slots; the
/// test-slot gradients at the adapted parameters are averaged and applied
/// with `opt`. Returns the new initialization and the mean adapted test
/// objective.
pub fn fomaml_meta_step<S: SlotSource>(
    init: &ReGnnParams,
    periods: &[S],
    selected: &[usize],
    cfg: &MetaConfig,
    opt: &mut Optimizer,
) -> Result<(ReGnnParams, f64)> {
    if selected.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_period = try_map_indexed(selected.len(), |i| {
        let period = &periods[selected[i]];
        let adapted = inner_adapt(init, &period.train_slots(), cfg.inner_steps, cfg.inner_lr, cfg.sigma2)?;
        batch_objective_and_grad(&adapted, &period.test_slots(), cfg.sigma2)
    })?;
    let mut grads = Array2::zeros(init.taps.raw_dim());
    let mut objective = 0.0;
    for (v, g) in &per_period {
        objective += v;
        grads += &g.0;
    }
    let n = selected.len() as f64;
    grads /= n;
    let mut next = init.clone();
    opt.step(&mut next.taps, &grads)?;
    Ok((next, objective / n))
}

/// Runs `cfg.meta_iters` meta-iterations of `cfg.outer_steps` FOMAML steps each.
pub fn meta_train_fomaml<S: SlotSource>(
    meta_data: &[S],
    init: ReGnnParams,
    cfg: &MetaConfig,
    rng: &RngStream,
) -> Result<(ReGnnParams, Vec<MetaLogRow>)> {
    cfg.validate()?;
    if meta_data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let start = Instant::now();
    let mut opt = Optimizer::adam(cfg.outer_lr)?;
    let mut sampler = rng.child("meta-batch");
    let mut params = init;
    let mut log = Vec::with_capacity(cfg.meta_iters);
    for it in 0..cfg.meta_iters {
        let mut objective = 0.0;
        for _ in 0..cfg.outer_steps {
            let selected = select_periods(meta_data.len(), cfg.meta_batch, &mut sampler);
            let (next, v) = fomaml_meta_step(&params, meta_data, &selected, cfg, &mut opt)?;
            params = next;
            objective += v;
        }
        log.push(MetaLogRow {
            meta_iter: it,
            objective: objective / cfg.outer_steps as f64,
            wall_ms: wall_ms(cfg, start),
        });
    }
    Ok((params, log))
}

pub(crate) fn wall_ms(cfg: &MetaConfig, start: Instant) -> f64 {
    if cfg.record_wall_clock {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Joint-learning baseline: one policy trained with Adam on mini-batches of
/// (period, train slot) pairs drawn uniformly from every period.
///
/// Runs `meta_iters * outer_steps` updates so that its budget of shared
/// updates matches the meta-learners'.
pub fn joint_train<S: SlotSource>(
    meta_data: &[S],
    init: ReGnnParams,
    cfg: &MetaConfig,
    rng: &RngStream,
) -> Result<(ReGnnParams, Vec<MetaLogRow>)> {
    cfg.validate()?;
    let pool: Vec<&ChannelRealization> = meta_data.iter().flat_map(|p| p.train_slots()).collect();
    if pool.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let start = Instant::now();
    let mut opt = Optimizer::adam(cfg.outer_lr)?;
    let mut draws = rng.child("joint-batch");
    let mut params = init;
    let mut log = Vec::with_capacity(cfg.meta_iters);
    for it in 0..cfg.meta_iters {
        let mut objective = 0.0;
        for _ in 0..cfg.outer_steps {
            let batch: Vec<&ChannelRealization> = (0..cfg.joint_batch)
                .map(|_| pool[draws.random_range(0..pool.len())])
                .collect();
            let (v, grads) = batch_objective_and_grad(&params, &batch, cfg.sigma2)?;
            opt.step(&mut params.taps, &grads.0)?;
            objective += v;
        }
        log.push(MetaLogRow {
            meta_iter: it,
            objective: objective / cfg.outer_steps as f64,
            wall_ms: wall_ms(cfg, start),
        });
    }
    Ok((params, log))
}

/// Fine-tunes on the first `budget` train slots of a new period. The
/// period's test slots are never read.
pub fn runtime_finetune<S: SlotSource>(
    params: &ReGnnParams,
    test_period: &S,
    budget: usize,
    steps: usize,
    gamma: f64,
    sigma2: f64,
) -> Result<ReGnnParams> {
    if budget == 0 || steps == 0 {
        return Ok(params.clone());
    }
    let train = test_period.train_slots();
    let used = &train[..budget.min(train.len())];
    inner_adapt(params, used, steps, gamma, sigma2)
}
