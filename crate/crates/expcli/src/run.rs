//! The experiment loop: trials in parallel, results written in trial order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use metapower::analysis::{
    assignment_histogram, cka_matrix, fmt_float, mean_stderr, relative_rate_gain, write_cka_csv, write_gain_csv,
    write_histogram_csv, CkaMatrix, GainRow, ProbeBatch,
};
use metapower::meta::modular::{
    exhaustive_assignment, meta_train_modular, runtime_adapt_modular, HardAssignment, ModularConfig, ModuleSet,
};
use metapower::meta::{joint_train, meta_train_fomaml, runtime_finetune, MetaLogRow};
use metapower::netsim::{generate_meta_dataset, generate_period, PeriodDataset, SimConfig, SlotSource};
use metapower::par::{IntoParallelIterator, ParallelIterator};
use metapower::regnn::{batch_objective, ReGnnParams};
use metapower::RngStream;

use crate::config::{ExperimentConfig, Method, SweepVar};
use crate::error::Result;

/// Period id given to the held-out test period of each trial.
pub const TEST_PERIOD_ID: u64 = 1 << 32;

pub const RESULTS_HEADER: &str = "experiment,sweep_var,sweep_value,method,trial,test_sum_rate,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub method: Method,
    pub trial: usize,
    /// Mean sum-rate over the test period's test slots, bits per channel use.
    pub test_sum_rate: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.experiment,
            self.sweep_var.name(),
            fmt_float(self.sweep_value),
            self.method,
            self.trial,
            fmt_float(self.test_sum_rate),
            fmt_float(self.wall_ms)
        )
    }
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// `(method, sweep value) -> module usage` over all trials.
    pub histograms: Vec<(Method, f64, Vec<f64>)>,
    /// `(method, sweep value) -> mean CKA matrix and number of trials used`.
    pub cka: Vec<(Method, f64, Option<CkaMatrix>, usize)>,
    /// `(method, sweep value) -> mean, stderr` of the rate gain over joint.
    pub gains: Vec<(Method, Vec<GainRow>)>,
}

/// A training setting: the sweep values evaluated on one trained set of
/// policies.
struct Context {
    values: Vec<usize>,
    sim: SimConfig,
    meta_periods: usize,
    label: String,
}

fn contexts(cfg: &ExperimentConfig) -> Vec<Context> {
    let base = |values: Vec<usize>, sim: SimConfig, meta_periods: usize, label: String| Context {
        values,
        sim,
        meta_periods,
        label,
    };
    if !cfg.sweep.affects_training() {
        return vec![base((0..cfg.sweep_values.len()).collect(), cfg.sim.clone(), cfg.meta_periods, "-".into())];
    }
    cfg.sweep_values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut sim = cfg.sim.clone();
            let mut periods = cfg.meta_periods;
            match cfg.sweep {
                SweepVar::InterferenceRadius => sim.interference_radius = Some(v),
                SweepVar::MetaPeriods => periods = v as usize,
                _ => unreachable!("sweep does not affect training"),
            }
            base(vec![i], sim, periods, v.to_string())
        })
        .collect()
}

#[derive(Default)]
struct TrialOutput {
    rows: Vec<ResultRow>,
    assignments: Vec<(Method, usize, HardAssignment)>,
    cka: Vec<(Method, usize, Option<CkaMatrix>)>,
    logs: Vec<(Method, String, Vec<MetaLogRow>)>,
}

fn modular_config(cfg: &ExperimentConfig, modules: usize) -> ModularConfig {
    ModularConfig {
        modules,
        layers: cfg.layers,
        ..cfg.modular.clone()
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let root = RngStream::new(cfg.seed).child_indexed("trial", trial as u64);
    let sigma2 = cfg.sim.noise_linear();
    let pmax = cfg.sim.pmax_linear();
    let mut out = TrialOutput::default();
    let mut module_counts: Vec<usize> = cfg.methods.iter().filter_map(Method::modules).collect();
    module_counts.sort_unstable();
    module_counts.dedup();
    for ctx in contexts(cfg) {
        let meta = generate_meta_dataset(&ctx.sim, ctx.meta_periods, &root.child("meta"))?;
        let test = generate_period(&ctx.sim, TEST_PERIOD_ID, &root.child("test"))?;
        let init = ReGnnParams::init(cfg.layers, cfg.taps, pmax, &mut root.child("init-policy"))?;
        let mut joint = None;
        let mut fomaml = None;
        if cfg.methods.contains(&Method::Joint) {
            let (p, log) = joint_train(&meta, init.clone(), &cfg.fomaml, &root.child("train-joint"))?;
            joint = Some(p);
            out.logs.push((Method::Joint, ctx.label.clone(), log));
        }
        if cfg.methods.contains(&Method::Fomaml) {
            let (p, log) = meta_train_fomaml(&meta, init.clone(), &cfg.fomaml, &root.child("train-fomaml"))?;
            fomaml = Some(p);
            out.logs.push((Method::Fomaml, ctx.label.clone(), log));
        }
        let mut module_sets = BTreeMap::new();
        for &m in &module_counts {
            let init = ModuleSet::init(m, cfg.taps, pmax, &mut root.child_indexed("init-modules", m as u64))?;
            let mcfg = modular_config(cfg, m);
            let (mods, log) = meta_train_modular(&meta, init, &mcfg, &root.child_indexed("train-modular", m as u64))?;
            out.logs.push((Method::Modular(m), ctx.label.clone(), log));
            if cfg.outputs.cka {
                let probe = ProbeBatch::draw(&ctx.sim, cfg.probe_size, cfg.probe_links, &root.child("probe"))?;
                let cka = match cka_matrix(&mods, &probe) {
                    Ok(c) => Some(c),
                    Err(metapower::Error::DegenerateInput(_)) => None,
                    Err(e) => return Err(e.into()),
                };
                for &vi in &ctx.values {
                    out.cka.push((Method::Modular(m), vi, cka.clone()));
                }
            }
            module_sets.insert(m, mods);
        }
        for &vi in &ctx.values {
            let v = cfg.sweep_values[vi];
            let (budget, steps) = match cfg.sweep {
                SweepVar::AdaptSamples => (v as usize, cfg.adapt_steps),
                SweepVar::AdaptIters => (cfg.adapt_samples, v as usize),
                _ => (cfg.adapt_samples, cfg.adapt_steps),
            };
            for &method in &cfg.methods {
                let start = Instant::now();
                let eval = |p: &ReGnnParams| batch_objective(p, &test.test_slots(), sigma2);
                let rate = match method {
                    Method::Joint | Method::Fomaml => {
                        let base = if method == Method::Joint { &joint } else { &fomaml };
                        let base = base.as_ref().expect("trained above");
                        eval(&runtime_finetune(base, &test, budget, steps, cfg.adapt_lr, sigma2)?)?
                    }
                    Method::Modular(m) => {
                        let mods = &module_sets[&m];
                        let mut rng = root.child_indexed("runtime-modular", m as u64);
                        let (s, _, _) = runtime_adapt_modular(
                            mods,
                            cfg.layers,
                            &test,
                            budget,
                            steps,
                            cfg.logit_lr,
                            cfg.schedule(),
                            sigma2,
                            &mut rng,
                        )?;
                        let r = eval(&mods.assemble(&s)?)?;
                        out.assignments.push((method, vi, s));
                        r
                    }
                    Method::ModularExhaustive(m) => {
                        let mods = &module_sets[&m];
                        let s = exhaustive_choice(mods, cfg.layers, &test, budget, sigma2, cfg.search_cap)?;
                        eval(&mods.assemble(&s)?)?
                    }
                };
                out.rows.push(ResultRow {
                    experiment: cfg.name.clone(),
                    sweep_var: cfg.sweep,
                    sweep_value: v,
                    method,
                    trial,
                    test_sum_rate: rate,
                    wall_ms: if cfg.fomaml.record_wall_clock {
                        start.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    },
                });
            }
        }
    }
    // Contexts may visit sweep values out of order only if they are
    // data-dependent, in which case each holds exactly one value.
    out.rows.sort_by_key(|r| {
        let vi = cfg.sweep_values.iter().position(|&v| v == r.sweep_value).unwrap_or(0);
        let mi = cfg.methods.iter().position(|&m| m == r.method).unwrap_or(0);
        (vi, mi)
    });
    Ok(out)
}

/// Exhaustive search on the first `budget` train slots; with no slots the
/// default assignment (module 0 everywhere) is used.
fn exhaustive_choice(
    mods: &ModuleSet,
    layers: usize,
    test: &PeriodDataset,
    budget: usize,
    sigma2: f64,
    cap: u128,
) -> Result<HardAssignment> {
    let train = test.train_slots();
    let used = &train[..budget.min(train.len())];
    if used.is_empty() {
        return Ok(HardAssignment(vec![0; layers]));
    }
    Ok(exhaustive_assignment(mods, layers, used, sigma2, cap)?.0)
}

/// Writes trial outputs strictly in trial order as they complete.
struct OrderedWriter {
    next: usize,
    pending: BTreeMap<usize, Vec<ResultRow>>,
    out: BufWriter<File>,
}

impl OrderedWriter {
    fn submit(&mut self, trial: usize, rows: Vec<ResultRow>) -> std::io::Result<()> {
        self.pending.insert(trial, rows);
        while let Some(rows) = self.pending.remove(&self.next) {
            for r in rows {
                writeln!(self.out, "{}", r.to_csv())?;
            }
            self.out.flush()?;
            self.next += 1;
        }
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs every trial, writing `results.csv` incrementally plus the
/// configured logs, gain, CKA and histogram files under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.txt"), cfg.to_text())?;
    let mut results = create(out_dir, "results.csv")?;
    writeln!(results, "{RESULTS_HEADER}")?;
    results.flush()?;
    let writer = Mutex::new(OrderedWriter {
        next: 0,
        pending: BTreeMap::new(),
        out: results,
    });
    let outputs: Vec<Result<TrialOutput>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let out = run_trial(cfg, t)?;
            let rows = out.rows.clone();
            writer.lock().expect("writer poisoned").submit(t, rows)?;
            Ok(out)
        })
        .collect();
    let mut trials = Vec::with_capacity(outputs.len());
    for o in outputs {
        trials.push(o?);
    }
    finish(cfg, out_dir, trials)
}

fn finish(cfg: &ExperimentConfig, out_dir: &Path, trials: Vec<TrialOutput>) -> Result<ExperimentOutput> {
    let rows: Vec<ResultRow> = trials.iter().flat_map(|t| t.rows.clone()).collect();
    let mut output = ExperimentOutput {
        rows,
        histograms: Vec::new(),
        cka: Vec::new(),
        gains: Vec::new(),
    };
    if cfg.outputs.logs {
        write_logs(cfg, out_dir, &trials)?;
    }
    let modular: Vec<Method> = cfg.methods.iter().copied().filter(|m| matches!(m, Method::Modular(_))).collect();
    for &method in &modular {
        let Some(m) = method.modules() else { continue };
        for (vi, &v) in cfg.sweep_values.iter().enumerate() {
            if cfg.outputs.histogram {
                let runs: Vec<HardAssignment> = trials
                    .iter()
                    .flat_map(|t| t.assignments.iter().filter(|a| a.0 == method && a.1 == vi).map(|a| a.2.clone()))
                    .collect();
                let hist = assignment_histogram(&runs, m)?;
                let mut w = create(out_dir, &format!("histogram_{}_{}.csv", method.file_label(), v))?;
                write_histogram_csv(&mut w, &hist)?;
                w.flush()?;
                output.histograms.push((method, v, hist.to_vec()));
            }
            if cfg.outputs.cka {
                let mats: Vec<&CkaMatrix> = trials
                    .iter()
                    .flat_map(|t| t.cka.iter().filter(|c| c.0 == method && c.1 == vi))
                    .filter_map(|c| c.2.as_ref())
                    .collect();
                let mean = (!mats.is_empty()).then(|| {
                    let sum = mats.iter().fold(ndarray::Array2::zeros((m, m)), |acc, c| acc + &c.0);
                    CkaMatrix(sum / mats.len() as f64)
                });
                if let Some(c) = &mean {
                    let mut w = create(out_dir, &format!("cka_{}_{}.csv", method.file_label(), v))?;
                    write_cka_csv(&mut w, c)?;
                    w.flush()?;
                }
                output.cka.push((method, v, mean, mats.len()));
            }
        }
        if cfg.outputs.cka {
            let mut w = create(out_dir, &format!("cka_summary_{}.csv", method.file_label()))?;
            writeln!(w, "x_value,mean_off_diagonal,trials_used")?;
            for (meth, v, c, n) in &output.cka {
                if *meth == method {
                    let off = c.as_ref().map_or(f64::NAN, CkaMatrix::mean_off_diagonal);
                    writeln!(w, "{},{},{}", fmt_float(*v), fmt_float(off), n)?;
                }
            }
            w.flush()?;
        }
    }
    if cfg.outputs.gain {
        for &method in cfg.methods.iter().filter(|&&m| m != Method::Joint) {
            let mut points = Vec::with_capacity(cfg.sweep_values.len());
            for &v in &cfg.sweep_values {
                let gains = (0..cfg.trials)
                    .map(|t| {
                        let rate = |m: Method| {
                            output
                                .rows
                                .iter()
                                .find(|r| r.trial == t && r.method == m && r.sweep_value == v)
                                .map(|r| r.test_sum_rate)
                                .expect("every trial reports every method")
                        };
                        relative_rate_gain(rate(method), rate(Method::Joint))
                    })
                    .collect::<metapower::Result<Vec<f64>>>()?;
                let (mean, stderr) = mean_stderr(&gains)?;
                points.push(GainRow { x_value: v, mean, stderr });
            }
            let mut w = create(out_dir, &format!("gain_{}.csv", method.file_label()))?;
            write_gain_csv(&mut w, &points)?;
            w.flush()?;
            output.gains.push((method, points));
        }
    }
    Ok(output)
}

fn write_logs(cfg: &ExperimentConfig, out_dir: &Path, trials: &[TrialOutput]) -> Result<()> {
    let mut labels: Vec<Method> = trials.iter().flat_map(|t| t.logs.iter().map(|l| l.0)).collect();
    labels.sort_unstable();
    labels.dedup();
    let dir: PathBuf = out_dir.join("logs");
    std::fs::create_dir_all(&dir)?;
    for method in labels {
        let mut w = create(&dir, &format!("log_{}.csv", method.file_label()))?;
        writeln!(w, "trial,context,meta_iter,mean_adapted_test_sum_rate,wall_ms")?;
        for (t, trial) in trials.iter().enumerate() {
            for (_, ctx, log) in trial.logs.iter().filter(|l| l.0 == method) {
                for row in log {
                    writeln!(w, "{t},{ctx},{},{},{}", row.meta_iter, fmt_float(row.objective), fmt_float(row.wall_ms))?;
                }
            }
        }
        w.flush()?;
    }
    let _ = cfg;
    Ok(())
}

/// Runs `f` on a pool of `threads` workers (the global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::CliError::Validation(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}
