//! The single-step subcommands: data generation, training, adaptation and
//! evaluation on files.

use std::io::Write;
use std::path::{Path, PathBuf};

use metapower::analysis::fmt_float;
use metapower::dataset_io::{load_dataset, save_dataset};
use metapower::meta::modular::{
    meta_train_modular, runtime_adapt_modular, save_modules, ModulesCheckpoint, ModuleSet,
};
use metapower::meta::{joint_train, meta_train_fomaml, runtime_finetune, MetaLogRow};
use metapower::netsim::{generate_meta_dataset, generate_period, PeriodDataset, SlotSource};
use metapower::regnn::{batch_objective, save_params, ParamsCheckpoint, ReGnnParams};
use metapower::RngStream;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::run::TEST_PERIOD_ID;

/// Which trainer `train` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainer {
    Joint,
    Fomaml,
    Modular,
}

impl Trainer {
    fn label(self) -> &'static str {
        match self {
            Self::Joint => "joint",
            Self::Fomaml => "fomaml",
            Self::Modular => "modular",
        }
    }
}

/// Writes `periods` meta-training periods, or a single held-out period when
/// `test` is set.
pub fn gen_data(cfg: &ExperimentConfig, periods: usize, test: bool, path: &Path) -> Result<()> {
    let root = RngStream::new(cfg.seed);
    let data = if test {
        vec![generate_period(&cfg.sim, TEST_PERIOD_ID, &root.child("test"))?]
    } else {
        generate_meta_dataset(&cfg.sim, periods, &root.child("meta"))?
    };
    save_dataset(path, &cfg.sim, &data)?;
    Ok(())
}

/// Loads a dataset and adopts its simulator settings.
fn load_into(cfg: &mut ExperimentConfig, path: &Path) -> Result<Vec<PeriodDataset>> {
    let (sim, data) = load_dataset(path)?;
    cfg.sim = sim;
    cfg.sync_shared();
    Ok(data)
}

fn write_log(path: &Path, log: &[MetaLogRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "meta_iter,objective,wall_ms")?;
    for r in log {
        writeln!(w, "{},{},{}", r.meta_iter, fmt_float(r.objective), fmt_float(r.wall_ms))?;
    }
    w.flush()?;
    Ok(())
}

/// Trains on `data` and writes `<label>.ckpt` and `log_<label>.csv` into
/// `out_dir`. Returns the checkpoint path.
pub fn train(mut cfg: ExperimentConfig, trainer: Trainer, data: &Path, out_dir: &Path) -> Result<PathBuf> {
    let meta = load_into(&mut cfg, data)?;
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let root = RngStream::new(cfg.seed);
    let pmax = cfg.sim.pmax_linear();
    let ckpt = out_dir.join(format!("{}.ckpt", trainer.label()));
    let log = match trainer {
        Trainer::Joint | Trainer::Fomaml => {
            let init = ReGnnParams::init(cfg.layers, cfg.taps, pmax, &mut root.child("init-policy"))?;
            let (params, log) = if trainer == Trainer::Joint {
                joint_train(&meta, init, &cfg.fomaml, &root.child("train-joint"))?
            } else {
                meta_train_fomaml(&meta, init, &cfg.fomaml, &root.child("train-fomaml"))?
            };
            save_params(&ckpt, &ParamsCheckpoint { params, seed: cfg.seed })?;
            log
        }
        Trainer::Modular => {
            let m = cfg.modular.modules;
            let init = ModuleSet::init(m, cfg.taps, pmax, &mut root.child_indexed("init-modules", m as u64))?;
            let (modules, log) =
                meta_train_modular(&meta, init, &cfg.modular, &root.child_indexed("train-modular", m as u64))?;
            let layers = cfg.layers;
            save_modules(&ckpt, &ModulesCheckpoint { modules, layers, seed: cfg.seed })?;
            log
        }
    };
    write_log(&out_dir.join(format!("log_{}.csv", trainer.label())), &log)?;
    Ok(ckpt)
}

/// A trained policy or module repository read from disk.
pub enum Checkpoint {
    Params(ParamsCheckpoint),
    Modules(ModulesCheckpoint),
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().any(|l| l.trim() == "format metapower-modules-v1") {
        Ok(Checkpoint::Modules(ModulesCheckpoint::from_text(&text)?))
    } else {
        Ok(Checkpoint::Params(ParamsCheckpoint::from_text(&text)?))
    }
}

fn pick(data: Vec<PeriodDataset>, period: usize) -> Result<PeriodDataset> {
    let n = data.len();
    data.into_iter()
        .nth(period)
        .ok_or_else(|| CliError::Validation(format!("period {period} out of range ({n} periods)")))
}

/// Adapts a checkpoint to one period of `data` on its first `budget` train
/// slots and writes the resulting policy. A module checkpoint is resolved
/// to the assembled policy of the selected assignment, which is returned.
pub fn adapt(
    mut cfg: ExperimentConfig,
    ckpt: &Path,
    data: &Path,
    period: usize,
    out: &Path,
) -> Result<Option<Vec<usize>>> {
    let test = pick(load_into(&mut cfg, data)?, period)?;
    let sigma2 = cfg.sim.noise_linear();
    let (budget, steps) = (cfg.adapt_samples, cfg.adapt_steps);
    let (params, assignment) = match load_checkpoint(ckpt)? {
        Checkpoint::Params(p) => (runtime_finetune(&p.params, &test, budget, steps, cfg.adapt_lr, sigma2)?, None),
        Checkpoint::Modules(m) => {
            let mut rng = RngStream::new(cfg.seed).child_indexed("runtime-modular", m.modules.modules() as u64);
            let (s, _, _) = runtime_adapt_modular(
                &m.modules,
                m.layers,
                &test,
                budget,
                steps,
                cfg.logit_lr,
                cfg.schedule(),
                sigma2,
                &mut rng,
            )?;
            (m.modules.assemble(&s)?, Some(s.0))
        }
    };
    save_params(out, &ParamsCheckpoint { params, seed: cfg.seed })?;
    Ok(assignment)
}

/// Mean test-slot sum-rate of a policy checkpoint on every period of `data`.
pub fn eval(ckpt: &Path, data: &Path) -> Result<Vec<f64>> {
    let Checkpoint::Params(p) = load_checkpoint(ckpt)? else {
        return Err(CliError::Validation("eval needs a policy checkpoint; run adapt on a module checkpoint first".into()));
    };
    let (sim, data) = load_dataset(data)?;
    let sigma2 = sim.noise_linear();
    Ok(data
        .iter()
        .map(|d| batch_objective(&p.params, &d.test_slots(), sigma2))
        .collect::<metapower::Result<_>>()?)
}
