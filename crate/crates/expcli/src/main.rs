use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metapower_expcli::commands::{adapt, eval, gen_data, train, Trainer};
use metapower_expcli::{parse_config, preset, run_experiment, with_threads, ExperimentConfig};

#[derive(Parser)]
#[command(name = "metapower", version, about = "REGNN power control with meta-learning")]
struct Cli {
    /// Root seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Meta-training dataset written by gen-data.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate meta-training periods (or one held-out period with --test).
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        periods: Option<usize>,
        #[arg(long)]
        test: bool,
        /// Output file name inside the output directory.
        #[arg(long)]
        name: Option<String>,
    },
    /// Joint learning on the pooled train slots.
    TrainJoint(TrainArgs),
    /// First-order MAML over the meta-training periods.
    MetaTrainFomaml(TrainArgs),
    /// Module set and assignment logits by modular meta-learning.
    MetaTrainModular(TrainArgs),
    /// Adapt a checkpoint to one period and write the adapted policy.
    Adapt {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        period: usize,
        /// Number of train slots used; overrides the configuration.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Mean test-slot sum-rate of a policy on every period of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a full experiment from a preset or a configuration file.
    Experiment {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(arg: &ConfigArg, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match &arg.config {
        Some(p) => parse_config(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::GenData { config, periods, test, name } => {
            let cfg = load(&config, cli.seed)?;
            std::fs::create_dir_all(out)?;
            let default = if test { "test.data" } else { "meta.data" };
            let path = out.join(name.as_deref().unwrap_or(default));
            gen_data(&cfg, periods.unwrap_or(cfg.meta_periods), test, &path)?;
            println!("{}", path.display());
        }
        Command::TrainJoint(a) => train_cmd(a, Trainer::Joint, cli.seed, cli.threads, out)?,
        Command::MetaTrainFomaml(a) => train_cmd(a, Trainer::Fomaml, cli.seed, cli.threads, out)?,
        Command::MetaTrainModular(a) => train_cmd(a, Trainer::Modular, cli.seed, cli.threads, out)?,
        Command::Adapt { config, checkpoint, data, period, budget, steps } => {
            let mut cfg = load(&config, cli.seed)?;
            cfg.adapt_samples = budget.unwrap_or(cfg.adapt_samples);
            cfg.adapt_steps = steps.unwrap_or(cfg.adapt_steps);
            std::fs::create_dir_all(out)?;
            let path = out.join("adapted.ckpt");
            if let Some(s) = adapt(cfg, &checkpoint, &data, period, &path)? {
                let s: Vec<String> = s.iter().map(usize::to_string).collect();
                println!("assignment {}", s.join(","));
            }
            println!("{}", path.display());
        }
        Command::Eval { checkpoint, data } => {
            println!("period,test_sum_rate");
            for (i, r) in eval(&checkpoint, &data)?.iter().enumerate() {
                println!("{i},{}", metapower::analysis::fmt_float(*r));
            }
        }
        Command::Experiment { preset: name, config, trials } => {
            let mut cfg = match (name, config) {
                (Some(n), None) => preset(&n)?,
                (None, Some(p)) => parse_config(&p).with_context(|| format!("reading {}", p.display()))?,
                _ => bail!("give exactly one of --preset or --config"),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rows = with_threads(cli.threads, || run_experiment(&cfg, out))??;
            println!("{} rows written to {}", rows.rows.len(), out.join("results.csv").display());
        }
    }
    Ok(())
}

fn train_cmd(a: TrainArgs, trainer: Trainer, seed: Option<u64>, threads: Option<usize>, out: &Path) -> Result<()> {
    let cfg = load(&a.config, seed)?;
    let ckpt = with_threads(threads, || train(cfg, trainer, &a.data, out))??;
    println!("{}", ckpt.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
