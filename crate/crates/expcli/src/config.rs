//! Experiment configuration as flat `key = value` text.
//!
//! Omitted keys keep their defaults and unknown keys are rejected. `#`
//! starts a comment. Lists are comma separated. Every key is listed in
//! [`ExperimentConfig::to_text`], which writes a complete config back out.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use metapower::meta::modular::{ModularConfig, TemperatureSchedule, DEFAULT_SEARCH_CAP};
use metapower::meta::{MetaBatch, MetaConfig};
use metapower::netsim::{ShiftScaling, SimConfig, SizePolicy};

use crate::error::{CliError, Result};

/// A trained-and-adapted policy family compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Joint,
    Fomaml,
    /// Modular meta-learning with `M` modules and SGD-based assignment.
    Modular(usize),
    /// Same module set, assignment by exhaustive search on the adaptation slots.
    ModularExhaustive(usize),
}

impl Method {
    pub fn modules(&self) -> Option<usize> {
        match *self {
            Method::Modular(m) | Method::ModularExhaustive(m) => Some(m),
            _ => None,
        }
    }

    /// Label safe to use in file names.
    pub fn file_label(&self) -> String {
        self.to_string().replace(':', "-")
    }

    fn parse_with_default(s: &str, modules: usize) -> Option<Self> {
        let (name, m) = match s.split_once(':') {
            Some((n, m)) => (n, m.parse().ok().filter(|&m| m > 0)?),
            None => (s, modules),
        };
        match name {
            "joint" if !s.contains(':') => Some(Method::Joint),
            "fomaml" if !s.contains(':') => Some(Method::Fomaml),
            "modular" => Some(Method::Modular(m)),
            "modular-exhaustive" => Some(Method::ModularExhaustive(m)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Joint => write!(f, "joint"),
            Method::Fomaml => write!(f, "fomaml"),
            Method::Modular(m) => write!(f, "modular:{m}"),
            Method::ModularExhaustive(m) => write!(f, "modular-exhaustive:{m}"),
        }
    }
}

/// The quantity varied along an experiment's x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Train slots of the new period used for adaptation.
    AdaptSamples,
    /// Adaptation iterations at runtime.
    AdaptIters,
    /// Meta-training periods.
    MetaPeriods,
    InterferenceRadius,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::AdaptSamples => "adapt_samples",
            SweepVar::AdaptIters => "adapt_iters",
            SweepVar::MetaPeriods => "meta_periods",
            SweepVar::InterferenceRadius => "interference_radius",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            SweepVar::AdaptSamples,
            SweepVar::AdaptIters,
            SweepVar::MetaPeriods,
            SweepVar::InterferenceRadius,
        ]
        .into_iter()
        .find(|v| v.name() == s)
    }

    /// Whether the sweep changes the training data (and so needs retraining).
    pub fn affects_training(&self) -> bool {
        matches!(self, SweepVar::MetaPeriods | SweepVar::InterferenceRadius)
    }

    /// Whether values must be nonnegative integers.
    pub fn integral(&self) -> bool {
        !matches!(self, SweepVar::InterferenceRadius)
    }
}

/// Extra per-figure outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outputs {
    pub gain: bool,
    pub cka: bool,
    pub histogram: bool,
    pub logs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub sweep: SweepVar,
    pub sweep_values: Vec<f64>,
    pub sim: SimConfig,
    pub meta_periods: usize,
    pub layers: usize,
    pub taps: usize,
    /// FOMAML settings; joint learning uses its iteration count, outer step
    /// count, mini-batch and outer step size.
    pub fomaml: MetaConfig,
    pub modular: ModularConfig,
    pub adapt_samples: usize,
    pub adapt_steps: usize,
    /// Step size of runtime fine-tuning (joint, FOMAML).
    pub adapt_lr: f64,
    /// Step size of runtime logit adaptation (modular).
    pub logit_lr: f64,
    pub search_cap: u128,
    pub probe_size: usize,
    pub probe_links: usize,
    pub outputs: Outputs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let fomaml = MetaConfig {
            sigma2: sim.noise_linear(),
            ..MetaConfig::default()
        };
        let modular = ModularConfig {
            meta: MetaConfig {
                inner_steps: 2,
                ..fomaml.clone()
            },
            ..ModularConfig::default()
        };
        Self {
            name: "custom".into(),
            seed: 0,
            trials: 10,
            methods: vec![Method::Joint, Method::Fomaml, Method::Modular(4), Method::Modular(6)],
            sweep: SweepVar::AdaptSamples,
            sweep_values: vec![10.0],
            sim,
            meta_periods: 10,
            layers: 2,
            taps: 4,
            fomaml,
            modular,
            adapt_samples: 10,
            adapt_steps: 5,
            adapt_lr: 1e-4,
            logit_lr: 1e-4,
            search_cap: DEFAULT_SEARCH_CAP,
            probe_size: 64,
            probe_links: 10,
            outputs: Outputs {
                logs: true,
                ..Outputs::default()
            },
        }
    }
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Validation(m.into()));
        self.sim.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.fomaml.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.modular.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.sweep_values.is_empty() {
            return bad("sweep_values must not be empty");
        }
        for &v in &self.sweep_values {
            if !(v >= 0.0 && v.is_finite()) || (self.sweep.integral() && v.fract() != 0.0) {
                return bad(&format!("bad {} value {v}", self.sweep.name()));
            }
            if self.sweep == SweepVar::MetaPeriods && v < 1.0 {
                return bad("meta_periods sweep values must be at least 1");
            }
        }
        if self.meta_periods == 0 || self.layers == 0 || self.taps == 0 {
            return bad("meta_periods, layers and taps must be positive");
        }
        if !(self.adapt_lr > 0.0 && self.logit_lr > 0.0) {
            return bad("adaptation step sizes must be positive");
        }
        if self.sim.train_slots == 0 || self.sim.test_slots == 0 {
            return bad("periods need train and test slots");
        }
        if self.outputs.cka && (self.probe_size == 0 || self.probe_links == 0) {
            return bad("the CKA probe needs at least one channel and one link");
        }
        if self.outputs.gain && !self.methods.contains(&Method::Joint) {
            return bad("rate-gain output needs the joint method as reference");
        }
        if self.outputs.cka && self.methods.iter().any(|m| m.modules() == Some(1)) {
            return bad("CKA output needs at least two modules per set");
        }
        Ok(())
    }

    /// Complete config in the same format [`parse_config_str`] reads.
    pub fn to_text(&self) -> String {
        let s = &self.sim;
        let f = &self.fomaml;
        let m = &self.modular;
        let links = match s.size_policy {
            SizePolicy::Fixed(k) => k.to_string(),
            SizePolicy::Uniform { lo, hi } => format!("{lo}..{hi}"),
        };
        let radius = s.interference_radius.map_or("none".into(), |r| r.to_string());
        let batch = match f.meta_batch {
            MetaBatch::All => "all".into(),
            MetaBatch::Sample(n) => n.to_string(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("methods", fmt_list(&self.methods)),
            ("sweep", self.sweep.name().into()),
            ("sweep_values", fmt_list(&self.sweep_values)),
            ("links", links),
            ("path_loss_exponent", s.path_loss_exponent.to_string()),
            ("noise_dbm", s.noise_dbm.to_string()),
            ("pmax_dbm", s.pmax_dbm.to_string()),
            ("slots_per_period", s.slots_per_period.to_string()),
            ("train_slots", s.train_slots.to_string()),
            ("test_slots", s.test_slots.to_string()),
            ("interference_radius", radius),
            ("shift_scaling", s.shift_scaling.name().into()),
            ("meta_periods", self.meta_periods.to_string()),
            ("layers", self.layers.to_string()),
            ("taps", self.taps.to_string()),
            ("modules", m.modules.to_string()),
            ("meta_iters", f.meta_iters.to_string()),
            ("meta_batch", batch),
            ("inner_lr", f.inner_lr.to_string()),
            ("outer_lr", f.outer_lr.to_string()),
            ("joint_batch", f.joint_batch.to_string()),
            ("fomaml_inner_steps", f.inner_steps.to_string()),
            ("fomaml_outer_steps", f.outer_steps.to_string()),
            ("modular_inner_steps", m.meta.inner_steps.to_string()),
            ("modular_outer_steps", m.meta.outer_steps.to_string()),
            ("lambda0", m.schedule.lambda0.to_string()),
            ("lambda_decay", m.schedule.decay.to_string()),
            ("lambda_min", m.schedule.lambda_min.to_string()),
            ("adapt_samples", self.adapt_samples.to_string()),
            ("adapt_steps", self.adapt_steps.to_string()),
            ("adapt_lr", self.adapt_lr.to_string()),
            ("logit_lr", self.logit_lr.to_string()),
            ("search_cap", self.search_cap.to_string()),
            ("probe_size", self.probe_size.to_string()),
            ("probe_links", self.probe_links.to_string()),
            ("emit_gain", self.outputs.gain.to_string()),
            ("emit_cka", self.outputs.cka.to_string()),
            ("emit_histogram", self.outputs.histogram.to_string()),
            ("emit_logs", self.outputs.logs.to_string()),
            ("record_wall_clock", f.record_wall_clock.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| CliError::Parse {
        line,
        key: Some(key.into()),
        message: format!("invalid value `{v}` for `{key}`"),
    })
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| value(line, key, s.trim())).collect()
}

/// Parses and validates a config; see the module docs for the format.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    let mut methods: Option<(usize, String)> = None;
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Parse {
                line: n,
                key: None,
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !seen.insert(k.to_string()) {
            return Err(CliError::Parse {
                line: n,
                key: Some(k.into()),
                message: format!("duplicate key `{k}`"),
            });
        }
        match k {
            "name" => c.name = v.into(),
            "seed" => c.seed = value(n, k, v)?,
            "trials" => c.trials = value(n, k, v)?,
            "methods" => methods = Some((n, v.into())),
            "sweep" => {
                c.sweep = SweepVar::from_name(v).ok_or_else(|| CliError::Parse {
                    line: n,
                    key: Some(k.into()),
                    message: format!("unknown sweep `{v}`"),
                })?
            }
            "sweep_values" => c.sweep_values = list(n, k, v)?,
            "links" => {
                c.sim.size_policy = match v.split_once("..") {
                    Some((lo, hi)) => SizePolicy::Uniform {
                        lo: value(n, k, lo.trim())?,
                        hi: value(n, k, hi.trim())?,
                    },
                    None => SizePolicy::Fixed(value(n, k, v)?),
                }
            }
            "path_loss_exponent" => c.sim.path_loss_exponent = value(n, k, v)?,
            "noise_dbm" => c.sim.noise_dbm = value(n, k, v)?,
            "pmax_dbm" => c.sim.pmax_dbm = value(n, k, v)?,
            "slots_per_period" => c.sim.slots_per_period = value(n, k, v)?,
            "train_slots" => c.sim.train_slots = value(n, k, v)?,
            "test_slots" => c.sim.test_slots = value(n, k, v)?,
            "interference_radius" => {
                c.sim.interference_radius = if v == "none" { None } else { Some(value(n, k, v)?) }
            }
            "shift_scaling" => {
                c.sim.shift_scaling = ShiftScaling::from_name(v).ok_or_else(|| CliError::Parse {
                    line: n,
                    key: Some(k.into()),
                    message: format!("unknown scaling `{v}` (raw or spectral)"),
                })?
            }
            "meta_periods" => c.meta_periods = value(n, k, v)?,
            "layers" => c.layers = value(n, k, v)?,
            "taps" => c.taps = value(n, k, v)?,
            "modules" => c.modular.modules = value(n, k, v)?,
            "meta_iters" => c.fomaml.meta_iters = value(n, k, v)?,
            "meta_batch" => {
                c.fomaml.meta_batch = if v == "all" {
                    MetaBatch::All
                } else {
                    MetaBatch::Sample(value(n, k, v)?)
                }
            }
            "inner_lr" => c.fomaml.inner_lr = value(n, k, v)?,
            "outer_lr" => c.fomaml.outer_lr = value(n, k, v)?,
            "joint_batch" => c.fomaml.joint_batch = value(n, k, v)?,
            "fomaml_inner_steps" => c.fomaml.inner_steps = value(n, k, v)?,
            "fomaml_outer_steps" => c.fomaml.outer_steps = value(n, k, v)?,
            "modular_inner_steps" => c.modular.meta.inner_steps = value(n, k, v)?,
            "modular_outer_steps" => c.modular.meta.outer_steps = value(n, k, v)?,
            "lambda0" => c.modular.schedule.lambda0 = value(n, k, v)?,
            "lambda_decay" => c.modular.schedule.decay = value(n, k, v)?,
            "lambda_min" => c.modular.schedule.lambda_min = value(n, k, v)?,
            "adapt_samples" => c.adapt_samples = value(n, k, v)?,
            "adapt_steps" => c.adapt_steps = value(n, k, v)?,
            "adapt_lr" => c.adapt_lr = value(n, k, v)?,
            "logit_lr" => c.logit_lr = value(n, k, v)?,
            "search_cap" => c.search_cap = value(n, k, v)?,
            "probe_size" => c.probe_size = value(n, k, v)?,
            "probe_links" => c.probe_links = value(n, k, v)?,
            "emit_gain" => c.outputs.gain = value(n, k, v)?,
            "emit_cka" => c.outputs.cka = value(n, k, v)?,
            "emit_histogram" => c.outputs.histogram = value(n, k, v)?,
            "emit_logs" => c.outputs.logs = value(n, k, v)?,
            "record_wall_clock" => c.fomaml.record_wall_clock = value(n, k, v)?,
            _ => {
                return Err(CliError::Parse {
                    line: n,
                    key: Some(k.into()),
                    message: format!("unknown key `{k}`"),
                })
            }
        }
    }
    if let Some((n, v)) = methods {
        c.methods = v
            .split(',')
            .map(|s| {
                Method::parse_with_default(s.trim(), c.modular.modules).ok_or_else(|| CliError::Parse {
                    line: n,
                    key: Some("methods".into()),
                    message: format!("unknown method `{}`", s.trim()),
                })
            })
            .collect::<Result<_>>()?;
    }
    c.sync_shared();
    c.validate()?;
    Ok(c)
}

impl ExperimentConfig {
    /// Copies the settings shared by every trainer from the FOMAML block
    /// into the modular block, and the noise power from the simulator.
    pub fn sync_shared(&mut self) {
        self.fomaml.sigma2 = self.sim.noise_linear();
        let f = &self.fomaml;
        let meta = &mut self.modular.meta;
        meta.meta_iters = f.meta_iters;
        meta.inner_lr = f.inner_lr;
        meta.outer_lr = f.outer_lr;
        meta.meta_batch = f.meta_batch;
        meta.joint_batch = f.joint_batch;
        meta.sigma2 = f.sigma2;
        meta.record_wall_clock = f.record_wall_clock;
        self.modular.layers = self.layers;
    }

    pub fn schedule(&self) -> TemperatureSchedule {
        self.modular.schedule
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
