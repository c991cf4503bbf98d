//! An access-logging slot source records which split each trainer reads.

use std::sync::atomic::{AtomicUsize, Ordering};

use metapower::meta::modular::{meta_train_modular, runtime_adapt_modular, ModularConfig, ModuleSet, TemperatureSchedule};
use metapower::meta::{joint_train, meta_train_fomaml, runtime_finetune, MetaConfig};
use metapower::netsim::{generate_meta_dataset, ChannelRealization, PeriodDataset, SimConfig, SizePolicy, SlotSource};
use metapower::regnn::ReGnnParams;
use metapower::RngStream;

struct Logged {
    inner: PeriodDataset,
    train: AtomicUsize,
    test: AtomicUsize,
}

impl Logged {
    fn new(inner: PeriodDataset) -> Self {
        Self { inner, train: AtomicUsize::new(0), test: AtomicUsize::new(0) }
    }

    fn counts(&self) -> (usize, usize) {
        (self.train.load(Ordering::SeqCst), self.test.load(Ordering::SeqCst))
    }
}

impl SlotSource for Logged {
    fn train_slots(&self) -> Vec<&ChannelRealization> {
        self.train.fetch_add(1, Ordering::SeqCst);
        self.inner.train_slots()
    }

    fn test_slots(&self) -> Vec<&ChannelRealization> {
        self.test.fetch_add(1, Ordering::SeqCst);
        self.inner.test_slots()
    }
}

fn sim() -> SimConfig {
    SimConfig {
        size_policy: SizePolicy::Fixed(4),
        slots_per_period: 8,
        train_slots: 4,
        test_slots: 4,
        ..SimConfig::default()
    }
}

fn data(n: usize, seed: u64) -> Vec<Logged> {
    generate_meta_dataset(&sim(), n, &RngStream::new(seed)).unwrap().into_iter().map(Logged::new).collect()
}

fn meta() -> MetaConfig {
    MetaConfig { meta_iters: 2, inner_steps: 2, outer_steps: 2, joint_batch: 4, ..MetaConfig::default() }
}

#[test]
fn meta_training_reads_both_splits_of_meta_periods_only() {
    let periods = data(3, 31);
    let held_out = data(1, 32);
    let pmax = sim().pmax_linear();
    let init = ReGnnParams::init(2, 4, pmax, &mut RngStream::new(33)).unwrap();
    meta_train_fomaml(&periods, init.clone(), &meta(), &RngStream::new(34)).unwrap();
    let mcfg = ModularConfig { meta: meta(), modules: 2, layers: 2, ..ModularConfig::default() };
    let mods = ModuleSet::init(2, 4, pmax, &mut RngStream::new(35)).unwrap();
    meta_train_modular(&periods, mods, &mcfg, &RngStream::new(36)).unwrap();
    for p in &periods {
        let (train, test) = p.counts();
        assert!(train > 0 && test > 0, "meta period unused: {train} / {test}");
    }
    assert_eq!(held_out[0].counts(), (0, 0));
}

#[test]
fn joint_learning_never_reads_test_slots() {
    let periods = data(3, 37);
    let init = ReGnnParams::init(2, 4, sim().pmax_linear(), &mut RngStream::new(38)).unwrap();
    joint_train(&periods, init, &meta(), &RngStream::new(39)).unwrap();
    for p in &periods {
        assert!(p.counts().0 > 0);
        assert_eq!(p.counts().1, 0);
    }
}

#[test]
fn runtime_adaptation_never_reads_the_test_split() {
    let held_out = data(1, 40);
    let pmax = sim().pmax_linear();
    let sigma2 = sim().noise_linear();
    let init = ReGnnParams::init(2, 4, pmax, &mut RngStream::new(41)).unwrap();
    runtime_finetune(&init, &held_out[0], 3, 4, 0.1, sigma2).unwrap();
    let mods = ModuleSet::init(3, 4, pmax, &mut RngStream::new(42)).unwrap();
    let schedule = TemperatureSchedule::default();
    runtime_adapt_modular(&mods, 2, &held_out[0], 3, 4, 1.0, schedule, sigma2, &mut RngStream::new(43)).unwrap();
    let (train, test) = held_out[0].counts();
    assert!(train > 0);
    assert_eq!(test, 0);
}
