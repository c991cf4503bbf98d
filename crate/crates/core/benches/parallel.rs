//! One-thread versus full-pool timings of the data-parallel hot paths.
//! Build with `--no-default-features` to time the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metapower::meta::{fomaml_meta_step, MetaConfig};
use metapower::netsim::{generate_meta_dataset, PeriodDataset, SimConfig, SlotSource};
use metapower::regnn::{batch_objective_and_grad, Optimizer, ReGnnParams};
use metapower::RngStream;

fn setup() -> (SimConfig, Vec<PeriodDataset>, ReGnnParams) {
    let cfg = SimConfig::default();
    let data = generate_meta_dataset(&cfg, 10, &RngStream::new(1)).unwrap();
    let params = ReGnnParams::init(2, 4, cfg.pmax_linear(), &mut RngStream::new(2)).unwrap();
    (cfg, data, params)
}

fn workloads(c: &mut Criterion, label: &str, run: &dyn Fn(&mut (dyn FnMut() + Send))) {
    let (cfg, data, params) = setup();
    let meta = MetaConfig { inner_lr: 0.1, outer_lr: 0.01, ..MetaConfig::default() };
    let all: Vec<usize> = (0..data.len()).collect();
    let batch = data[0].train_slots();

    let mut group = c.benchmark_group("batch_gradient");
    group.bench_function(BenchmarkId::from_parameter(label), |b| {
        run(&mut || b.iter(|| batch_objective_and_grad(&params, &batch, meta.sigma2).unwrap()))
    });
    group.finish();

    let mut group = c.benchmark_group("fomaml_meta_step");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(label), |b| {
        run(&mut || {
            b.iter(|| {
                let mut opt = Optimizer::adam(meta.outer_lr).unwrap();
                fomaml_meta_step(&params, &data, &all, &meta, &mut opt).unwrap()
            })
        })
    });
    group.finish();

    let mut group = c.benchmark_group("generate_meta_dataset");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(label), |b| {
        run(&mut || b.iter(|| generate_meta_dataset(&cfg, 10, &RngStream::new(3)).unwrap()))
    });
    group.finish();
}

#[cfg(feature = "parallel")]
fn compare(c: &mut Criterion) {
    let cores = std::thread::available_parallelism().map_or(1, usize::from);
    let mut configs = vec![("1-thread".to_string(), 1)];
    if cores > 1 {
        configs.push((format!("{cores}-threads"), cores));
    }
    for (label, threads) in configs {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        workloads(c, &label, &|f| pool.install(f));
    }
}

#[cfg(not(feature = "parallel"))]
fn compare(c: &mut Criterion) {
    workloads(c, "sequential", &|f| f());
}

criterion_group!(benches, compare);
criterion_main!(benches);
