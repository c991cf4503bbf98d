//! End-to-end runs of the experiment loop on tiny configurations.

use std::fs;
use std::path::Path;

use metapower_expcli::{parse_config_str, run_experiment, with_threads, CliError, ExperimentConfig, Method};

const TINY: &str = "
name = tiny
trials = 2
links = 3..5
slots_per_period = 8
train_slots = 4
test_slots = 4
meta_periods = 2
meta_iters = 2
fomaml_outer_steps = 2
modular_outer_steps = 2
joint_batch = 4
inner_lr = 0.1
outer_lr = 0.01
adapt_lr = 0.1
logit_lr = 10
methods = joint,fomaml,modular:2,modular-exhaustive:2
sweep = adapt_samples
sweep_values = 1,3
probe_size = 4
probe_links = 4
";

/// The tiny config with the keys of `extra` replaced.
fn tiny(extra: &str) -> ExperimentConfig {
    let key = |l: &str| l.split('=').next().unwrap().trim().to_string();
    let overridden: Vec<String> = extra.lines().map(key).collect();
    let base: Vec<&str> = TINY.lines().filter(|l| !overridden.contains(&key(l))).collect();
    parse_config_str(&format!("{}\n{extra}", base.join("\n"))).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((entry.strip_prefix(dir).unwrap().display().to_string(), fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn rows_come_in_trial_value_method_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("");
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 4);
    let csv = read(dir.path(), "results.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "experiment,sweep_var,sweep_value,method,trial,test_sum_rate,wall_ms");
    assert_eq!(lines.len(), 17);
    let mut expect = Vec::new();
    for t in 0..2 {
        for v in ["1.00000000e0", "3.00000000e0"] {
            for m in ["joint", "fomaml", "modular:2", "modular-exhaustive:2"] {
                expect.push(format!("tiny,adapt_samples,{v},{m},{t},"));
            }
        }
    }
    for (line, prefix) in lines[1..].iter().zip(&expect) {
        assert!(line.starts_with(prefix.as_str()), "{line} vs {prefix}");
    }
    for r in &out.rows {
        assert!(r.test_sum_rate >= 0.0 && r.test_sum_rate.is_finite());
        assert_eq!(r.wall_ms, 0.0);
    }
    for name in ["config.txt", "logs/log_joint.csv", "logs/log_fomaml.csv", "logs/log_modular-2.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let cfg = tiny("emit_cka = true\nemit_histogram = true\nemit_gain = true");
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    with_threads(Some(1), || run_experiment(&cfg, b.path())).unwrap().unwrap();
    assert_eq!(all_files(a.path()), all_files(b.path()));
    let other = ExperimentConfig { seed: 99, ..cfg };
    run_experiment(&other, c.path()).unwrap();
    assert_ne!(read(a.path(), "results.csv"), read(c.path(), "results.csv"));
}

#[test]
fn a_method_sees_the_same_data_whatever_runs_beside_it() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let alone = run_experiment(&tiny("methods = modular:2\nemit_histogram = true"), a.path()).unwrap();
    let crowd = run_experiment(&tiny("emit_histogram = true"), b.path()).unwrap();
    let pick = |rows: &[metapower_expcli::ResultRow]| {
        rows.iter().filter(|r| r.method == Method::Modular(2)).map(|r| r.test_sum_rate).collect::<Vec<_>>()
    };
    assert_eq!(pick(&alone.rows), pick(&crowd.rows));
    assert_eq!(alone.histograms, crowd.histograms);
}

#[test]
fn budget_sweeps_reuse_training_and_radius_sweeps_retrain() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&tiny(""), dir.path()).unwrap();
    let log = read(dir.path(), "logs/log_fomaml.csv");
    // Two trials, one training context each, two meta-iterations.
    assert_eq!(log.lines().count(), 1 + 2 * 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("sweep = interference_radius\nsweep_values = 2,8\nemit_gain = true\nemit_cka = true");
    let out = run_experiment(&cfg, dir.path()).unwrap();
    let log = read(dir.path(), "logs/log_fomaml.csv");
    assert_eq!(log.lines().count(), 1 + 2 * 2 * 2);
    assert!(log.lines().nth(1).unwrap().starts_with("0,2,0,"));
    let gain = read(dir.path(), "gain_fomaml.csv");
    assert_eq!(gain.lines().count(), 3);
    assert_eq!(out.gains.len(), 3);
    assert!(dir.path().join("cka_summary_modular-2.csv").exists());
}

#[test]
fn a_failing_run_leaves_the_header_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&tiny("search_cap = 2"), dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Core(metapower::Error::SearchSpaceTooLarge { .. })), "{err}");
    assert_eq!(read(dir.path(), "results.csv").lines().count(), 1);
}

#[test]
fn meta_period_sweeps_train_on_that_many_periods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("methods = joint,fomaml\nsweep = meta_periods\nsweep_values = 1,3");
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 2);
    assert!(out.rows.iter().all(|r| r.test_sum_rate > 0.0));
}
