//! Plain-text export and import of generated data sets.
//!
//! Layout, one record per line (`#` starts a comment):
//!
//! ```text
//! format metapower-dataset-v1
//! path_loss_exponent 2.2
//! noise_dbm -70
//! pmax_dbm -35
//! size_policy uniform 4 20        # or: fixed 10
//! slots_per_period 100
//! train_slots 50
//! test_slots 50
//! interference_radius none        # or a number
//! shift_scaling spectral          # or: raw
//! seed 0
//! periods 10
//! period <id> <k>                 # repeated per period
//! tx x0 y0 x1 y1 ...
//! rx x0 y0 x1 y1 ...
//! adjacency 1 0 ...               # k*k flags, row-major
//! train 0 1 ...
//! test 50 51 ...
//! slots <count>
//! gains <slot> g00 g01 ...        # k*k gains, row-major, repeated per slot
//! ```
//!
//! Floats are written in shortest round-trip form, so a load reproduces
//! every gain bit for bit. The shift operator is recomputed from the gains.

use std::path::Path;

use ndarray::Array2;

use crate::error::Result;
use crate::netsim::{ChannelRealization, PeriodDataset, ShiftScaling, SimConfig, SizePolicy, Topology};
use crate::textfmt::{Reader, Writer};

const MAGIC: &str = "metapower-dataset-v1";

pub fn dataset_to_text(cfg: &SimConfig, periods: &[PeriodDataset]) -> String {
    let mut w = Writer::default();
    w.line("format", MAGIC);
    w.floats("path_loss_exponent", [&cfg.path_loss_exponent]);
    w.floats("noise_dbm", [&cfg.noise_dbm]);
    w.floats("pmax_dbm", [&cfg.pmax_dbm]);
    match cfg.size_policy {
        SizePolicy::Fixed(k) => w.line("size_policy", format!("fixed {k}")),
        SizePolicy::Uniform { lo, hi } => w.line("size_policy", format!("uniform {lo} {hi}")),
    }
    w.line("slots_per_period", cfg.slots_per_period);
    w.line("train_slots", cfg.train_slots);
    w.line("test_slots", cfg.test_slots);
    match cfg.interference_radius {
        None => w.line("interference_radius", "none"),
        Some(r) => w.floats("interference_radius", [&r]),
    }
    w.line("shift_scaling", cfg.shift_scaling.name());
    w.line("seed", cfg.seed);
    w.line("periods", periods.len());
    for p in periods {
        let t = &p.topology;
        w.line("period", format!("{} {}", t.period_id, t.k));
        w.floats("tx", t.tx_positions.iter().flatten());
        w.floats("rx", t.rx_positions.iter().flatten());
        let flags: Vec<&str> = t.adjacency.iter().map(|&a| if a { "1" } else { "0" }).collect();
        w.line("adjacency", flags.join(" "));
        w.line("train", join(&p.train_idx));
        w.line("test", join(&p.test_idx));
        w.line("slots", p.realizations.len());
        for r in &p.realizations {
            w.floats(&format!("gains {}", r.slot), r.gains().iter());
        }
    }
    w.out
}

fn join(idx: &[usize]) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn dataset_from_text(text: &str) -> Result<(SimConfig, Vec<PeriodDataset>)> {
    let mut r = Reader::new(text);
    r.header(MAGIC)?;
    let path_loss_exponent = r.value("path_loss_exponent")?;
    let noise_dbm = r.value("noise_dbm")?;
    let pmax_dbm = r.value("pmax_dbm")?;
    let size_policy = match r.fields("size_policy")?.as_slice() {
        ["fixed", k] => SizePolicy::Fixed(r.parse(k)?),
        ["uniform", lo, hi] => SizePolicy::Uniform {
            lo: r.parse(lo)?,
            hi: r.parse(hi)?,
        },
        _ => return Err(r.err("size_policy is `fixed K` or `uniform LO HI`")),
    };
    let slots_per_period = r.value("slots_per_period")?;
    let train_slots = r.value("train_slots")?;
    let test_slots = r.value("test_slots")?;
    let interference_radius = match r.value::<String>("interference_radius")?.as_str() {
        "none" => None,
        s => Some(r.parse(s)?),
    };
    let name: String = r.value("shift_scaling")?;
    let shift_scaling = ShiftScaling::from_name(&name).ok_or_else(|| r.err(format!("unknown scaling `{name}`")))?;
    let cfg = SimConfig {
        path_loss_exponent,
        noise_dbm,
        pmax_dbm,
        size_policy,
        slots_per_period,
        train_slots,
        test_slots,
        interference_radius,
        shift_scaling,
        seed: r.value("seed")?,
    };
    cfg.validate()?;
    let count: usize = r.value("periods")?;
    let mut periods = Vec::with_capacity(count);
    for _ in 0..count {
        let head = r.fields("period")?;
        let [id, k] = head.as_slice() else {
            return Err(r.err("`period` takes an id and a size"));
        };
        let (id, k): (u64, usize) = (r.parse(id)?, r.parse(k)?);
        let points = |v: Vec<f64>| v.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
        let tx = points(r.floats("tx", 2 * k)?);
        let rx = points(r.floats("rx", 2 * k)?);
        let flags = r.fields("adjacency")?;
        if flags.len() != k * k {
            return Err(r.err(format!("adjacency needs {} flags", k * k)));
        }
        let adjacency = flags
            .iter()
            .map(|f| match *f {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(r.err(format!("bad adjacency flag `{f}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let topology = Topology {
            period_id: id,
            k,
            tx_positions: tx,
            rx_positions: rx,
            adjacency: Array2::from_shape_vec((k, k), adjacency).expect("length checked"),
        };
        let train = r.fields("train")?.iter().map(|s| r.parse(s)).collect::<Result<Vec<usize>>>()?;
        let test = r.fields("test")?.iter().map(|s| r.parse(s)).collect::<Result<Vec<usize>>>()?;
        let slots: usize = r.value("slots")?;
        let mut realizations = Vec::with_capacity(slots);
        for _ in 0..slots {
            let f = r.fields("gains")?;
            if f.len() != k * k + 1 {
                return Err(r.err(format!("gains needs a slot index and {} values", k * k)));
            }
            let slot: usize = r.parse(f[0])?;
            let g = f[1..].iter().map(|s| r.parse(s)).collect::<Result<Vec<f64>>>()?;
            let gains = Array2::from_shape_vec((k, k), g).expect("length checked");
            realizations.push(ChannelRealization::with_scaling(gains, shift_scaling, slot, id)?);
        }
        periods.push(PeriodDataset::new(topology, realizations, train, test)?);
    }
    r.finish()?;
    Ok((cfg, periods))
}

pub fn save_dataset(path: impl AsRef<Path>, cfg: &SimConfig, periods: &[PeriodDataset]) -> Result<()> {
    std::fs::write(path, dataset_to_text(cfg, periods))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(SimConfig, Vec<PeriodDataset>)> {
    dataset_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::netsim::generate_meta_dataset;
    use crate::rng::RngStream;

    fn cfg() -> SimConfig {
        SimConfig {
            size_policy: SizePolicy::Uniform { lo: 3, hi: 6 },
            slots_per_period: 6,
            train_slots: 3,
            test_slots: 2,
            interference_radius: Some(2.5),
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let cfg = cfg();
        let data = generate_meta_dataset(&cfg, 3, &RngStream::new(cfg.seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        save_dataset(&path, &cfg, &data).unwrap();
        let (cfg2, data2) = load_dataset(&path).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(data2, data);
    }

    #[test]
    fn corrupt_gain_line_reports_its_line() {
        let cfg = SimConfig {
            interference_radius: None,
            ..cfg()
        };
        let data = generate_meta_dataset(&cfg, 1, &RngStream::new(1)).unwrap();
        let text = dataset_to_text(&cfg, &data);
        let bad: Vec<String> = text
            .lines()
            .map(|l| if l.starts_with("gains 2 ") { "gains 2 x".to_string() } else { l.to_string() })
            .collect();
        let line = bad.iter().position(|l| l == "gains 2 x").unwrap() + 1;
        match dataset_from_text(&bad.join("\n")) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
            other => panic!("{other:?}"),
        }
    }
}
