//! Post-hoc measurements: module similarity by linear CKA, module usage
//! histograms, relative rate gains and direct-link SNR summaries.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::meta::modular::{HardAssignment, ModuleSet};
use crate::netsim::{generate_period, ChannelRealization, PeriodDataset, SimConfig, SizePolicy};
use crate::par::try_map_indexed;
use crate::regnn::{graph_filter, relu};
use crate::rng::RngStream;

/// Fixed channels and inputs on which modules are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBatch {
    pub slots: Vec<ChannelRealization>,
    pub inputs: Vec<Array1<f64>>,
}

impl ProbeBatch {
    pub const DEFAULT_SIZE: usize = 64;
    pub const DEFAULT_LINKS: usize = 10;

    pub fn new(slots: Vec<ChannelRealization>, inputs: Vec<Array1<f64>>) -> Result<Self> {
        let Some(k) = slots.first().map(ChannelRealization::k) else {
            return Err(Error::EmptyInput);
        };
        if slots.len() != inputs.len() {
            return Err(Error::shape(format!("{} inputs", slots.len()), inputs.len()));
        }
        if slots.iter().any(|s| s.k() != k) || inputs.iter().any(|x| x.len() != k) {
            return Err(Error::shape(format!("{k} links throughout"), "mixed sizes"));
        }
        Ok(Self { slots, inputs })
    }

    /// `size` channels with all-ones inputs, each from its own topology with
    /// `links` links drawn under `cfg`'s geometry.
    pub fn draw(cfg: &SimConfig, size: usize, links: usize, rng: &RngStream) -> Result<Self> {
        let cfg = SimConfig {
            size_policy: SizePolicy::Fixed(links),
            slots_per_period: 1,
            train_slots: 1,
            test_slots: 0,
            ..cfg.clone()
        };
        let slots = try_map_indexed(size, |i| {
            generate_period(&cfg, i as u64, &rng.child_indexed("probe", i as u64)).map(|p| p.realizations[0].clone())
        })?;
        let inputs = vec![Array1::ones(links); size];
        Self::new(slots, inputs)
    }

    pub fn k(&self) -> usize {
        self.slots[0].k()
    }
}

/// Hidden-layer response `relu(filter_i(x))` of every module, stacked as a
/// `probe size x K` matrix per module.
pub fn module_outputs(mods: &ModuleSet, probe: &ProbeBatch) -> Result<Vec<Array2<f64>>> {
    let k = probe.k();
    try_map_indexed(mods.modules(), |i| {
        let taps = mods.module(i);
        let mut z = Array2::zeros((probe.slots.len(), k));
        for (row, (g, x)) in probe.slots.iter().zip(&probe.inputs).enumerate() {
            z.row_mut(row).assign(&graph_filter(&taps, g, x.view())?.mapv(relu));
        }
        Ok(z)
    })
}

fn center_columns(z: &Array2<f64>) -> Array2<f64> {
    let mean = z.mean_axis(Axis(0)).expect("nonempty");
    z - &mean.insert_axis(Axis(0))
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Linear CKA `||zj^T zi||_F^2 / (||zi^T zi||_F ||zj^T zj||_F)`, with
/// optional column centering. Rows are examples; the widths may differ.
pub fn linear_cka(zi: &Array2<f64>, zj: &Array2<f64>, center: bool) -> Result<f64> {
    if zi.nrows() != zj.nrows() {
        return Err(Error::shape(format!("{} rows", zi.nrows()), zj.nrows()));
    }
    if zi.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b) = if center {
        (center_columns(zi), center_columns(zj))
    } else {
        (zi.clone(), zj.clone())
    };
    let na = frobenius(&a.t().dot(&a));
    let nb = frobenius(&b.t().dot(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput("a module output is identically zero".into()));
    }
    let cross = frobenius(&b.t().dot(&a));
    Ok((cross / na.sqrt()).powi(2) / nb)
}

/// Symmetric `M x M` CKA matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CkaMatrix(pub Array2<f64>);

impl CkaMatrix {
    /// Mean of the entries above the diagonal.
    pub fn mean_off_diagonal(&self) -> f64 {
        let m = self.0.nrows();
        let vals: Vec<f64> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|ij| self.0[ij]).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn cka_matrix(mods: &ModuleSet, probe: &ProbeBatch) -> Result<CkaMatrix> {
    let m = mods.modules();
    if m < 2 {
        return Err(Error::InvalidConfig("CKA needs at least two modules".into()));
    }
    let z = module_outputs(mods, probe)?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let values = try_map_indexed(pairs.len(), |p| linear_cka(&z[pairs[p].0], &z[pairs[p].1], false))?;
    let mut out = Array2::eye(m);
    for (&(i, j), v) in pairs.iter().zip(values) {
        out[[i, j]] = v;
        out[[j, i]] = v;
    }
    // The diagonal is 1 by definition but still needs nonzero outputs.
    for (i, zi) in z.iter().enumerate() {
        if zi.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateInput(format!("module {i} is inactive on the probe batch")));
        }
    }
    Ok(CkaMatrix(out))
}

/// Fraction of (run, layer) slots that picked each module.
pub fn assignment_histogram(runs: &[HardAssignment], modules: usize) -> Result<Array1<f64>> {
    let total: usize = runs.iter().map(|r| r.0.len()).sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mut counts = Array1::zeros(modules);
    for r in runs {
        r.validate(modules)?;
        for &i in &r.0 {
            counts[i] += 1.0;
        }
    }
    Ok(counts / total as f64)
}

/// `(c_ml - c_jl) / c_ml`.
pub fn relative_rate_gain(c_ml: f64, c_jl: f64) -> Result<f64> {
    if !(c_ml > 0.0) {
        return Err(Error::NonpositiveReference(c_ml));
    }
    Ok((c_ml - c_jl) / c_ml)
}

/// Direct-link SNR `10 log10(pmax g_kk / sigma2)` summary in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrStats {
    pub count: usize,
    pub mean_db: f64,
    pub min_db: f64,
    pub max_db: f64,
}

/// SNR summary over every link and slot of a period; links with zero direct
/// gain are skipped.
pub fn empirical_sinr_stats(dataset: &PeriodDataset, pmax: f64, sigma2: f64) -> Result<SnrStats> {
    let values: Vec<f64> = dataset
        .realizations
        .iter()
        .flat_map(|r| r.gains().diag().to_vec())
        .filter(|&g| g > 0.0)
        .map(|g| 10.0 * (pmax * g / sigma2).log10())
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(SnrStats {
        count: values.len(),
        mean_db: values.iter().sum::<f64>() / values.len() as f64,
        min_db: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_db: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Sample mean and standard error of the mean (zero for one value).
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Float formatting used by every CSV: 9 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// `M x M` grid with a header row `,m0,m1,...` and one labeled row per module.
pub fn write_cka_csv(w: &mut impl Write, cka: &CkaMatrix) -> std::io::Result<()> {
    let m = cka.0.nrows();
    let header: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
    writeln!(w, "module,{}", header.join(","))?;
    for (i, row) in cka.0.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        writeln!(w, "m{i},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_histogram_csv(w: &mut impl Write, hist: &Array1<f64>) -> std::io::Result<()> {
    writeln!(w, "module_index,frequency")?;
    for (i, &f) in hist.iter().enumerate() {
        writeln!(w, "{i},{}", fmt_float(f))?;
    }
    Ok(())
}

/// One point of a gain curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainRow {
    pub x_value: f64,
    pub mean: f64,
    pub stderr: f64,
}

pub fn write_gain_csv(w: &mut impl Write, rows: &[GainRow]) -> std::io::Result<()> {
    writeln!(w, "x_value,mean,stderr")?;
    for r in rows {
        writeln!(w, "{},{},{}", fmt_float(r.x_value), fmt_float(r.mean), fmt_float(r.stderr))?;
    }
    Ok(())
}
