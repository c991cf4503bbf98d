//! Random geometric interference networks with path loss and Rayleigh fading.
//!
//! A *period* fixes a topology (node placement and interference mask); the
//! slots inside a period carry i.i.d. fast-fading draws on top of the
//! period's path loss. All powers are linear milliwatts.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par::try_map_indexed;
use crate::rng::RngStream;

/// Converts a power in dBm to linear milliwatts.
pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// How the number of links `K` of a period is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizePolicy {
    Fixed(usize),
    /// Integer-uniform on the inclusive range `[lo, hi]`.
    Uniform { lo: usize, hi: usize },
}

impl SizePolicy {
    pub fn max_links(&self) -> usize {
        match *self {
            SizePolicy::Fixed(k) => k,
            SizePolicy::Uniform { hi, .. } => hi,
        }
    }
}

/// Scaling applied to the gain matrix before it is used as the graph shift
/// operator of the policy. The sum-rate always uses the raw gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftScaling {
    /// The gain matrix itself.
    Raw,
    /// Gains divided by their spectral norm, so every power `S^n` is
    /// non-expansive.
    #[default]
    SpectralNorm,
}

impl ShiftScaling {
    pub fn name(&self) -> &'static str {
        match self {
            ShiftScaling::Raw => "raw",
            ShiftScaling::SpectralNorm => "spectral",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(ShiftScaling::Raw),
            "spectral" => Some(ShiftScaling::SpectralNorm),
            _ => None,
        }
    }

    pub fn apply(&self, gains: ArrayView2<f64>) -> Array2<f64> {
        match self {
            ShiftScaling::Raw => gains.to_owned(),
            ShiftScaling::SpectralNorm => {
                let norm = spectral_norm(gains);
                if norm > 0.0 {
                    gains.mapv(|g| g / norm)
                } else {
                    gains.to_owned()
                }
            }
        }
    }
}

/// Largest singular value by power iteration on `A^T A`.
pub(crate) fn spectral_norm(a: ArrayView2<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let ata = a.t().dot(&a);
    let mut v = ndarray::Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = ata.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - lambda).abs() <= 1e-14 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Simulation parameters for one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub path_loss_exponent: f64,
    pub noise_dbm: f64,
    pub pmax_dbm: f64,
    pub size_policy: SizePolicy,
    pub slots_per_period: usize,
    pub train_slots: usize,
    pub test_slots: usize,
    /// Placement units; `None` means every pair of links interferes.
    pub interference_radius: Option<f64>,
    pub shift_scaling: ShiftScaling,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.2,
            noise_dbm: -70.0,
            pmax_dbm: -35.0,
            size_policy: SizePolicy::Uniform { lo: 4, hi: 20 },
            slots_per_period: 100,
            train_slots: 50,
            test_slots: 50,
            interference_radius: None,
            shift_scaling: ShiftScaling::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return fail("path-loss exponent must be positive");
        }
        if !self.noise_dbm.is_finite() || !self.pmax_dbm.is_finite() {
            return fail("noise and maximum power must be finite");
        }
        match self.size_policy {
            SizePolicy::Fixed(k) if k < 1 => return fail("network size must be at least 1"),
            SizePolicy::Uniform { lo, hi } if lo < 1 || lo > hi => {
                return fail("network size range must satisfy 1 <= lo <= hi")
            }
            _ => {}
        }
        if self.train_slots + self.test_slots > self.slots_per_period {
            return fail("train_slots + test_slots exceeds slots_per_period");
        }
        if let Some(r) = self.interference_radius {
            if !(r >= 0.0) || !r.is_finite() {
                return fail("interference radius must be a nonnegative number");
            }
        }
        Ok(())
    }

    pub fn noise_linear(&self) -> f64 {
        dbm_to_linear(self.noise_dbm)
    }

    pub fn pmax_linear(&self) -> f64 {
        dbm_to_linear(self.pmax_dbm)
    }
}

pub type Point = [f64; 2];

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Node placement and interference mask for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub period_id: u64,
    pub k: usize,
    pub tx_positions: Vec<Point>,
    pub rx_positions: Vec<Point>,
    /// `adjacency[[j, k]]`: transmitter `j` is heard at receiver `k`.
    pub adjacency: Array2<bool>,
}

impl Topology {
    /// Builds the interference mask for explicit positions. Links `j != k`
    /// interfere when either transmitter lies within `radius` of the other
    /// link's receiver, which keeps the mask symmetric.
    pub fn from_positions(
        period_id: u64,
        tx_positions: Vec<Point>,
        rx_positions: Vec<Point>,
        radius: Option<f64>,
    ) -> Result<Self> {
        let k = tx_positions.len();
        if rx_positions.len() != k {
            return Err(Error::shape(format!("{k} receivers"), rx_positions.len()));
        }
        let adjacency = Array2::from_shape_fn((k, k), |(j, i)| {
            j == i
                || match radius {
                    None => true,
                    Some(r) => {
                        distance(tx_positions[j], rx_positions[i]) <= r
                            || distance(tx_positions[i], rx_positions[j]) <= r
                    }
                }
        });
        Ok(Self {
            period_id,
            k,
            tx_positions,
            rx_positions,
            adjacency,
        })
    }

    /// Number of interfering (off-diagonal) ordered pairs.
    pub fn interference_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count() - self.k
    }
}

/// Linear power gains of one slot: `gains[[j, k]]` is the gain from
/// transmitter `j` to receiver `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: Array2<f64>,
    shift: Array2<f64>,
    pub slot: usize,
    pub period_id: u64,
}

impl ChannelRealization {
    /// Wraps a gain matrix, using it unscaled as the shift operator.
    pub fn new(gains: Array2<f64>, slot: usize, period_id: u64) -> Result<Self> {
        Self::with_scaling(gains, ShiftScaling::Raw, slot, period_id)
    }

    pub fn with_scaling(
        gains: Array2<f64>,
        scaling: ShiftScaling,
        slot: usize,
        period_id: u64,
    ) -> Result<Self> {
        let (r, c) = gains.dim();
        if r != c {
            return Err(Error::shape("square gain matrix", format!("{r}x{c}")));
        }
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidConfig(
                "gains must be finite and nonnegative".into(),
            ));
        }
        let shift = scaling.apply(gains.view());
        Ok(Self {
            gains,
            shift,
            slot,
            period_id,
        })
    }

    /// Same gains with a different shift-operator scaling.
    pub fn rescaled(&self, scaling: ShiftScaling) -> Self {
        Self {
            gains: self.gains.clone(),
            shift: scaling.apply(self.gains.view()),
            slot: self.slot,
            period_id: self.period_id,
        }
    }

    /// Same slot labels with already-consistent gains and shift.
    pub(crate) fn with_matrices(&self, gains: Array2<f64>, shift: Array2<f64>) -> Self {
        Self {
            gains,
            shift,
            slot: self.slot,
            period_id: self.period_id,
        }
    }

    pub fn k(&self) -> usize {
        self.gains.nrows()
    }

    pub fn gains(&self) -> &Array2<f64> {
        &self.gains
    }

    /// Graph shift operator fed to the policy.
    pub fn shift(&self) -> &Array2<f64> {
        &self.shift
    }
}

/// Anything that exposes a period's train and test slots.
///
/// Trainers only see periods through this trait, which lets tests observe
/// exactly which part of a period an algorithm reads.
pub trait SlotSource: Sync {
    fn train_slots(&self) -> Vec<&ChannelRealization>;
    fn test_slots(&self) -> Vec<&ChannelRealization>;
}

/// One period: topology, every slot's realization and the train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodDataset {
    pub topology: Topology,
    pub realizations: Vec<ChannelRealization>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl PeriodDataset {
    pub fn new(
        topology: Topology,
        realizations: Vec<ChannelRealization>,
        train_idx: Vec<usize>,
        test_idx: Vec<usize>,
    ) -> Result<Self> {
        let n = realizations.len();
        if train_idx.iter().chain(&test_idx).any(|&i| i >= n) {
            return Err(Error::InvalidConfig("slot index out of range".into()));
        }
        if train_idx.iter().any(|i| test_idx.contains(i)) {
            return Err(Error::InvalidConfig(
                "train and test slots overlap".into(),
            ));
        }
        if realizations.iter().any(|r| r.k() != topology.k) {
            return Err(Error::shape(
                format!("{0}x{0} gains", topology.k),
                "a realization of another size",
            ));
        }
        Ok(Self {
            topology,
            realizations,
            train_idx,
            test_idx,
        })
    }

    pub fn k(&self) -> usize {
        self.topology.k
    }

    /// Relabels the links of every realization (positions and mask included).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let realizations = self
            .realizations
            .iter()
            .map(|r| crate::regnn::permute_channel(r, perm))
            .collect::<Result<Vec<_>>>()?;
        let t = &self.topology;
        let topology = Topology {
            period_id: t.period_id,
            k: t.k,
            tx_positions: perm.iter().map(|&i| t.tx_positions[i]).collect(),
            rx_positions: perm.iter().map(|&i| t.rx_positions[i]).collect(),
            adjacency: Array2::from_shape_fn((t.k, t.k), |(a, b)| {
                t.adjacency[[perm[a], perm[b]]]
            }),
        };
        Self::new(
            topology,
            realizations,
            self.train_idx.clone(),
            self.test_idx.clone(),
        )
    }
}

impl SlotSource for PeriodDataset {
    fn train_slots(&self) -> Vec<&ChannelRealization> {
        self.train_idx.iter().map(|&i| &self.realizations[i]).collect()
    }

    fn test_slots(&self) -> Vec<&ChannelRealization> {
        self.test_idx.iter().map(|&i| &self.realizations[i]).collect()
    }
}

/// Drops `K` transmitters uniformly in `[-K, K]^2`, each receiver uniformly in
/// the square of half-width `K/4` around its transmitter.
pub fn draw_topology(cfg: &SimConfig, period_id: u64, rng: &mut RngStream) -> Topology {
    let k = match cfg.size_policy {
        SizePolicy::Fixed(k) => k,
        SizePolicy::Uniform { lo, hi } => rng.random_range(lo..=hi),
    };
    let side = k as f64;
    let mut tx = Vec::with_capacity(k);
    let mut rx = Vec::with_capacity(k);
    for _ in 0..k {
        let t = [
            rng.random_range(-side..=side),
            rng.random_range(-side..=side),
        ];
        let q = side / 4.0;
        let r = [
            t[0] + rng.random_range(-q..=q),
            t[1] + rng.random_range(-q..=q),
        ];
        tx.push(t);
        rx.push(r);
    }
    Topology::from_positions(period_id, tx, rx, cfg.interference_radius)
        .expect("positions have equal length")
}

/// Path-loss amplitudes `||Tx_j - Rx_k||^-gamma` on the interference mask.
pub fn pathloss_matrix(t: &Topology, gamma: f64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((t.k, t.k));
    for j in 0..t.k {
        for k in 0..t.k {
            if !t.adjacency[[j, k]] {
                continue;
            }
            let d = distance(t.tx_positions[j], t.rx_positions[k]);
            if d == 0.0 {
                return Err(Error::DegenerateGeometry { tx: j, rx: k });
            }
            out[[j, k]] = d.powf(-gamma);
        }
    }
    Ok(out)
}

/// Rayleigh(1) fading magnitudes: `|h|` with `h` circularly-symmetric
/// complex Gaussian with unit-variance real and imaginary parts.
pub fn draw_fading(k: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_simple_fn((k, k), || loop {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let m = re.hypot(im);
        if m > 0.0 {
            break m;
        }
    })
}

/// Combines path loss and fading into power gains `(h_p |h_f|)^2`.
pub fn realize_channel(
    t: &Topology,
    pathloss: &Array2<f64>,
    fading: &Array2<f64>,
    slot: usize,
    scaling: ShiftScaling,
) -> Result<ChannelRealization> {
    let want = (t.k, t.k);
    if pathloss.dim() != want || fading.dim() != want {
        return Err(Error::shape(
            format!("{}x{}", t.k, t.k),
            format!("{:?} / {:?}", pathloss.dim(), fading.dim()),
        ));
    }
    let gains = ndarray::Zip::from(pathloss)
        .and(fading)
        .map_collect(|&p, &f| (p * f) * (p * f));
    ChannelRealization::with_scaling(gains, scaling, slot, t.period_id)
}

/// One topology plus `slots_per_period` fading draws; the first
/// `train_slots` slots train, the next `test_slots` test.
pub fn generate_period(cfg: &SimConfig, period_id: u64, rng: &RngStream) -> Result<PeriodDataset> {
    let topology = draw_topology(cfg, period_id, &mut rng.child("topology"));
    let pathloss = pathloss_matrix(&topology, cfg.path_loss_exponent)?;
    let mut fading_rng = rng.child("fading");
    let realizations = (0..cfg.slots_per_period)
        .map(|slot| {
            let fading = draw_fading(topology.k, &mut fading_rng);
            realize_channel(&topology, &pathloss, &fading, slot, cfg.shift_scaling)
        })
        .collect::<Result<Vec<_>>>()?;
    let train_idx = (0..cfg.train_slots).collect();
    let test_idx = (cfg.train_slots..cfg.train_slots + cfg.test_slots).collect();
    PeriodDataset::new(topology, realizations, train_idx, test_idx)
}

/// `n_periods` independent periods, period `i` drawn from child stream `("period", i)`.
pub fn generate_meta_dataset(
    cfg: &SimConfig,
    n_periods: usize,
    rng: &RngStream,
) -> Result<Vec<PeriodDataset>> {
    if n_periods == 0 {
        return Err(Error::InvalidConfig("need at least one period".into()));
    }
    cfg.validate()?;
    try_map_indexed(n_periods, |i| {
        generate_period(cfg, i as u64, &rng.child_indexed("period", i as u64))
    })
}
