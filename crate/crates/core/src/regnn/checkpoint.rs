use std::path::Path;

use ndarray::Array2;

use super::policy::ReGnnParams;
use crate::error::Result;
use crate::textfmt::{Reader, Writer};

const MAGIC: &str = "metapower-regnn-v1";

/// Policy parameters plus the seed of the run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsCheckpoint {
    pub params: ReGnnParams,
    pub seed: u64,
}

impl ParamsCheckpoint {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut w = Writer::default();
        w.line("format", MAGIC);
        w.line("layers", p.layers());
        w.line("taps", p.filter_len());
        w.floats("pmax", [&p.pmax]);
        w.line("seed", self.seed);
        for row in p.taps.rows() {
            w.floats("layer", row.iter());
        }
        w.out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        r.header(MAGIC)?;
        let layers: usize = r.value("layers")?;
        let n: usize = r.value("taps")?;
        let pmax: f64 = r.value("pmax")?;
        let seed: u64 = r.value("seed")?;
        let mut flat = Vec::with_capacity(layers * n);
        for _ in 0..layers {
            flat.extend(r.floats("layer", n)?);
        }
        r.finish()?;
        let taps = Array2::from_shape_vec((layers, n), flat).expect("length checked per row");
        Ok(Self {
            params: ReGnnParams::new(taps, pmax)?,
            seed,
        })
    }
}

pub fn save_params(path: impl AsRef<Path>, ckpt: &ParamsCheckpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_text())?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamsCheckpoint> {
    ParamsCheckpoint::from_text(&std::fs::read_to_string(path)?)
}
