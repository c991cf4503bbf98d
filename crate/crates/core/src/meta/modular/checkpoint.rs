use std::path::Path;

use ndarray::Array2;

use super::network::ModuleSet;
use crate::error::Result;
use crate::textfmt::{Reader, Writer};

const MAGIC: &str = "metapower-modules-v1";

/// A module set plus the depth it was trained for and the producing seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulesCheckpoint {
    pub modules: ModuleSet,
    pub layers: usize,
    pub seed: u64,
}

impl ModulesCheckpoint {
    pub fn to_text(&self) -> String {
        let m = &self.modules;
        let mut w = Writer::default();
        w.line("format", MAGIC);
        w.line("modules", m.modules());
        w.line("taps", m.filter_len());
        w.line("layers", self.layers);
        w.floats("pmax", [&m.pmax]);
        w.line("seed", self.seed);
        for row in m.taps.rows() {
            w.floats("module", row.iter());
        }
        w.out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        r.header(MAGIC)?;
        let count: usize = r.value("modules")?;
        let n: usize = r.value("taps")?;
        let layers: usize = r.value("layers")?;
        let pmax: f64 = r.value("pmax")?;
        let seed: u64 = r.value("seed")?;
        let mut flat = Vec::with_capacity(count * n);
        for _ in 0..count {
            flat.extend(r.floats("module", n)?);
        }
        r.finish()?;
        let taps = Array2::from_shape_vec((count, n), flat).expect("length checked per row");
        Ok(Self {
            modules: ModuleSet::new(taps, pmax)?,
            layers,
            seed,
        })
    }
}

pub fn save_modules(path: impl AsRef<Path>, ckpt: &ModulesCheckpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_text())?;
    Ok(())
}

pub fn load_modules(path: impl AsRef<Path>) -> Result<ModulesCheckpoint> {
    ModulesCheckpoint::from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_is_bit_exact() {
        let modules = ModuleSet::init(6, 4, 3.1622776601683795e-4, &mut RngStream::new(2)).unwrap();
        let ckpt = ModulesCheckpoint { modules, layers: 2, seed: 5 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_modules(&path, &ckpt).unwrap();
        assert_eq!(load_modules(&path).unwrap(), ckpt);
    }
}
