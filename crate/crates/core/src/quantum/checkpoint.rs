//! State snapshots: `<stem>.grid` holds `Re ψ` and `Im ψ` as a 2-row binary
//! grid, `<stem>.json` the metadata needed to resume.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PositionGrid};
use crate::gridio::{load_grid, save_grid};
use crate::potential::PotentialSpec;

use super::{PropagatorConfig, WaveFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub eps: f64,
    pub t: f64,
    pub potential_hash: String,
    pub config_hash: String,
    pub grid: GridSpec,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn save_checkpoint(
    stem: impl AsRef<Path>,
    state: &WaveFunction,
    t: f64,
    pot: &PotentialSpec,
    cfg: &PropagatorConfig,
) -> Result<CheckpointMeta> {
    let stem = stem.as_ref();
    let n = state.grid().len();
    let mut data = Array2::zeros((2, n));
    for (i, z) in state.values().iter().enumerate() {
        data[[0, i]] = z.re;
        data[[1, i]] = z.im;
    }
    save_grid(with_ext(stem, "grid"), &data)?;
    let meta = CheckpointMeta {
        eps: state.eps(),
        t,
        potential_hash: pot.hash(),
        config_hash: cfg.hash(),
        grid: state.grid().spec(),
    };
    fs::write(with_ext(stem, "json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<(WaveFunction, CheckpointMeta)> {
    let stem = stem.as_ref();
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    let data = load_grid(with_ext(stem, "grid"))?;
    let grid = PositionGrid::try_from(meta.grid)?;
    if data.dim() != (2, grid.len()) {
        return Err(Error::Format(format!(
            "checkpoint payload {:?} does not match grid of {} points",
            data.dim(),
            grid.len()
        )));
    }
    let values = (0..grid.len())
        .map(|i| Complex64::new(data[[0, i]], data[[1, i]]))
        .collect();
    Ok((WaveFunction::new(grid, values, meta.eps)?, meta))
}
