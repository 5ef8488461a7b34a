//! Sup norms of Husimi functions for ε-dependent state families.
//!
//! Exploratory: the run records the numbers next to the `ε^{-1}` bound line
//! and makes no assertion.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::PositionGrid;
use crate::initial_data::{coherent_mixture, coherent_state, EDGE_SIGMAS};
use crate::phase_space::{husimi, sup_norm, wigner_ensemble};
use crate::quantum::DensityEnsemble;

use super::{ExperimentConfig, Record, RunManifest, Table};

const HEADROOM: f64 = 1.3;

/// Grid holding coherent states centred in `[-half, half]²`.
fn box_grid(half: f64, eps: f64) -> Result<PositionGrid> {
    let pad = EDGE_SIGMAS * (eps / 2.0).sqrt();
    let extent = half + 2.0 * pad + 1.0;
    let dx = eps * std::f64::consts::PI / (2.0 * HEADROOM * (half + pad));
    let n = ((2.0 * extent / dx).ceil() as usize).next_power_of_two().max(64);
    PositionGrid::centered(n, extent)
}

/// `(members, sup W̃)` for the named family at one ε.
fn family_sup(family: usize, half: f64, eps: f64) -> Result<(usize, f64)> {
    let grid = box_grid(half, eps)?;
    let ensemble = if family == 0 {
        DensityEnsemble::pure(coherent_state(0.0, 0.0, eps, &grid)?)
    } else {
        coherent_mixture(|_, _| 1.0, (-half, half), (-half, half), eps.sqrt(), eps, &grid)?
    };
    let w = wigner_ensemble(&ensemble)?;
    Ok((ensemble.members().len(), sup_norm(&husimi(&w, eps)?)?))
}

const FAMILIES: [&str; 2] = ["pure_coherent", "box_mixture"];

pub fn run_conjecture_probe(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::start(cfg);
    let jobs: Vec<(usize, f64)> = (0..FAMILIES.len())
        .flat_map(|f| cfg.eps_ladder.iter().map(move |&e| (f, e)))
        .collect();
    let results: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(f, e)| family_sup(f, cfg.half_width, e))
        .collect();
    let mut table = Table::new(
        "conjecture_probe",
        &["eps", "family", "members", "sup", "sup_times_eps", "bound_inv_eps", "sup_times_2pi_eps"],
    );
    for (&(f, eps), r) in jobs.iter().zip(results) {
        let (members, sup) = r?;
        let two_pi_eps = 2.0 * std::f64::consts::PI * eps;
        table.push(vec![eps, f as f64, members as f64, sup, sup * eps, 1.0 / eps, sup * two_pi_eps]);
        m.records.push(
            Record::new(format!("{}/eps={eps}", FAMILIES[f]), Some(eps))
                .with("members", members as f64)
                .with("sup", sup)
                .with("sup_times_eps", sup * eps)
                .with("sup_times_2pi_eps", sup * two_pi_eps),
        );
    }
    m.add_table(table);
    Ok(m)
}
