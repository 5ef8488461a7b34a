//! Closed-form trajectory branches leaving the origin of `V = -|x|^{1+θ}`.

use rayon::prelude::*;

use crate::classical::{branch_family, integrate_hamiltonian, BranchSign, TrajectoryBranch, MAX_ATLAS_THETA};
use crate::error::{config, Result};
use crate::potential::PotentialSpec;

use super::{ExperimentConfig, Record, RunManifest, Table};

pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const SHADOW_TOLERANCE: f64 = 1e-5;
/// Residuals are checked only this long after the branch leaves the origin.
const SETTLE: f64 = 0.05;
const RESIDUAL_STEP: f64 = 1e-6;
const PATH_SAMPLES: usize = 150;

/// The rest branch plus a `±` pair for every delay.
pub fn atlas_branches(theta: f64, delays: &[f64]) -> Result<Vec<TrajectoryBranch>> {
    let mut spec = vec![(BranchSign::Rest, 0.0)];
    for &t0 in delays {
        spec.push((BranchSign::Plus, t0));
        spec.push((BranchSign::Minus, t0));
    }
    branch_family(theta, &spec)
}

fn sign_value(s: BranchSign) -> f64 {
    match s {
        BranchSign::Plus => 1.0,
        BranchSign::Minus => -1.0,
        BranchSign::Rest => 0.0,
    }
}

struct BranchReport {
    branch: TrajectoryBranch,
    max_residual: f64,
    shadow_error: f64,
    path: Vec<[f64; 3]>,
}

fn examine(b: TrajectoryBranch, cfg: &ExperimentConfig, t_end: f64) -> Result<BranchReport> {
    let path: Vec<[f64; 3]> = (0..=PATH_SAMPLES)
        .map(|k| {
            let t = t_end * k as f64 / PATH_SAMPLES as f64;
            let (x, p) = b.state(t);
            [t, x, p]
        })
        .collect();
    let max_residual = path
        .iter()
        .filter(|r| b.sign != BranchSign::Rest && r[0] > b.t0 + SETTLE)
        .map(|r| {
            let (rx, rp) = b.residual(r[0], RESIDUAL_STEP);
            rx.max(rp)
        })
        .fold(0.0, f64::max);
    // Verlet in the rough potential, started on the branch away from the
    // origin, must shadow the closed form.
    let (a, z) = (b.t0 + cfg.t_final / 3.0, b.t0 + cfg.t_final);
    let (x0, p0) = b.state(a);
    let end = integrate_hamiltonian(x0, p0, &PotentialSpec::rough_power(b.theta), cfg.dt, z - a)?.last();
    let exact = b.state(z);
    let scale = exact.0.abs().max(exact.1.abs());
    let gap = (end.0 - exact.0).abs().max((end.1 - exact.1).abs());
    let shadow_error = if scale > 0.0 { gap / scale } else { gap };
    Ok(BranchReport {
        branch: b,
        max_residual,
        shadow_error,
        path,
    })
}

pub fn run_branch_atlas(cfg: &ExperimentConfig) -> Result<RunManifest> {
    if let Some(t) = cfg.thetas.iter().find(|t| !(**t >= 0.0 && **t < MAX_ATLAS_THETA)) {
        return config(format!("atlas θ must lie in [0, {MAX_ATLAS_THETA}), got {t}"));
    }
    if cfg.thetas.contains(&0.0) {
        return config("the shadow check needs a rough potential, θ > 0");
    }
    let mut m = RunManifest::start(cfg);
    let t_end = cfg.t_final + cfg.delays.iter().copied().fold(0.0, f64::max);
    let mut jobs = Vec::new();
    for &theta in &cfg.thetas {
        jobs.extend(atlas_branches(theta, &cfg.delays)?);
    }
    let reports: Result<Vec<BranchReport>> = jobs.into_par_iter().map(|b| examine(b, cfg, t_end)).collect();
    let mut paths = Table::new("branch_paths", &["theta", "sign", "t0", "t", "x", "p"]);
    let mut summary = Table::new("branch_summary", &["theta", "sign", "t0", "c0", "nu", "max_residual", "shadow_error"]);
    let (mut worst_res, mut worst_shadow) = (0.0f64, 0.0f64);
    for r in reports? {
        let b = r.branch;
        let s = sign_value(b.sign);
        for [t, x, p] in r.path {
            paths.push(vec![b.theta, s, b.t0, t, x, p]);
        }
        summary.push(vec![b.theta, s, b.t0, b.c0, b.nu, r.max_residual, r.shadow_error]);
        worst_res = worst_res.max(r.max_residual);
        worst_shadow = worst_shadow.max(r.shadow_error);
        m.records.push(
            Record::new(format!("theta={}/{}", b.theta, b.label()), None)
                .with("theta", b.theta)
                .with("c0", b.c0)
                .with("nu", b.nu)
                .with("max_residual", r.max_residual)
                .with("shadow_error", r.shadow_error),
        );
    }
    m.add_table(paths);
    m.add_table(summary);
    m.check(
        "branch_residual",
        worst_res < RESIDUAL_TOLERANCE,
        format!("max relative ODE residual {worst_res:.3e} (tolerance {RESIDUAL_TOLERANCE:e})"),
    );
    m.check(
        "verlet_shadow",
        worst_shadow < SHADOW_TOLERANCE,
        format!("max relative Verlet deviation {worst_shadow:.3e} (tolerance {SHADOW_TOLERANCE:e})"),
    );
    Ok(m)
}
