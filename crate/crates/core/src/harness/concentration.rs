//! Data concentrating at the origin of the rough potential, split between the
//! two escape branches.

use rayon::prelude::*;

use crate::classical::{BranchSign, TrajectoryBranch};
use crate::error::Result;
use crate::grid::PhaseGrid;
use crate::initial_data::{concentrating_wigner_data, ConcentratingProfile};
use crate::metrics::{weak_distance, WeakMetricConfig};
use crate::phase_space::{husimi, Atom, PhaseSpaceDensity};
use crate::potential::PotentialSpec;
use crate::quantum::wigner_flow::propagate_wigner;
use crate::quantum::PropagatorConfig;

use super::{strictly_decreasing, ExperimentConfig, Record, RunManifest, Table};

pub const EVEN_MASS_TOLERANCE: f64 = 0.05;
pub const SHIFTED_MASS_TOLERANCE: f64 = 0.07;

/// `c₊ δ_{(X⁺, P⁺)} + c₋ δ_{(X⁻, P⁻)}` for branches leaving the origin at 0.
pub fn two_atom_limit(theta: f64, c_plus: f64, c_minus: f64, t: f64) -> Result<PhaseSpaceDensity> {
    let plus = TrajectoryBranch::new(theta, BranchSign::Plus, 0.0)?.state(t);
    let minus = TrajectoryBranch::new(theta, BranchSign::Minus, 0.0)?.state(t);
    PhaseSpaceDensity::from_atoms(vec![
        Atom {
            mass: c_plus,
            x: plus.0,
            p: plus.1,
        },
        Atom {
            mass: c_minus,
            x: minus.0,
            p: minus.1,
        },
    ])
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    husimi_distance: f64,
    wigner_distance: f64,
    right: f64,
    left: f64,
}

struct ProfileRun {
    c_plus: f64,
    c_minus: f64,
    gap: f64,
    samples: Vec<Sample>,
    snapshots: Vec<(String, PhaseSpaceDensity)>,
    warnings: Vec<String>,
}

fn run_profile(
    cfg: &ExperimentConfig,
    profile: &ConcentratingProfile,
    eps: f64,
    grid: &PhaseGrid,
    times: &[f64],
    tag: &str,
) -> Result<ProfileRun> {
    let (r, l) = profile.half_plane_masses();
    let (c_plus, c_minus) = (r / (r + l), l / (r + l));
    let datum = concentrating_wigner_data(profile, eps, grid)?;
    let pot = cfg.potential_or(PotentialSpec::rough_power(cfg.theta));
    let metric = WeakMetricConfig::default();
    let plus = TrajectoryBranch::new(cfg.theta, BranchSign::Plus, 0.0)?;
    let mut w = datum.realized;
    let mut now = 0.0;
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    let mut warnings = Vec::new();
    for &t in times {
        if t > now {
            let step = propagate_wigner(&w, eps, &pot, &PropagatorConfig::new(cfg.dt, t - now))?;
            warnings.extend(step.warnings);
            w = step.state;
            now = t;
        }
        let h = husimi(&w, eps)?;
        let target = two_atom_limit(cfg.theta, c_plus, c_minus, t)?;
        let x_sep = plus.state(t).0 / 2.0;
        let mass = h.total_mass();
        samples.push(Sample {
            t,
            husimi_distance: weak_distance(&h, &target, &metric)?,
            wigner_distance: weak_distance(&w, &target, &metric)?,
            right: h.half_plane_mass(x_sep, true) / mass,
            left: h.half_plane_mass(x_sep, false) / mass,
        });
        snapshots.push((format!("husimi_{tag}_eps={eps}_t={t}"), h));
    }
    Ok(ProfileRun {
        c_plus,
        c_minus,
        gap: datum.realization_gap,
        samples,
        snapshots,
        warnings,
    })
}

pub fn run_concentration_split(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::start(cfg);
    let even = ConcentratingProfile {
        theta: cfg.theta,
        center: [0.0, 0.0],
        radii: cfg.bump_radii,
    };
    let shifted = ConcentratingProfile::with_right_mass(cfg.theta, cfg.bump_radii, cfg.right_mass)?;
    let grid = cfg.phase_grid()?;
    let mut times = vec![0.0];
    times.extend(cfg.check_times.iter().copied().filter(|t| *t > 0.0));
    if cfg.check_times.is_empty() {
        times.push(cfg.t_final);
    }
    let profiles = [("even", even), ("shifted", shifted)];
    let jobs: Vec<(f64, usize)> = cfg
        .eps_ladder
        .iter()
        .flat_map(|&e| (0..profiles.len()).map(move |k| (e, k)))
        .collect();
    let runs: Vec<Result<ProfileRun>> = jobs
        .par_iter()
        .map(|&(e, k)| run_profile(cfg, &profiles[k].1, e, &grid, &times, profiles[k].0))
        .collect();

    let mut table = Table::new(
        "concentration_split",
        &[
            "eps",
            "profile",
            "t",
            "husimi_distance",
            "wigner_distance",
            "right_mass",
            "left_mass",
            "c_plus",
            "c_minus",
            "realization_gap",
        ],
    );
    // [profile][eps index] -> samples
    let mut by_profile: Vec<Vec<ProfileRun>> = vec![Vec::new(), Vec::new()];
    for (&(eps, k), run) in jobs.iter().zip(runs) {
        let run = run?;
        for w in &run.warnings {
            m.warn(w.clone());
        }
        for s in &run.samples {
            table.push(vec![
                eps,
                k as f64,
                s.t,
                s.husimi_distance,
                s.wigner_distance,
                s.right,
                s.left,
                run.c_plus,
                run.c_minus,
                run.gap,
            ]);
        }
        let last = run.samples.last().expect("at least one time");
        m.records.push(
            Record::new(format!("{}/eps={eps}", profiles[k].0), Some(eps))
                .with("c_plus", run.c_plus)
                .with("c_minus", run.c_minus)
                .with("realization_gap", run.gap)
                .with("husimi_distance_final", last.husimi_distance)
                .with("wigner_distance_final", last.wigner_distance)
                .with("right_mass_final", last.right)
                .with("left_mass_final", last.left),
        );
        by_profile[k].push(run);
    }
    for (name, snap) in by_profile.iter().flat_map(|v| v.iter()).flat_map(|r| r.snapshots.iter()) {
        m.snapshot(name.clone(), snap);
    }
    m.add_table(table);

    for (ti, &t) in times.iter().enumerate().filter(|(_, t)| **t > 0.0) {
        let hus: Vec<f64> = by_profile[0].iter().map(|r| r.samples[ti].husimi_distance).collect();
        m.check(
            &format!("distance_decreasing_t={t}"),
            strictly_decreasing(&hus),
            format!("Husimi weak distances {hus:?}"),
        );
    }
    let smallest = |k: usize| by_profile[k].last().expect("non-empty ladder");
    let even_run = smallest(0);
    let even_ok = even_run.samples.iter().filter(|s| s.t > 0.0).all(|s| {
        (s.right - 0.5).abs() <= EVEN_MASS_TOLERANCE && (s.left - 0.5).abs() <= EVEN_MASS_TOLERANCE
    });
    let pairs: Vec<(f64, f64)> = even_run.samples.iter().map(|s| (s.right, s.left)).collect();
    m.check(
        "even_half_plane_masses",
        even_ok,
        format!("(right, left) per time at the smallest ε: {pairs:?}"),
    );
    let sh = smallest(1);
    let rights: Vec<f64> = sh.samples.iter().filter(|s| s.t > 0.0).map(|s| s.right).collect();
    m.check(
        "shifted_right_mass",
        rights.iter().all(|r| (r - sh.c_plus).abs() <= SHIFTED_MASS_TOLERANCE),
        format!("right masses {rights:?} against c₊ = {:.4}", sh.c_plus),
    );
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_merge_at_the_origin_initially() {
        let mu = two_atom_limit(0.5, 0.3, 0.7, 0.0).unwrap();
        let metric = WeakMetricConfig::default();
        let d = weak_distance(&mu, &PhaseSpaceDensity::dirac(0.0, 0.0), &metric).unwrap();
        assert!(d < 1e-12);
        let later = two_atom_limit(0.5, 0.3, 0.7, 3.0).unwrap();
        assert!(weak_distance(&later, &PhaseSpaceDensity::dirac(0.0, 0.0), &metric).unwrap() > 0.1);
    }
}
