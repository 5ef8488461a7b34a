//! Husimi evolution of non-concentrating data against classical transport,
//! in the weak metric.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::classical::Interpolation;
use crate::error::Result;
use crate::metrics::{fit_rate, weak_distance, WeakMetricConfig};
use crate::phase_space::{heat_smooth, husimi, DensityKind, PhaseSpaceDensity};
use crate::potential::PotentialSpec;

use super::{
    gaussian_density, liouville_snapshots, moyal_snapshots, strictly_decreasing, ExperimentConfig, Record,
    RunManifest, Scenario, Table,
};

/// Mass allowed within `|x| < CORE_GUARD` in the rough scenario.
const CORE_GUARD: f64 = 0.25;
const CORE_MASS_LIMIT: f64 = 1e-6;

pub(crate) struct ScenarioSetup {
    pub name: &'static str,
    pub potential: PotentialSpec,
    pub center: [f64; 2],
    pub width: f64,
}

/// Smooth part of the rough potential's right tail, continued to all `x`.
fn tail_polynomial(pot: &PotentialSpec) -> Option<PotentialSpec> {
    let PotentialSpec::RoughPower {
        theta,
        core_radius: r,
        quartic: q,
    } = *pot
    else {
        return None;
    };
    let (x_min, dx, n) = (-20.0, 1e-3, 40_001);
    let samples = (0..n)
        .map(|i| {
            let u = x_min + i as f64 * dx - r;
            -r.powf(1.0 + theta) - (1.0 + theta) * r.powf(theta) * u + q * u.powi(4)
        })
        .collect();
    Some(PotentialSpec::Custom { x_min, dx, samples })
}

pub(crate) fn scenarios(cfg: &ExperimentConfig) -> Vec<ScenarioSetup> {
    let smooth = ScenarioSetup {
        name: "smooth",
        potential: cfg.potential.clone().unwrap_or(PotentialSpec::Anharmonic {
            quadratic: 1.0,
            quartic: 0.1,
        }),
        center: cfg.datum_center,
        width: cfg.datum_width,
    };
    let rough = ScenarioSetup {
        name: "rough_away",
        potential: PotentialSpec::rough_power(cfg.theta),
        // near the bottom of the right well, narrow enough that no mass
        // carries the energy to cross the core within the horizon
        center: [1.7, 0.0],
        width: 0.15,
    };
    match cfg.scenario {
        Scenario::Smooth => vec![smooth],
        Scenario::RoughAway => vec![rough],
        Scenario::Both => vec![smooth, rough],
    }
}

struct LadderPoint {
    /// `sup_t` distance per mollification time.
    sup: Vec<f64>,
    /// Per time: distance for each mollification time.
    rows: Vec<Vec<f64>>,
    locality_gap: Option<f64>,
    warnings: Vec<String>,
}

fn quantum_husimi(
    f0: &PhaseSpaceDensity,
    eps: f64,
    pot: &PotentialSpec,
    cfg: &ExperimentConfig,
    times: &[f64],
    warnings: &mut Vec<String>,
) -> Result<Vec<PhaseSpaceDensity>> {
    // Wigner function of the anti-Wick quantization of f0
    let w0 = heat_smooth(f0, eps / 4.0)?.with_kind(DensityKind::Wigner);
    moyal_snapshots(&w0, eps, pot, cfg.dt, times, warnings)?
        .iter()
        .map(|w| husimi(w, eps))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn ladder_point(
    cfg: &ExperimentConfig,
    sc: &ScenarioSetup,
    f0: &PhaseSpaceDensity,
    eps: f64,
    mollify: &[f64],
    classical: &BTreeMap<u64, Vec<PhaseSpaceDensity>>,
    times: &[f64],
) -> Result<LadderPoint> {
    let mut warnings = Vec::new();
    let hus = quantum_husimi(f0, eps, &sc.potential, cfg, times, &mut warnings)?;
    let metric = WeakMetricConfig::default();
    let mut rows = Vec::with_capacity(times.len());
    for (k, h) in hus.iter().enumerate() {
        let row: Result<Vec<f64>> = mollify
            .iter()
            .map(|m| {
                let key = if cfg.eps_mollify_ladder.is_empty() { eps } else { *m };
                weak_distance(h, &classical[&key.to_bits()][k], &metric)
            })
            .collect();
        rows.push(row?);
    }
    let sup = (0..mollify.len())
        .map(|j| rows.iter().map(|r| r[j]).fold(0.0, f64::max))
        .collect();
    let locality_gap = match tail_polynomial(&sc.potential) {
        Some(tail) => {
            let other = quantum_husimi(f0, eps, &tail, cfg, times, &mut Vec::new())?;
            let mut gap = 0.0f64;
            for (a, b) in hus.iter().zip(&other) {
                gap = gap.max(weak_distance(a, b, &metric)?);
            }
            Some(gap)
        }
        None => None,
    };
    Ok(LadderPoint {
        sup,
        rows,
        locality_gap,
        warnings,
    })
}

pub fn run_weak_convergence(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::start(cfg);
    let grid = cfg.phase_grid()?;
    let times = cfg.times();
    let mut table = Table::new("weak_distance", &["scenario", "eps", "eps_mollify", "t", "distance"]);
    let mut sup_table = Table::new("weak_sup_distance", &["scenario", "eps", "eps_mollify", "sup_distance"]);
    for (si, sc) in scenarios(cfg).into_iter().enumerate() {
        let f0 = gaussian_density(&grid, sc.center, sc.width)?;
        // the unmollified rough field needs the local, positivity-preserving
        // shift; spectral shifts would leak ringing into the core
        let interpolation = if sc.potential.core_interval().is_some() {
            Interpolation::CubicClamped
        } else {
            Interpolation::Spectral
        };
        // classical solutions keyed by mollification time; with an empty
        // ladder the mollification follows ε
        let mollify: Vec<f64> = if cfg.eps_mollify_ladder.is_empty() {
            vec![f64::NAN]
        } else {
            cfg.eps_mollify_ladder.clone()
        };
        let keys: Vec<f64> = if cfg.eps_mollify_ladder.is_empty() {
            cfg.eps_ladder.clone()
        } else {
            cfg.eps_mollify_ladder.clone()
        };
        let solved: Vec<Result<(Vec<PhaseSpaceDensity>, Vec<String>)>> = keys
            .par_iter()
            .map(|&k| {
                let mut w = Vec::new();
                let snaps = liouville_snapshots(&f0, &sc.potential, k, cfg.dt, interpolation, &times, &mut w)?;
                Ok((snaps, w))
            })
            .collect();
        let mut classical = BTreeMap::new();
        for (k, r) in keys.iter().zip(solved) {
            let (snaps, w) = r?;
            for x in w {
                m.warn(format!("{} classical ε_mollify = {k}: {x}", sc.name));
            }
            if sc.name == "rough_away" {
                let near = snaps
                    .iter()
                    .map(|s| s.total_mass() - s.half_plane_mass(CORE_GUARD, true) - s.half_plane_mass(CORE_GUARD, false))
                    .fold(0.0f64, |a, b| a.max(b.abs()));
                m.check(
                    &format!("rough_away_core_untouched_mollify={k}"),
                    near < CORE_MASS_LIMIT,
                    format!("classical mass within |x| < {CORE_GUARD}: {near:.3e}"),
                );
            }
            classical.insert(k.to_bits(), snaps);
        }

        let points: Vec<Result<LadderPoint>> = cfg
            .eps_ladder
            .par_iter()
            .map(|&e| ladder_point(cfg, &sc, &f0, e, &mollify, &classical, &times))
            .collect();
        let mut sups: Vec<Vec<f64>> = vec![Vec::new(); mollify.len()];
        for (&eps, p) in cfg.eps_ladder.iter().zip(points) {
            let p = p?;
            for w in p.warnings {
                m.warn(format!("{} ε = {eps}: {w}", sc.name));
            }
            let mol_of = |j: usize| if mollify[j].is_nan() { eps } else { mollify[j] };
            for (k, row) in p.rows.iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    table.push(vec![si as f64, eps, mol_of(j), times[k], *d]);
                }
            }
            let mut rec = Record::new(format!("{}/eps={eps}", sc.name), Some(eps));
            for (j, s) in p.sup.iter().enumerate() {
                sup_table.push(vec![si as f64, eps, mol_of(j), *s]);
                sups[j].push(*s);
                rec = rec.with(&format!("sup_distance_mollify={}", mol_of(j)), *s);
            }
            if let Some(g) = p.locality_gap {
                rec = rec.with("locality_gap", g);
            }
            m.records.push(rec);
        }
        for (j, series) in sups.iter().enumerate() {
            let tag = if mollify[j].is_nan() { "eps".to_string() } else { mollify[j].to_string() };
            if cfg.eps_ladder.len() >= 3 {
                match fit_rate(&cfg.eps_ladder, series) {
                    Ok(fit) => {
                        m.fits.insert(format!("{}_mollify={tag}", sc.name), fit);
                    }
                    Err(e) => m.warn(format!("rate fit for {}: {e}", sc.name)),
                }
            }
            m.check(
                &format!("{}_monotone_mollify={tag}", sc.name),
                strictly_decreasing(series),
                format!("sup-over-t weak distances {series:?}"),
            );
        }
    }
    m.add_table(table);
    m.add_table(sup_table);
    Ok(m)
}
