//! Coherent states in the harmonic oscillator against the exactly rotated
//! Gaussian Wigner function.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{PhaseGrid, PositionGrid};
use crate::initial_data::coherent_state;
use crate::metrics::l2_distance;
use crate::phase_space::{l2_norm, wigner, DensityKind, PhaseSpaceDensity};
use crate::potential::PotentialSpec;
use crate::quantum::{propagate, PropagatorConfig};

use super::{ExperimentConfig, Record, RunManifest, Table};

/// Absolute `L²` tolerance between the computed and the exact Wigner function.
pub const HARMONIC_TOLERANCE: f64 = 1e-4;

/// `(1/πε) exp(-|z - z_t|²/ε)` with `z_t` the harmonic flow of `(x0, p0)`.
pub fn rotated_gaussian(grid: &PhaseGrid, x0: f64, p0: f64, eps: f64, t: f64) -> Result<PhaseSpaceDensity> {
    let (s, c) = t.sin_cos();
    let (xt, pt) = (x0 * c + p0 * s, -x0 * s + p0 * c);
    let (x, p) = (grid.x.nodes(), grid.p.nodes());
    let norm = 1.0 / (std::f64::consts::PI * eps);
    let v = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        norm * (-((x[i] - xt).powi(2) + (p[j] - pt).powi(2)) / eps).exp()
    });
    PhaseSpaceDensity::from_grid(grid.clone(), v, DensityKind::Wigner)
}

struct Trace {
    rows: Vec<(f64, f64, f64)>,
    warnings: Vec<String>,
}

fn trace_one(cfg: &ExperimentConfig, pot: &PotentialSpec, eps: f64) -> Result<Trace> {
    let [x0, p0] = cfg.datum_center;
    let grid = PositionGrid::centered(cfg.grid_points, cfg.half_width)?;
    let mut psi = coherent_state(x0, p0, eps, &grid)?;
    let times = cfg.times();
    let mut rows = Vec::with_capacity(times.len());
    let mut warnings = Vec::new();
    let mut now = 0.0;
    for &t in &times {
        if t > now {
            let step = propagate(&psi, pot, &PropagatorConfig::new(cfg.dt, t - now))?;
            warnings.extend(step.warnings);
            psi = step.state;
            now = t;
        }
        let w = wigner(&psi)?;
        let exact = rotated_gaussian(w.grid().expect("grid"), x0, p0, eps, t)?;
        let err = l2_distance(&w, &exact)?;
        rows.push((t, err, err / l2_norm(&exact)?));
    }
    warnings.dedup();
    Ok(Trace { rows, warnings })
}

pub fn run_harmonic_exact(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::start(cfg);
    let pot = cfg.potential_or(PotentialSpec::Harmonic);
    if pot != PotentialSpec::Harmonic {
        m.warn(format!("exact reference assumes the harmonic potential, got {}", pot.name()));
    }
    let traces: Vec<Result<Trace>> = cfg.eps_ladder.par_iter().map(|&e| trace_one(cfg, &pot, e)).collect();
    let mut table = Table::new("harmonic_error", &["eps", "t", "l2_error", "relative_error"]);
    let mut worst = 0.0f64;
    for (&eps, trace) in cfg.eps_ladder.iter().zip(traces) {
        let trace = trace?;
        for w in trace.warnings {
            m.warn(w);
        }
        let max_abs = trace.rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let max_rel = trace.rows.iter().map(|r| r.2).fold(0.0, f64::max);
        worst = worst.max(max_abs);
        for (t, a, r) in trace.rows {
            table.push(vec![eps, t, a, r]);
        }
        m.records.push(
            Record::new(format!("eps={eps}"), Some(eps))
                .with("max_l2_error", max_abs)
                .with("max_relative_error", max_rel),
        );
    }
    m.add_table(table);
    m.check(
        "exact_rotation",
        worst < HARMONIC_TOLERANCE,
        format!("max L² error {worst:.3e} (tolerance {HARMONIC_TOLERANCE:e})"),
    );
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(ExperimentKind::HarmonicExact);
        c.eps_ladder = vec![0.1];
        c.grid_points = 256;
        c.half_width = 6.0;
        c.sample_times = 2;
        c
    }

    #[test]
    fn meets_tolerance_on_a_small_grid() {
        let m = run_harmonic_exact(&small()).unwrap();
        assert!(m.passed(), "{:?}", m.assertions);
        assert_eq!(m.table("harmonic_error").unwrap().rows.len(), 3);
    }

    #[test]
    fn halving_dt_quarters_the_splitting_error() {
        // a coarse step so the splitting error dominates rounding
        let mut c = small();
        c.sample_times = 1;
        c.dt = 0.1;
        let coarse = run_harmonic_exact(&c).unwrap().records[0].get("max_l2_error").unwrap();
        c.dt = 0.05;
        let fine = run_harmonic_exact(&c).unwrap().records[0].get("max_l2_error").unwrap();
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn full_period_returns_to_the_start() {
        let mut c = small();
        c.t_final = 2.0 * std::f64::consts::PI;
        c.sample_times = 1;
        c.dt = 2.0 * std::f64::consts::PI / 2000.0;
        let m = run_harmonic_exact(&c).unwrap();
        let t = m.table("harmonic_error").unwrap();
        let last = t.rows.last().unwrap();
        assert!(last[2] < HARMONIC_TOLERANCE, "{last:?}");
    }
}
