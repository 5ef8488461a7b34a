//! Randomly centered coherent states against the particles they start on.

use rayon::prelude::*;

use crate::classical::{integrate_in_field, ForceField};
use crate::error::{config, Result};
use crate::grid::PositionGrid;
use crate::initial_data::{check_epsn_operator_bound, sample_random_family, RandomFamilySpec, EDGE_SIGMAS};
use crate::metrics::{weak_distance, WeakMetricConfig};
use crate::phase_space::{PhaseSpaceDensity, PureStateTransform};
use crate::potential::PotentialSpec;
use crate::quantum::{propagate, PropagatorConfig, WaveFunction};

use super::{strictly_decreasing, ExperimentConfig, Record, RunManifest, Table};

/// Headroom of the momentum window over the largest momentum reached.
const WINDOW_HEADROOM: f64 = 1.3;
const BOX_MARGIN: f64 = 1.0;

/// Outermost points with `V(x) = energy` on each side of the origin.
fn turning_points(pot: &PotentialSpec, energy: f64) -> Result<(f64, f64)> {
    let side = |dir: f64| -> Result<f64> {
        let mut hi = 1.0;
        while pot.value(dir * hi) < energy {
            hi *= 2.0;
            if hi > 1e4 {
                return config(format!("{} does not confine energy {energy}", pot.name()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pot.value(dir * mid) < energy {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(dir * hi)
    };
    Ok((side(-1.0)?, side(1.0)?))
}

/// Position grid holding every orbit with energy up to `energy` and
/// resolving its largest momentum in the Wigner window.
pub(crate) fn orbit_grid(pot: &PotentialSpec, energy: f64, eps: f64, min_points: usize) -> Result<PositionGrid> {
    let (a, b) = turning_points(pot, energy)?;
    let pad = EDGE_SIGMAS * (eps / 2.0).sqrt();
    let half = a.abs().max(b.abs()) + pad + BOX_MARGIN;
    let v_min = (0..=2000)
        .map(|i| pot.value(-half + 2.0 * half * i as f64 / 2000.0))
        .fold(f64::INFINITY, f64::min);
    let p_max = (2.0 * (energy - v_min)).max(0.0).sqrt();
    // window ε π / (2 dx) ≥ headroom (p_max + pad)
    let dx = eps * std::f64::consts::PI / (2.0 * WINDOW_HEADROOM * (p_max + pad));
    let n = ((2.0 * half / dx).ceil() as usize).next_power_of_two().max(min_points);
    PositionGrid::centered(n, half)
}

struct EpsResult {
    /// `sup_t` distance per sample.
    sup: Vec<f64>,
    /// Ratio for the law's own mixture.
    bound_ratio: f64,
    /// Ratio for the equal-weight mixture of the drawn samples, which is at
    /// least `1/(Mε)`.
    sample_ratio: f64,
    grid_points: usize,
    warnings: Vec<String>,
}

fn sample_sup(
    state: &WaveFunction,
    point: [f64; 2],
    pot: &PotentialSpec,
    field: &ForceField,
    cfg: &ExperimentConfig,
    times: &[f64],
) -> Result<(f64, Vec<String>)> {
    let metric = WeakMetricConfig::default();
    let (mut psi, mut x, mut p, mut now) = (state.clone(), point[0], point[1], 0.0);
    let mut sup = 0.0f64;
    let mut warnings = Vec::new();
    for &t in times {
        if t > now {
            let step = propagate(&psi, pot, &PropagatorConfig::new(cfg.dt, t - now))?;
            warnings.extend(step.warnings);
            psi = step.state;
            (x, p) = integrate_in_field(x, p, field, cfg.dt, t - now, usize::MAX)?.last();
            now = t;
        }
        let d = weak_distance(&PureStateTransform::husimi(&psi), &PhaseSpaceDensity::dirac(x, p), &metric)?;
        sup = sup.max(d);
    }
    Ok((sup, warnings))
}

fn run_eps(cfg: &ExperimentConfig, pot: &PotentialSpec, spec: &RandomFamilySpec, eps: f64) -> Result<EpsResult> {
    let points: Vec<[f64; 2]> = (0..spec.samples).map(|i| crate::initial_data::sample_point(spec, i)).collect();
    let energy = points
        .iter()
        .map(|w| w[1] * w[1] / 2.0 + pot.value(w[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    let grid = orbit_grid(pot, energy, eps, cfg.grid_points)?;
    let family = sample_random_family(spec, eps, &grid)?;
    let weight = 1.0 / family.len() as f64;
    let weighted: Vec<(f64, WaveFunction)> = family.iter().map(|m| (weight, m.state.clone())).collect();
    let sample_ratio = check_epsn_operator_bound(&weighted, eps)?;
    let field = ForceField::mollified_auto(pot, eps, grid.x_min(), grid.x_max())?;
    let times = cfg.times();
    let per_sample: Vec<Result<(f64, Vec<String>)>> = family
        .par_iter()
        .map(|m| sample_sup(&m.state, m.point, pot, &field, cfg, &times))
        .collect();
    let mut sup = Vec::with_capacity(per_sample.len());
    let mut warnings: Vec<String> = Vec::new();
    for r in per_sample {
        let (s, w) = r?;
        sup.push(s);
        for x in w {
            if !warnings.contains(&x) {
                warnings.push(x);
            }
        }
    }
    Ok(EpsResult {
        sup,
        bound_ratio: spec.law.operator_bound_ratio(eps),
        sample_ratio,
        grid_points: grid.len(),
        warnings,
    })
}

pub fn run_random_family(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::start(cfg);
    let pot = cfg.potential_or(PotentialSpec::Anharmonic {
        quadratic: 1.0,
        quartic: 0.05,
    });
    let spec = RandomFamilySpec {
        law: cfg.law,
        samples: cfg.samples,
        seed: cfg.seed,
    };
    let results: Vec<Result<EpsResult>> = cfg.eps_ladder.iter().map(|&e| run_eps(cfg, &pot, &spec, e)).collect();
    let mut per_sample = Table::new("random_family_samples", &["eps", "sample", "x0", "p0", "sup_distance"]);
    let mut summary = Table::new("random_family_average", &["eps", "mean_sup_distance", "bound_ratio", "sample_bound_ratio"]);
    let mut means = Vec::new();
    for (&eps, r) in cfg.eps_ladder.iter().zip(results) {
        let r = r?;
        for w in &r.warnings {
            m.warn(format!("ε = {eps}: {w}"));
        }
        if r.bound_ratio > 1.0 {
            m.warn(format!(
                "ε = {eps}: operator bound ratio {:.3} of the law exceeds 1; the family is outside the ε^n Id regime",
                r.bound_ratio
            ));
        }
        for (i, s) in r.sup.iter().enumerate() {
            let w = crate::initial_data::sample_point(&spec, i);
            per_sample.push(vec![eps, i as f64, w[0], w[1], *s]);
        }
        let mean = r.sup.iter().sum::<f64>() / r.sup.len() as f64;
        summary.push(vec![eps, mean, r.bound_ratio, r.sample_ratio]);
        m.records.push(
            Record::new(format!("eps={eps}"), Some(eps))
                .with("mean_sup_distance", mean)
                .with("bound_ratio", r.bound_ratio)
                .with("sample_bound_ratio", r.sample_ratio)
                .with("grid_points", r.grid_points as f64),
        );
        means.push(mean);
    }
    m.add_table(per_sample);
    m.add_table(summary);
    m.check(
        "average_decreasing",
        strictly_decreasing(&means),
        format!("mean sup-over-t distances {means:?}"),
    );
    Ok(m)
}
