//! Distances between phase-space measures and log-log rate fits.
//!
//! The weak distance compares characteristic functions under a Gaussian
//! frequency weight,
//!
//! ```text
//! d(μ, ν) = ∫ |μ̂(ξ, η) - ν̂(ξ, η)| e^{-(ξ² + η²)/(2σ²)} dξ dη,
//! ```
//!
//! truncated to `|ξ|, |η| ≤ cutoff`. Both sides are normalized to unit mass
//! first. The weight is integrable and `|μ̂| ≤ 1`, so `d ≤ 2 ∫ weight`, and it
//! metrizes weak convergence of probability measures.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::phase_space::{Characteristic, PhaseSpaceDensity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakMetricConfig {
    pub sigma: f64,
    pub cutoff: f64,
    /// Quadrature nodes per frequency axis; odd so that zero is a node.
    pub nodes: usize,
}

impl Default for WeakMetricConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            cutoff: 8.0,
            nodes: 65,
        }
    }
}

impl WeakMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.cutoff > 0.0) {
            return config("weak metric needs positive σ and cutoff");
        }
        if self.nodes < 3 || self.nodes.is_multiple_of(2) {
            return config(format!("node count must be odd and at least 3, got {}", self.nodes));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let h = self.spacing();
        let half = (self.nodes / 2) as f64;
        (0..self.nodes).map(|i| (i as f64 - half) * h).collect()
    }

    fn spacing(&self) -> f64 {
        2.0 * self.cutoff / (self.nodes - 1) as f64
    }

    /// Quadrature weights `h² e^{-(ξ²+η²)/(2σ²)}`.
    pub fn weights(&self) -> Array2<f64> {
        let f = self.frequencies();
        let h2 = self.spacing().powi(2);
        let s2 = 2.0 * self.sigma * self.sigma;
        Array2::from_shape_fn((self.nodes, self.nodes), |(a, b)| h2 * (-(f[a] * f[a] + f[b] * f[b]) / s2).exp())
    }

    /// `∫ weight`, close to `2πσ²` for the default cutoff.
    pub fn weight_mass(&self) -> f64 {
        self.weights().sum()
    }

    /// Upper bound of the distance.
    pub fn bound(&self) -> f64 {
        2.0 * self.weight_mass()
    }
}

/// Mass-normalized characteristic function on the metric's frequency grid.
#[derive(Debug, Clone)]
pub struct CharacteristicSample {
    values: Array2<Complex64>,
    raw_mass: f64,
}

impl CharacteristicSample {
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }
}

pub fn sample_characteristic<C: Characteristic + ?Sized>(
    measure: &C,
    cfg: &WeakMetricConfig,
) -> Result<CharacteristicSample> {
    cfg.validate()?;
    let mass = measure.mass();
    if !(mass.abs() > 1e-300) || !mass.is_finite() {
        return Err(Error::Numerical(format!("cannot normalize a measure of mass {mass}")));
    }
    let f = cfg.frequencies();
    let mut values = measure.characteristic(&f, &f)?;
    values.mapv_inplace(|z| z / mass);
    Ok(CharacteristicSample { values, raw_mass: mass })
}

pub fn sample_distance(a: &CharacteristicSample, b: &CharacteristicSample, cfg: &WeakMetricConfig) -> Result<f64> {
    if a.values.dim() != b.values.dim() || a.values.nrows() != cfg.nodes {
        return Err(Error::Shape {
            expected: cfg.nodes * cfg.nodes,
            found: b.values.len(),
        });
    }
    let w = cfg.weights();
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .zip(w.iter())
        .map(|((x, y), w)| (x - y).norm() * w)
        .sum())
}

pub fn weak_distance<A, B>(mu: &A, nu: &B, cfg: &WeakMetricConfig) -> Result<f64>
where
    A: Characteristic + ?Sized,
    B: Characteristic + ?Sized,
{
    let a = sample_characteristic(mu, cfg)?;
    let b = sample_characteristic(nu, cfg)?;
    log::debug!("weak distance between masses {} and {}", a.raw_mass, b.raw_mass);
    sample_distance(&a, &b, cfg)
}

pub fn l2_distance(a: &PhaseSpaceDensity, b: &PhaseSpaceDensity) -> Result<f64> {
    let (ga, va) = a.grid_parts()?;
    let (gb, vb) = b.grid_parts()?;
    if !ga.same_as(gb) {
        return Err(Error::GridMismatch("L² distance needs a shared phase grid".into()));
    }
    Ok((va.iter().zip(vb.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * ga.cell_area()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub eps_values: Vec<f64>,
    pub distances: Vec<f64>,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Ladder points left out of the fit.
    pub dropped: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `log d = slope · log ε + c`.
pub fn fit_rate(eps_values: &[f64], distances: &[f64]) -> Result<RateFit> {
    if eps_values.len() != distances.len() {
        return Err(Error::Shape {
            expected: eps_values.len(),
            found: distances.len(),
        });
    }
    if eps_values.len() < 3 {
        return config("rate fit needs at least three ladder points");
    }
    if eps_values.iter().any(|e| !(*e > 0.0)) || eps_values.windows(2).any(|w| w[1] >= w[0]) {
        return config("ε ladder must be positive and strictly decreasing");
    }
    let mut warnings = Vec::new();
    let mut dropped = Vec::new();
    let mut pts = Vec::new();
    for (&e, &d) in eps_values.iter().zip(distances) {
        if d > 0.0 && d.is_finite() {
            pts.push((e.ln(), d.ln()));
        } else {
            warnings.push(format!("dropped ladder point ε = {e}: distance {d} is not positive"));
            dropped.push(e);
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    if pts.len() < 3 {
        return Err(Error::Convergence(format!(
            "only {} usable ladder points remain",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a perfectly flat ladder is explained exactly by the constant fit
    let r_squared = if syy <= 1e-300 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        eps_values: eps_values.to_vec(),
        distances: distances.to_vec(),
        fitted_slope: slope,
        intercept,
        r_squared,
        dropped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_position_grid;
    use crate::initial_data::coherent_state;
    use crate::phase_space::{wigner, Atom, DensityKind, PureStateTransform};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn gaussian_density(x0: f64, p0: f64, s2: f64, n: usize, half: f64) -> PhaseSpaceDensity {
        let x = build_position_grid(n, -half, half).unwrap();
        let pg = crate::grid::PhaseGrid::new(x.clone(), x);
        let v = Array2::from_shape_fn(pg.shape(), |(i, j)| {
            let (a, b) = (pg.x.node(i) - x0, pg.p.node(j) - p0);
            (-(a * a + b * b) / (2.0 * s2)).exp() / (2.0 * PI * s2)
        });
        PhaseSpaceDensity::from_grid(pg, v, DensityKind::Classical).unwrap()
    }

    #[test]
    fn identical_inputs_have_zero_distance() {
        let g = gaussian_density(0.3, -0.2, 0.2, 128, 6.0);
        assert!(weak_distance(&g, &g, &WeakMetricConfig::default()).unwrap() < 1e-12);
        let zero = g.scaled(0.0);
        assert!(weak_distance(&zero, &g, &WeakMetricConfig::default()).is_err());
    }

    #[test]
    fn dirac_pair_matches_one_dimensional_oracle() {
        // |1 - e^{-iξa}| = 2|sin(ξa/2)| is independent of η, so the distance
        // factorizes into a 1-D sum times the η weight
        let cfg = WeakMetricConfig::default();
        let f = cfg.frequencies();
        let h = f[1] - f[0];
        let eta_mass: f64 = f.iter().map(|e| h * (-e * e / 2.0).exp()).sum();
        let origin = PhaseSpaceDensity::dirac(0.0, 0.0);
        let mut last = 0.0;
        for a in [0.05, 0.1, 0.3, 0.6, 1.0, 2.0, 4.0] {
            let d = weak_distance(&origin, &PhaseSpaceDensity::dirac(a, 0.0), &cfg).unwrap();
            let oracle: f64 = f
                .iter()
                .map(|x| h * 2.0 * (x * a / 2.0).sin().abs() * (-x * x / 2.0).exp())
                .sum::<f64>()
                * eta_mass;
            assert!((d - oracle).abs() < 1e-10 * oracle);
            assert!(d > last);
            assert!(d < cfg.bound());
            last = d;
        }
        // the asymptote: mean of 2|sin| is 4/π, below the crude bound of 2
        let far = weak_distance(&origin, &PhaseSpaceDensity::dirac(40.0, 0.0), &cfg).unwrap();
        assert!((far / cfg.weight_mass() - 4.0 / PI).abs() < 0.05);
    }

    #[test]
    fn sampled_atoms_approach_density() {
        let s2 = 0.3;
        let g = gaussian_density(0.0, 0.0, s2, 256, 8.0);
        let cfg = WeakMetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, s2.sqrt()).unwrap();
        let mut dists = Vec::new();
        for count in [100, 1000, 10_000] {
            let atoms: Vec<Atom> = (0..count)
                .map(|_| Atom {
                    mass: 1.0 / count as f64,
                    x: n.sample(&mut rng),
                    p: n.sample(&mut rng),
                })
                .collect();
            let d = weak_distance(&g, &PhaseSpaceDensity::from_atoms(atoms).unwrap(), &cfg).unwrap();
            dists.push(d);
        }
        assert!(dists[0] > dists[1] && dists[1] > dists[2], "{dists:?}");
        assert!(dists[2] < 0.05 * cfg.weight_mass(), "{dists:?}");
    }

    #[test]
    fn translation_continuity() {
        let cfg = WeakMetricConfig::default();
        let base = gaussian_density(0.0, 0.0, 0.1, 256, 6.0);
        let mut last = 0.0;
        for h in [0.0, 0.01, 0.05, 0.2, 0.5] {
            let shifted = gaussian_density(h, 0.0, 0.1, 256, 6.0);
            let d = weak_distance(&base, &shifted, &cfg).unwrap();
            assert!(d >= last);
            if h == 0.0 {
                assert!(d < 1e-12);
            } else {
                assert!(d > 0.0);
            }
            last = d;
        }
    }

    #[test]
    fn coherent_husimi_concentrates_on_its_point() {
        let g = build_position_grid(1024, -8.0, 8.0).unwrap();
        let cfg = WeakMetricConfig::default();
        let target = PhaseSpaceDensity::dirac(1.0, -0.5);
        let mut last = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let psi = coherent_state(1.0, -0.5, eps, &g).unwrap();
            let d = weak_distance(&PureStateTransform::husimi(&psi), &target, &cfg).unwrap();
            // Gaussian of variance 5ε/2 per axis against its centre:
            // oracle ∫ (1 - e^{-5ε|ζ|²/4}) weight
            let f = cfg.frequencies();
            let h = f[1] - f[0];
            let mut oracle = 0.0;
            for a in &f {
                for b in &f {
                    let r2 = a * a + b * b;
                    oracle += h * h * (1.0 - (-1.25 * eps * r2).exp()) * (-r2 / 2.0).exp();
                }
            }
            assert!((d - oracle).abs() < 1e-8, "{d} {oracle}");
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn grid_and_state_characteristics_agree() {
        let g = build_position_grid(512, -8.0, 8.0).unwrap();
        let psi = coherent_state(-1.0, 0.4, 0.1, &g).unwrap();
        let w = wigner(&psi).unwrap();
        let d = weak_distance(&w, &PureStateTransform::wigner(&psi), &WeakMetricConfig::default()).unwrap();
        assert!(d < 1e-9);
    }

    #[test]
    fn l2_examples() {
        let a = gaussian_density(-3.0, 0.0, 0.1, 256, 8.0);
        let b = gaussian_density(3.0, 0.0, 0.1, 256, 8.0);
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        let na = crate::phase_space::l2_norm(&a).unwrap();
        let nb = crate::phase_space::l2_norm(&b).unwrap();
        assert!((l2_distance(&a, &a.scaled(0.0)).unwrap() - na).abs() < 1e-14);
        assert!((l2_distance(&a, &b).unwrap() - (na * na + nb * nb).sqrt()).abs() < 1e-12);
        let other = gaussian_density(3.0, 0.0, 0.1, 128, 8.0);
        assert!(matches!(l2_distance(&a, &other), Err(Error::GridMismatch(_))));
        assert!(matches!(
            l2_distance(&a, &PhaseSpaceDensity::dirac(0.0, 0.0)),
            Err(Error::UnsupportedRepresentation(_))
        ));
    }

    #[test]
    fn rate_fit_examples() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let lin: Vec<f64> = eps.iter().map(|e| 3.0 * e).collect();
        let f = fit_rate(&eps, &lin).unwrap();
        assert!((f.fitted_slope - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let noise = [0.03, -0.05, 0.01, 0.04];
        let sq: Vec<f64> = eps.iter().zip(noise).map(|(e, n)| 2.0 * e.sqrt() * (1.0 + n)).collect();
        assert!((fit_rate(&eps, &sq).unwrap().fitted_slope - 0.5).abs() < 0.05);

        let flat = fit_rate(&eps, &[0.7; 4]).unwrap();
        assert!(flat.fitted_slope.abs() < 1e-12);

        let with_zero = fit_rate(&eps, &[0.4, 0.2, 0.0, 0.05]).unwrap();
        assert_eq!(with_zero.dropped, vec![0.05]);
        assert_eq!(with_zero.warnings.len(), 1);
        assert!(fit_rate(&eps, &[0.4, -1.0, 0.0, 0.05]).is_err());
        assert!(fit_rate(&[0.1, 0.2, 0.05], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_rate(&[0.1, 0.05], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn l2_triangle_inequality(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, 1.0).unwrap();
            let x = build_position_grid(16, -2.0, 2.0).unwrap();
            let pg = crate::grid::PhaseGrid::new(x.clone(), x);
            let mut make = || {
                let v = Array2::from_shape_fn((16, 16), |_| n.sample(&mut rng));
                PhaseSpaceDensity::from_grid(pg.clone(), v, DensityKind::Classical).unwrap()
            };
            let (a, b, c) = (make(), make(), make());
            let ab = l2_distance(&a, &b).unwrap();
            let bc = l2_distance(&b, &c).unwrap();
            let ac = l2_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - l2_distance(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn weak_distance_is_symmetric_and_bounded(
            x1 in -3.0f64..3.0, p1 in -3.0f64..3.0, x2 in -3.0f64..3.0, p2 in -3.0f64..3.0, m in 0.1f64..0.9,
        ) {
            let cfg = WeakMetricConfig { nodes: 33, ..Default::default() };
            let mu = PhaseSpaceDensity::from_atoms(vec![
                Atom { mass: m, x: x1, p: p1 },
                Atom { mass: 1.0 - m, x: x2, p: p2 },
            ]).unwrap();
            let nu = PhaseSpaceDensity::dirac(x2, p1);
            let d1 = weak_distance(&mu, &nu, &cfg).unwrap();
            let d2 = weak_distance(&nu, &mu, &cfg).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!(d1 <= cfg.bound());
            let o = PhaseSpaceDensity::dirac(0.0, 0.0);
            let via = weak_distance(&mu, &o, &cfg).unwrap() + weak_distance(&o, &nu, &cfg).unwrap();
            prop_assert!(d1 <= via + 1e-12);
        }
    }
}
