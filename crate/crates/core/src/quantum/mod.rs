//! ε-scaled quantum propagation, `iε ∂t ψ = (-α ε² Δ + V) ψ`.
//!
//! Pure states and finite ensembles use Strang split-step on a
//! [`PositionGrid`]. Smooth mixed states can also be evolved directly in the
//! Wigner representation, see [`wigner_flow`].

mod checkpoint;
pub mod wigner_flow;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use wigner_flow::propagate_wigner;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Error, Result};
use crate::grid::PositionGrid;
use crate::potential::{evaluate, PotentialSpec};

/// A normalized state on a grid, with the semiclassical parameter it lives at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveFunction {
    grid: PositionGrid,
    values: Vec<Complex64>,
    eps: f64,
}

pub const NORM_TOLERANCE: f64 = 1e-9;

impl WaveFunction {
    /// Wraps already-normalized samples.
    pub fn new(grid: PositionGrid, values: Vec<Complex64>, eps: f64) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if !(eps > 0.0) {
            return config(format!("ε must be positive, got {eps}"));
        }
        let state = Self { grid, values, eps };
        let n = state.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return config(format!("state is not normalized: ‖ψ‖² = {n}"));
        }
        Ok(state)
    }

    /// Rescales arbitrary non-zero samples to unit norm.
    pub fn normalized(grid: PositionGrid, mut values: Vec<Complex64>, eps: f64) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        let n: f64 = values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero or non-finite state".into()));
        }
        let s = 1.0 / n.sqrt();
        values.iter_mut().for_each(|z| *z *= s);
        Self::new(grid, values, eps)
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨self|other⟩ = ∫ conj(ψ) φ dx`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("inner product across grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx())
    }

    /// Position reflection `ψ(x) → ψ(-x)` on a symmetric grid: node `i` maps
    /// to node `n - i` (node 0, at the boundary, maps to itself).
    pub fn reflected(&self) -> Result<Self> {
        let n = self.grid.len();
        if (self.grid.x_min() + self.grid.x_max()).abs() > 1e-12 * self.grid.extent() {
            return config("reflection needs a grid symmetric about zero");
        }
        let values = (0..n).map(|i| self.values[(n - i) % n]).collect();
        Self::normalized(self.grid.clone(), values, self.eps)
    }

    /// Fraction of `|ψ̂|²` above the given wavenumber.
    pub fn spectral_weight_above(&self, k_cut: f64) -> f64 {
        let spec = self.grid.dft_forward(&self.values).expect("length checked at construction");
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let above: f64 = spec
            .iter()
            .zip(self.grid.frequencies())
            .filter(|(_, k)| k.abs() > k_cut)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        above / total
    }

    /// Probability within `margin` of either end of the periodic box.
    pub fn boundary_weight(&self, margin: f64) -> f64 {
        let lo = self.grid.x_min() + margin;
        let hi = self.grid.x_max() - margin;
        self.grid
            .nodes()
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| **x < lo || **x > hi)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("NaN or infinity in wave function".into()))
        }
    }
}

/// Finite mixture `D = Σ w_k |ψ_k⟩⟨ψ_k|` with `Σ w_k = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityEnsemble {
    members: Vec<(f64, WaveFunction)>,
    eps: f64,
}

impl DensityEnsemble {
    pub fn new(members: Vec<(f64, WaveFunction)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return config("ensemble needs at least one member");
        };
        let eps = first.eps();
        let grid = first.grid().clone();
        let mut total = 0.0;
        for (w, s) in &members {
            if !(*w > 0.0 && *w <= 1.0) {
                return config(format!("ensemble weight {w} outside (0, 1]"));
            }
            if s.eps() != eps || !s.grid().same_as(&grid) {
                return config("ensemble members must share grid and ε");
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return config(format!("ensemble weights sum to {total}, not 1"));
        }
        Ok(Self { members, eps })
    }

    /// Builds an ensemble from positive weights of any total, renormalizing.
    pub fn from_unnormalized(members: Vec<(f64, WaveFunction)>) -> Result<Self> {
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) {
            return config("ensemble weights must have positive sum");
        }
        Self::new(members.into_iter().map(|(w, s)| (w / total, s)).collect())
    }

    pub fn pure(state: WaveFunction) -> Self {
        let eps = state.eps();
        Self {
            members: vec![(1.0, state)],
            eps,
        }
    }

    pub fn members(&self) -> &[(f64, WaveFunction)] {
        &self.members
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> &PositionGrid {
        self.members[0].1.grid()
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|(w, _)| w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    #[default]
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// Time step. A negative value runs the evolution backwards in time.
    pub dt: f64,
    /// Kinetic prefactor: the Hamiltonian is `-α ε² Δ + V`.
    pub alpha: f64,
    pub scheme: Scheme,
    /// Duration of the evolution, `≥ 0`.
    pub t_final: f64,
}

impl PropagatorConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            alpha: 0.5,
            scheme: Scheme::Strang,
            t_final,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return config(format!("time step must be finite and non-zero, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return config(format!("t_final must be non-negative, got {}", self.t_final));
        }
        if !(self.alpha > 0.0) {
            return config("kinetic prefactor must be positive");
        }
        Ok(())
    }

    /// Number of steps and the signed step actually used so that the steps
    /// land exactly on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_final / self.dt.abs() - 1e-9).ceil().max(1.0) as usize;
        (n, self.dt.signum() * self.t_final / n as f64)
    }

    pub fn hash(&self) -> String {
        crate::hash_json(self)
    }
}

/// Result of a propagation: the final state plus resolution diagnostics.
#[derive(Debug, Clone)]
pub struct Propagation<T> {
    pub state: T,
    pub steps: usize,
    pub warnings: Vec<String>,
}

const PHASE_LIMIT: f64 = PI / 4.0;

pub(crate) fn resolution_warnings(
    potential: &[f64],
    grid: &PositionGrid,
    eps: f64,
    alpha: f64,
    h: f64,
) -> Vec<String> {
    let (lo, hi) = potential
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| (l.min(v), u.max(v)));
    let mut out = Vec::new();
    let pot_phase = (hi - lo) * h.abs() / eps;
    if pot_phase > PHASE_LIMIT {
        out.push(format!(
            "potential phase per step {pot_phase:.3} exceeds π/4 (dt = {h:.3e}, ε = {eps})"
        ));
    }
    let kin_phase = alpha * eps * grid.nyquist().powi(2) * h.abs();
    if kin_phase > PHASE_LIMIT {
        out.push(format!(
            "kinetic phase at Nyquist {kin_phase:.3} exceeds π/4 (dt = {h:.3e}, ε = {eps})"
        ));
    }
    out
}

/// Strang split-step `e^{-iV h/2ε} e^{-iαε k² h} e^{-iV h/2ε}`, iterated to
/// `cfg.t_final`.
pub fn propagate(
    state: &WaveFunction,
    pot: &PotentialSpec,
    cfg: &PropagatorConfig,
) -> Result<Propagation<WaveFunction>> {
    cfg.validate()?;
    let grid = state.grid();
    let v = evaluate(pot, grid)?;
    let (steps, h) = cfg.steps();
    let warnings = resolution_warnings(&v, grid, state.eps(), cfg.alpha, h);
    if steps == 0 {
        return Ok(Propagation {
            state: state.clone(),
            steps,
            warnings,
        });
    }
    let values = split_step(state.values(), &v, grid, state.eps(), cfg.alpha, h, steps);
    let out = WaveFunction {
        grid: grid.clone(),
        values,
        eps: state.eps(),
    };
    out.check_finite()?;
    Ok(Propagation {
        state: out,
        steps,
        warnings,
    })
}

fn split_step(
    psi0: &[Complex64],
    v: &[f64],
    grid: &PositionGrid,
    eps: f64,
    alpha: f64,
    h: f64,
    steps: usize,
) -> Vec<Complex64> {
    let n = grid.len();
    let half: Vec<Complex64> = v.iter().map(|&x| Complex64::from_polar(1.0, -x * h / (2.0 * eps))).collect();
    let full: Vec<Complex64> = v.iter().map(|&x| Complex64::from_polar(1.0, -x * h / eps)).collect();
    let inv_n = 1.0 / n as f64;
    let kinetic: Vec<Complex64> = grid
        .frequencies()
        .iter()
        .map(|&k| Complex64::from_polar(inv_n, -alpha * eps * k * k * h))
        .collect();

    let mut psi: Vec<Complex64> = psi0.iter().zip(&half).map(|(a, b)| a * b).collect();
    for step in 0..steps {
        grid.fft_forward_raw(&mut psi);
        psi.iter_mut().zip(&kinetic).for_each(|(a, b)| *a *= b);
        grid.fft_inverse_raw(&mut psi);
        let factor = if step + 1 == steps { &half } else { &full };
        psi.iter_mut().zip(factor).for_each(|(a, b)| *a *= b);
    }
    psi
}

/// Propagates every member independently; weights are untouched.
pub fn propagate_ensemble(
    ensemble: &DensityEnsemble,
    pot: &PotentialSpec,
    cfg: &PropagatorConfig,
) -> Result<Propagation<DensityEnsemble>> {
    let results: Vec<Result<(f64, Propagation<WaveFunction>)>> = ensemble
        .members()
        .par_iter()
        .map(|(w, s)| propagate(s, pot, cfg).map(|p| (*w, p)))
        .collect();
    let mut members = Vec::with_capacity(results.len());
    let mut warnings: Vec<String> = Vec::new();
    let mut steps = 0;
    for r in results {
        let (w, p) = r?;
        for msg in p.warnings {
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        steps = p.steps;
        members.push((w, p.state));
    }
    Ok(Propagation {
        state: DensityEnsemble {
            members,
            eps: ensemble.eps(),
        },
        steps,
        warnings,
    })
}

/// `H_ε ψ` with the kinetic part applied spectrally.
pub fn apply_hamiltonian(state: &WaveFunction, pot: &PotentialSpec, alpha: f64) -> Result<Vec<Complex64>> {
    let grid = state.grid();
    let v = evaluate(pot, grid)?;
    let eps = state.eps();
    let mut buf = state.values().to_vec();
    grid.fft_forward_raw(&mut buf);
    let inv_n = 1.0 / grid.len() as f64;
    for (z, k) in buf.iter_mut().zip(grid.frequencies()) {
        *z *= alpha * eps * eps * k * k * inv_n;
    }
    grid.fft_inverse_raw(&mut buf);
    Ok(buf
        .iter()
        .zip(state.values())
        .zip(&v)
        .map(|((kin, psi), vi)| kin + psi * vi)
        .collect())
}

/// `‖H_ε ψ‖²`, the quantity bounded uniformly in ε by the initial-data
/// assumptions.
pub fn h2_energy(state: &WaveFunction, pot: &PotentialSpec) -> Result<f64> {
    h2_energy_with(state, pot, 0.5)
}

pub fn h2_energy_with(state: &WaveFunction, pot: &PotentialSpec, alpha: f64) -> Result<f64> {
    let h = apply_hamiltonian(state, pot, alpha)?;
    Ok(h.iter().map(|z| z.norm_sqr()).sum::<f64>() * state.grid().dx())
}

/// `⟨ψ|H_ε|ψ⟩`.
pub fn energy(state: &WaveFunction, pot: &PotentialSpec, alpha: f64) -> Result<f64> {
    let h = apply_hamiltonian(state, pot, alpha)?;
    Ok((state
        .values()
        .iter()
        .zip(&h)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        * state.grid().dx())
    .re)
}

/// Position and momentum expectations `(⟨x⟩, ⟨p⟩)` with `p = -iε ∂x`.
pub fn phase_center(state: &WaveFunction) -> (f64, f64) {
    let grid = state.grid();
    let dx = grid.dx();
    let x: f64 = grid
        .nodes()
        .iter()
        .zip(state.values())
        .map(|(x, z)| x * z.norm_sqr())
        .sum::<f64>()
        * dx;
    let spec = grid.dft_forward(state.values()).expect("length checked at construction");
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    let k: f64 = spec
        .iter()
        .zip(grid.frequencies())
        .map(|(z, k)| k * z.norm_sqr())
        .sum::<f64>()
        / total;
    (x, state.eps() * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_position_grid;
    use crate::initial_data::coherent_state;

    fn l2_diff(a: &WaveFunction, b: &WaveFunction) -> f64 {
        (a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            * a.grid().dx())
        .sqrt()
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = build_position_grid(64, -4.0, 4.0).unwrap();
        let v = vec![Complex64::new(1.0, 0.0); 64];
        assert!(WaveFunction::new(g.clone(), v.clone(), 0.1).is_err());
        assert!(WaveFunction::normalized(g.clone(), v.clone(), 0.0).is_err());
        assert!(WaveFunction::normalized(g.clone(), vec![Complex64::new(0.0, 0.0); 64], 0.1).is_err());
        let psi = WaveFunction::normalized(g, v, 0.1).unwrap();
        assert!(propagate(&psi, &PotentialSpec::Free, &PropagatorConfig::new(0.0, 1.0)).is_err());
        assert!(propagate(&psi, &PotentialSpec::Free, &PropagatorConfig::new(0.1, -1.0)).is_err());
    }

    #[test]
    fn free_packet_moves_at_group_velocity() {
        // analytic free Gaussian: centre x0 + 2α p0 t, width grows but the norm
        // stays one
        let g = build_position_grid(1024, -10.0, 10.0).unwrap();
        let eps = 0.1;
        let psi = coherent_state(-2.0, 1.5, eps, &g).unwrap();
        let t = 2.0;
        let out = propagate(&psi, &PotentialSpec::Free, &PropagatorConfig::new(0.01, t)).unwrap();
        let (x, p) = phase_center(&out.state);
        assert!((x - (-2.0 + 1.5 * t)).abs() < 1e-9);
        assert!((p - 1.5).abs() < 1e-10);
        assert!((out.state.norm_sqr() - 1.0).abs() < 1e-12);
        // exact width: σ²(t) = ε/2 (1 + (2αεt/ε)²) for α = 1/2
        let var: f64 = g
            .nodes()
            .iter()
            .zip(out.state.values())
            .map(|(y, z)| (y - x).powi(2) * z.norm_sqr())
            .sum::<f64>()
            * g.dx();
        assert!((var - eps / 2.0 * (1.0 + t * t)).abs() < 1e-9);
    }

    #[test]
    fn harmonic_coherent_state_rotates() {
        let g = build_position_grid(512, -8.0, 8.0).unwrap();
        let eps = 0.05;
        let (x0, p0) = (1.0, -0.5);
        let psi = coherent_state(x0, p0, eps, &g).unwrap();
        for t in [0.7, 2.0] {
            let out = propagate(&psi, &PotentialSpec::Harmonic, &PropagatorConfig::new(1e-3, t)).unwrap();
            let (x, p) = phase_center(&out.state);
            assert!((x - (x0 * t.cos() + p0 * t.sin())).abs() < 1e-6);
            assert!((p - (-x0 * t.sin() + p0 * t.cos())).abs() < 1e-6);
        }
    }

    #[test]
    fn unitary_and_time_reversible() {
        let g = build_position_grid(512, -6.0, 6.0).unwrap();
        let psi = coherent_state(0.4, 0.3, 0.1, &g).unwrap();
        for pot in [PotentialSpec::Harmonic, PotentialSpec::rough_power(0.5)] {
            let fwd = propagate(&psi, &pot, &PropagatorConfig::new(1e-3, 1.0)).unwrap();
            assert!((fwd.state.norm_sqr() - 1.0).abs() < 1e-10);
            let back = propagate(&fwd.state, &pot, &PropagatorConfig::new(-1e-3, 1.0)).unwrap();
            assert!(l2_diff(&back.state, &psi) < 1e-8);
        }
    }

    #[test]
    fn ensemble_propagation_is_memberwise() {
        let g = build_position_grid(256, -8.0, 8.0).unwrap();
        let a = coherent_state(-2.0, 0.0, 0.1, &g).unwrap();
        let b = coherent_state(2.0, 0.0, 0.1, &g).unwrap();
        assert!(a.inner(&b).unwrap().norm() < 1e-12);
        let cfg = PropagatorConfig::new(0.01, 0.5);
        let single = propagate_ensemble(&DensityEnsemble::pure(a.clone()), &PotentialSpec::Free, &cfg).unwrap();
        let direct = propagate(&a, &PotentialSpec::Free, &cfg).unwrap();
        assert_eq!(single.state.members()[0].1.values(), direct.state.values());

        let mix = DensityEnsemble::new(vec![(0.5, a), (0.5, b)]).unwrap();
        let out = propagate_ensemble(&mix, &PotentialSpec::Free, &cfg).unwrap();
        assert_eq!(out.state.trace(), 1.0);
        assert_eq!(out.state.members()[0].0, 0.5);
        assert!(DensityEnsemble::new(vec![(0.7, out.state.members()[0].1.clone())]).is_err());
    }

    #[test]
    fn h2_energy_of_harmonic_ground_state() {
        let g = build_position_grid(512, -6.0, 6.0).unwrap();
        let eps = 0.04;
        let psi = coherent_state(0.0, 0.0, eps, &g).unwrap();
        let e2 = h2_energy(&psi, &PotentialSpec::Harmonic).unwrap();
        assert!((e2 - eps * eps / 4.0).abs() < 1e-12);

        // (H + c)² = H² + 2cH + c²
        let c = 0.3;
        let e = energy(&psi, &PotentialSpec::Harmonic, 0.5).unwrap();
        let shifted = PotentialSpec::Anharmonic {
            quadratic: 1.0,
            quartic: 0.0,
        };
        let _ = shifted;
        let samples: Vec<f64> = g.nodes().iter().map(|x| 0.5 * x * x + c).collect();
        let pot_c = PotentialSpec::custom_on(&g, samples);
        let e2c = h2_energy(&psi, &pot_c).unwrap();
        assert!((e2c - (e2 + 2.0 * c * e + c * c)).abs() < 1e-10);
    }

    #[test]
    fn h2_energy_free_plane_wave_packet() {
        // V = 0: ‖Hψ‖² = E[(α ε² k²)²] over |ψ̂|², with ε k ~ N(p0, ε/2)
        let g = build_position_grid(2048, -10.0, 10.0).unwrap();
        let eps = 0.02;
        let p0 = 1.2;
        let psi = coherent_state(0.0, p0, eps, &g).unwrap();
        let e2 = h2_energy(&psi, &PotentialSpec::Free).unwrap();
        let s2 = eps / 2.0;
        // fourth moment of N(p0, s2): p0⁴ + 6 p0² s2 + 3 s2²
        let expected = 0.25 * (p0.powi(4) + 6.0 * p0 * p0 * s2 + 3.0 * s2 * s2);
        assert!((e2 - expected).abs() < 1e-10);
        assert!((e2 / (0.5 * p0 * p0).powi(2) - 1.0).abs() < 0.1);
    }

    #[test]
    fn reports_unresolved_steps() {
        let g = build_position_grid(256, -8.0, 8.0).unwrap();
        let psi = coherent_state(0.0, 0.0, 0.05, &g).unwrap();
        let out = propagate(&psi, &PotentialSpec::Harmonic, &PropagatorConfig::new(0.1, 0.2)).unwrap();
        assert!(!out.warnings.is_empty());
        let fine = propagate(&psi, &PotentialSpec::Harmonic, &PropagatorConfig::new(1e-4, 1e-3)).unwrap();
        assert!(fine.warnings.is_empty());
    }
}
