//! Initial states: coherent states, log-concentrating phase-space data and
//! random coherent families, plus the `ε^n Id` operator-bound check.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::{PhaseGrid, PositionGrid};
use crate::phase_space::{heat_smooth, wigner_momentum_window, DensityKind, PhaseSpaceDensity};
use crate::quantum::{DensityEnsemble, WaveFunction};

/// Minimal distance to the box and momentum-window edges, in standard
/// deviations of a coherent state.
pub const EDGE_SIGMAS: f64 = 6.0;

/// `ψ(x) = (πε)^{-1/4} exp(-(x-x0)²/(2ε) + i p0 x/ε)`, renormalized on the grid.
pub fn coherent_state(x0: f64, p0: f64, eps: f64, grid: &PositionGrid) -> Result<WaveFunction> {
    if !(eps > 0.0) {
        return config(format!("ε must be positive, got {eps}"));
    }
    let margin = EDGE_SIGMAS * (eps / 2.0).sqrt();
    if x0 - margin < grid.x_min() || x0 + margin > grid.x_max() {
        return config(format!(
            "coherent state at x = {x0} is closer than {margin:.4} to the box [{}, {})",
            grid.x_min(),
            grid.x_max()
        ));
    }
    let window = wigner_momentum_window(grid, eps);
    if p0.abs() + margin > window {
        return config(format!(
            "coherent state at p = {p0} does not fit the momentum window ±{window:.4}; refine the grid"
        ));
    }
    let norm = (PI * eps).powf(-0.25);
    let values = grid
        .nodes()
        .iter()
        .map(|&x| Complex64::from_polar(norm * (-(x - x0).powi(2) / (2.0 * eps)).exp(), p0 * x / eps))
        .collect();
    WaveFunction::normalized(grid.clone(), values, eps)
}

/// Scaling exponents of the concentrating datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub mass: f64,
    pub x: f64,
    pub k: f64,
}

impl ScalingExponents {
    pub fn new(theta: f64) -> Self {
        Self {
            mass: (7.0 + 3.0 * theta) / 30.0,
            x: (1.0 + theta) / 6.0,
            k: (1.0 - theta) / 15.0,
        }
    }

    /// The three exponents as unreduced fractions for `θ = num/den`,
    /// all over the common denominator `30 den`.
    pub fn rational(num: i64, den: i64) -> [(i64, i64); 3] {
        let d = 30 * den;
        [(7 * den + 3 * num, d), (5 * (den + num), d), (2 * (den - num), d)]
    }
}

/// `λ(ε) = ln(1/ε)`.
pub fn lambda(eps: f64) -> f64 {
    (1.0 / eps).ln()
}

/// The bump `w(x, k) = b(|((x - cx)/rx, (k - ck)/rk)|)` with
/// `b(r) = exp(1 - 1/(1 - r²))` on the unit disk. Profiles with unit radii
/// and zero shift give the standard radial bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentratingProfile {
    pub theta: f64,
    pub center: [f64; 2],
    pub radii: [f64; 2],
}

fn bump_radial(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

impl ConcentratingProfile {
    pub fn even(theta: f64) -> Self {
        Self {
            theta,
            center: [0.0, 0.0],
            radii: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return config(format!("θ must lie in [0, 1), got {}", self.theta));
        }
        let [rx, rk] = self.radii;
        if !(rx > 0.0 && rk > 0.0) {
            return config("bump radii must be positive");
        }
        let [cx, ck] = self.center;
        let reach = (0..720)
            .map(|i| {
                let t = i as f64 * PI / 360.0;
                (cx + rx * t.cos()).powi(2) + (ck + rk * t.sin()).powi(2)
            })
            .fold(0.0f64, f64::max);
        if reach > 1.0 + 1e-12 {
            return config("bump support must lie inside the unit disk");
        }
        Ok(())
    }

    pub fn exponents(&self) -> ScalingExponents {
        ScalingExponents::new(self.theta)
    }

    /// Unscaled bump `w(x, k)`.
    pub fn bump(&self, x: f64, k: f64) -> f64 {
        let u = (x - self.center[0]) / self.radii[0];
        let v = (k - self.center[1]) / self.radii[1];
        bump_radial(u * u + v * v)
    }

    /// `λ^{a_mass} w(λ^{a_x} x, λ^{a_k} k)`.
    pub fn scaled(&self, eps: f64, x: f64, k: f64) -> f64 {
        let l = lambda(eps);
        let e = self.exponents();
        l.powf(e.mass) * self.bump(l.powf(e.x) * x, l.powf(e.k) * k)
    }

    /// `∫ w dx dk`.
    pub fn bump_mass(&self) -> f64 {
        // ∫_disk b = π ∫_0^1 e^{1 - 1/s} ds
        let radial = simpson(|s| if s > 0.0 { (1.0 - 1.0 / s).exp() } else { 0.0 }, 0.0, 1.0, 4000);
        PI * radial * self.radii[0] * self.radii[1]
    }

    /// `(∫_{x>0} w, ∫_{x<0} w)`.
    pub fn half_plane_masses(&self) -> (f64, f64) {
        let [rx, rk] = self.radii;
        let slice = |u: f64| {
            let h = (1.0 - u * u).max(0.0).sqrt();
            simpson(|v| bump_radial(u * u + v * v), -h, h, 600)
        };
        let cut = (-self.center[0] / rx).clamp(-1.0, 1.0);
        let right = rx * rk * simpson(slice, cut, 1.0, 600);
        let total = self.bump_mass();
        (right, total - right)
    }

    /// Even-in-`k` profile with bump centre on the `x` axis placed so that
    /// `∫_{x>0} w = right_mass`.
    pub fn with_right_mass(theta: f64, radii: [f64; 2], right_mass: f64) -> Result<Self> {
        if !(right_mass > 0.0 && right_mass < 1.0) {
            return config("right mass fraction must lie in (0, 1)");
        }
        let max_shift = 1.0 - radii[0];
        let frac = |cx: f64| {
            let p = Self {
                theta,
                center: [cx, 0.0],
                radii,
            };
            let (r, l) = p.half_plane_masses();
            r / (r + l)
        };
        let (mut lo, mut hi) = (-max_shift, max_shift);
        if frac(hi) < right_mass || frac(lo) > right_mass {
            return config(format!("right mass {right_mass} is unreachable with radii {radii:?}"));
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if frac(mid) < right_mass {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = Self {
            theta,
            center: [0.5 * (lo + hi), 0.0],
            radii,
        };
        p.validate()?;
        Ok(p)
    }

    /// Half-widths of the scaled support, `((|cx| + rx) λ^{-a_x}, (|ck| + rk) λ^{-a_k})`.
    pub fn scaled_extent(&self, eps: f64) -> (f64, f64) {
        let l = lambda(eps);
        let e = self.exponents();
        (
            (self.center[0].abs() + self.radii[0]) * l.powf(-e.x),
            (self.center[1].abs() + self.radii[1]) * l.powf(-e.k),
        )
    }
}

/// Target datum, its positive realization and the gap between them.
#[derive(Debug, Clone)]
pub struct ConcentratingDatum {
    pub target: PhaseSpaceDensity,
    /// Wigner function of `∫ target(z) |z⟩⟨z| dz`, a positive density matrix.
    pub realized: PhaseSpaceDensity,
    /// `‖target - realized‖_{L²}`.
    pub realization_gap: f64,
    pub lambda: f64,
    pub exponents: ScalingExponents,
    pub bump_mass: f64,
}

/// Cells per scaled bump radius required on each axis.
pub const CELLS_PER_RADIUS: f64 = 16.0;

fn required_points(extent: f64, spacing: f64) -> usize {
    ((extent / spacing).ceil() as usize).next_power_of_two().max(8)
}

pub fn concentrating_wigner_data(
    profile: &ConcentratingProfile,
    eps: f64,
    grid: &PhaseGrid,
) -> Result<ConcentratingDatum> {
    profile.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return config(format!("ε must lie in (0, 1), got {eps}"));
    }
    let l = lambda(eps);
    let e = profile.exponents();
    let wx = profile.radii[0] * l.powf(-e.x);
    let wk = profile.radii[1] * l.powf(-e.k);
    let need_dx = wx / CELLS_PER_RADIUS;
    let need_dp = wk / CELLS_PER_RADIUS;
    if grid.x.dx() >= need_dx || grid.p.dx() >= need_dp {
        return config(format!(
            "grid does not resolve the datum at ε = {eps}: need dx < {need_dx:.4e} ({} x-points) and dp < {need_dp:.4e} ({} p-points)",
            required_points(grid.x.extent(), need_dx),
            required_points(grid.p.extent(), need_dp),
        ));
    }
    let (ex, ek) = profile.scaled_extent(eps);
    // room for the realization tail, 6 standard deviations of √(ε/2)
    let pad = EDGE_SIGMAS * (eps / 2.0).sqrt();
    if -ex - pad < grid.x.x_min() || ex + pad > grid.x.x_max() || -ek - pad < grid.p.x_min() || ek + pad > grid.p.x_max() {
        return config("datum support does not fit inside the phase grid");
    }
    let (nx, np) = grid.shape();
    let xs = grid.x.nodes();
    let ps = grid.p.nodes();
    let mut values = Array2::zeros((nx, np));
    for ((i, j), v) in values.indexed_iter_mut() {
        *v = profile.scaled(eps, xs[i], ps[j]);
    }
    let target = PhaseSpaceDensity::from_grid(grid.clone(), values, DensityKind::Classical)?;
    let realized = heat_smooth(&target, eps / 4.0)?.with_kind(DensityKind::Wigner);
    let diff = target.values().expect("grid") - realized.values().expect("grid");
    let realization_gap = (diff.iter().map(|v| v * v).sum::<f64>() * grid.cell_area()).sqrt();
    Ok(ConcentratingDatum {
        target,
        realized,
        realization_gap,
        lambda: l,
        exponents: e,
        bump_mass: profile.bump_mass(),
    })
}

/// Explicit coherent-state mixture approximating `∫ f(z) |z⟩⟨z| dz` for a
/// non-negative `f`, using a lattice of spacing `spacing` in both variables.
pub fn coherent_mixture<F>(
    f: F,
    x_range: (f64, f64),
    p_range: (f64, f64),
    spacing: f64,
    eps: f64,
    grid: &PositionGrid,
) -> Result<DensityEnsemble>
where
    F: Fn(f64, f64) -> f64,
{
    if !(spacing > 0.0) {
        return config("lattice spacing must be positive");
    }
    let nx = ((x_range.1 - x_range.0) / spacing).floor() as usize + 1;
    let np = ((p_range.1 - p_range.0) / spacing).floor() as usize + 1;
    let mut points = Vec::new();
    for a in 0..nx {
        for b in 0..np {
            let x = x_range.0 + a as f64 * spacing;
            let p = p_range.0 + b as f64 * spacing;
            let w = f(x, p);
            if w > 0.0 {
                points.push((w, x, p));
            }
        }
    }
    if points.is_empty() {
        return config("mixture profile vanishes on the lattice");
    }
    let members: Result<Vec<_>> = points
        .par_iter()
        .map(|&(w, x, p)| coherent_state(x, p, eps, grid).map(|s| (w, s)))
        .collect();
    DensityEnsemble::from_unnormalized(members?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingLaw {
    Gaussian {
        mean: [f64; 2],
        std: [f64; 2],
    },
    PointMass {
        x: f64,
        p: f64,
    },
    UniformBox {
        x: [f64; 2],
        p: [f64; 2],
    },
}

impl SamplingLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { std, .. } if !(std[0] > 0.0 && std[1] > 0.0) => {
                config("Gaussian law needs positive standard deviations")
            }
            Self::UniformBox { x, p } if !(x[1] > x[0] && p[1] > p[0]) => config("empty sampling box"),
            _ => Ok(()),
        }
    }

    /// Probability density, `None` for the point mass.
    pub fn pdf(&self, x: f64, p: f64) -> Option<f64> {
        match *self {
            Self::Gaussian { mean, std } => {
                let u = (x - mean[0]) / std[0];
                let v = (p - mean[1]) / std[1];
                Some((-(u * u + v * v) / 2.0).exp() / (2.0 * PI * std[0] * std[1]))
            }
            Self::UniformBox { x: bx, p: bp } => {
                let inside = x >= bx[0] && x <= bx[1] && p >= bp[0] && p <= bp[1];
                Some(if inside { 1.0 / ((bx[1] - bx[0]) * (bp[1] - bp[0])) } else { 0.0 })
            }
            Self::PointMass { .. } => None,
        }
    }

    /// Top eigenvalue of `∫ P(z) |z⟩⟨z| dz` divided by `ε`, the law-level
    /// counterpart of [`check_epsn_operator_bound`].
    ///
    /// Exact for Gaussian laws, whose mixture is a squeezed thermal state with
    /// top eigenvalue `ε / (ν + ε/2)`, `ν² = (s_x² + ε/2)(s_p² + ε/2)`. For a
    /// box it is the bound `2π sup P` from `∫ |z⟩⟨z| dz = 2πε Id`.
    pub fn operator_bound_ratio(&self, eps: f64) -> f64 {
        match *self {
            Self::Gaussian { std, .. } => {
                let nu = ((std[0].powi(2) + eps / 2.0) * (std[1].powi(2) + eps / 2.0)).sqrt();
                1.0 / (nu + eps / 2.0)
            }
            Self::UniformBox { x, p } => 2.0 * PI / ((x[1] - x[0]) * (p[1] - p[0])),
            Self::PointMass { .. } => 1.0 / eps,
        }
    }

    pub fn mean(&self) -> [f64; 2] {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::PointMass { x, p } => [x, p],
            Self::UniformBox { x, p } => [(x[0] + x[1]) / 2.0, (p[0] + p[1]) / 2.0],
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        match *self {
            Self::Gaussian { mean, std } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                [mean[0] + std[0] * n.sample(rng), mean[1] + std[1] * n.sample(rng)]
            }
            Self::PointMass { x, p } => [x, p],
            Self::UniformBox { x, p } => [rng.random_range(x[0]..x[1]), rng.random_range(p[0]..p[1])],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFamilySpec {
    pub law: SamplingLaw,
    pub samples: usize,
    pub seed: u64,
}

/// Phase point `w` drawn for sample `index`; each index owns the ChaCha
/// stream `index` of the seed, so draws do not depend on evaluation order.
pub fn sample_point(spec: &RandomFamilySpec, index: usize) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    spec.law.draw(&mut rng)
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub point: [f64; 2],
    pub state: WaveFunction,
}

pub fn sample_random_family(spec: &RandomFamilySpec, eps: f64, grid: &PositionGrid) -> Result<Vec<FamilyMember>> {
    if spec.samples == 0 {
        return config("a random family needs at least one sample");
    }
    spec.law.validate()?;
    (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let point = sample_point(spec, i);
            coherent_state(point[0], point[1], eps, grid).map(|state| FamilyMember { point, state })
        })
        .collect()
}

/// Largest eigenvalue of `Σ w_i |ψ_i⟩⟨ψ_i|` divided by `ε` (one space
/// dimension). The family satisfies the `ε^n Id` bound when the result is at
/// most one.
///
/// The spectrum is computed densely, on the `M × M` weighted Gram matrix or
/// on the `N × N` grid operator, whichever is smaller.
pub fn check_epsn_operator_bound(family: &[(f64, WaveFunction)], eps: f64) -> Result<f64> {
    let Some((_, first)) = family.first() else {
        return config("empty family");
    };
    let total: f64 = family.iter().map(|(w, _)| w).sum();
    if family.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
        return config(format!("family weights must be non-negative and sum to one, got {total}"));
    }
    if !(eps > 0.0) {
        return config(format!("ε must be positive, got {eps}"));
    }
    let grid = first.grid();
    if family.iter().any(|(_, s)| !s.grid().same_as(grid)) {
        return Err(Error::GridMismatch("family members live on different grids".into()));
    }
    let dx = grid.dx();
    let (m, n) = (family.len(), grid.len());
    let matrix = if m <= n {
        let rows: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (wi, si) = &family[i];
                family
                    .iter()
                    .map(|(wj, sj)| {
                        let ip: Complex64 = si.values().iter().zip(sj.values()).map(|(a, b)| a.conj() * b).sum();
                        ip * dx * (wi * wj).sqrt()
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(m, m, |i, j| rows[i][j])
    } else {
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                (0..n)
                    .map(|b| {
                        family
                            .iter()
                            .map(|(w, s)| *w * s.values()[a] * s.values()[b].conj())
                            .sum::<Complex64>()
                            * dx
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |a, b| rows[a][b])
    };
    let top = matrix
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical("non-finite eigenvalue in the operator bound".into()));
    }
    Ok(top.max(0.0) / eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_position_grid;
    use crate::phase_space::build_wigner_grid;

    #[test]
    fn coherent_state_basics() {
        let g = build_position_grid(256, -8.0, 8.0).unwrap();
        let psi = coherent_state(0.0, 0.0, 0.1, &g).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let v = psi.values();
        for i in 1..256 {
            assert!(v[i].im.abs() < 1e-15);
            assert!((v[i].re - v[256 - i].re).abs() < 1e-14);
        }
        assert!(coherent_state(7.5, 0.0, 0.1, &g).is_err());
        assert!(coherent_state(0.0, 1.5, 0.1, &g).is_err());
    }

    #[test]
    fn exponents_for_half() {
        let e = ScalingExponents::new(0.5);
        assert!((e.mass - 17.0 / 60.0).abs() < 1e-15);
        assert!((e.x - 0.25).abs() < 1e-15);
        assert!((e.k - 1.0 / 30.0).abs() < 1e-15);
        let l = lambda(1e-3);
        assert!((l - 6.907_755_278_982_137).abs() < 1e-12);
        assert!((l.powf(-0.25) - 0.617).abs() < 1e-3);
    }

    #[test]
    fn mass_identity_is_exact_in_rationals() {
        for i in 1..100 {
            let [m, x, k] = ScalingExponents::rational(i, 100);
            assert_eq!(m.1, x.1);
            assert_eq!(m.0, x.0 + k.0);
        }
    }

    #[test]
    fn bump_integrals_match_brute_force() {
        let shifted = ConcentratingProfile {
            theta: 0.5,
            center: [0.2, -0.1],
            radii: [0.6, 0.5],
        };
        shifted.validate().unwrap();
        for prof in [ConcentratingProfile::even(0.5), shifted] {
            // midpoint rule oracle on a fine square grid
            let n = 2000;
            let h = 2.0 / n as f64;
            let (mut total, mut right) = (0.0, 0.0);
            for a in 0..n {
                let x = -1.0 + (a as f64 + 0.5) * h;
                for b in 0..n {
                    let k = -1.0 + (b as f64 + 0.5) * h;
                    let w = prof.bump(x, k) * h * h;
                    total += w;
                    if x > 0.0 {
                        right += w;
                    }
                }
            }
            assert!((prof.bump_mass() - total).abs() < 1e-6);
            let (r, l) = prof.half_plane_masses();
            assert!((r - right).abs() < 2e-3 * total);
            assert!((r + l - total).abs() < 1e-6);
        }
        let (r, l) = ConcentratingProfile::even(0.5).half_plane_masses();
        assert!((r - l).abs() < 1e-9);
    }

    #[test]
    fn shifted_profile_hits_target_fraction() {
        let p = ConcentratingProfile::with_right_mass(0.5, [0.4, 0.6], 0.7).unwrap();
        let (r, l) = p.half_plane_masses();
        assert!((r / (r + l) - 0.7).abs() < 1e-9);
        assert!(p.center[0] > 0.0);
        assert!(ConcentratingProfile {
            theta: 0.5,
            center: [0.5, 0.0],
            radii: [0.6, 0.5]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rasterized_mass_equals_bump_mass() {
        let prof = ConcentratingProfile::even(0.5);
        for eps in [1e-2, 1e-3, 1e-4] {
            let x = build_position_grid(512, -1.5, 1.5).unwrap();
            let p = build_position_grid(512, -1.5, 1.5).unwrap();
            let d = concentrating_wigner_data(&prof, eps, &PhaseGrid::new(x, p)).unwrap();
            assert!((d.target.total_mass() - d.bump_mass).abs() < 1e-8, "{eps}");
            assert!((d.realized.total_mass() - d.bump_mass).abs() < 1e-8);
            assert!(d.realization_gap > 0.0);
            assert!(d.target.half_plane_mass(0.0, true) > 0.0);
        }
        let coarse = PhaseGrid::new(
            build_position_grid(32, -1.5, 1.5).unwrap(),
            build_position_grid(32, -1.5, 1.5).unwrap(),
        );
        let err = concentrating_wigner_data(&prof, 1e-3, &coarse).unwrap_err();
        assert!(err.to_string().contains("x-points"));
    }

    #[test]
    fn realization_matches_explicit_mixture() {
        // continuum anti-Wick realization vs a fine coherent lattice mixture
        let eps = 0.04;
        let g = build_position_grid(512, -4.0, 4.0).unwrap();
        let pg = build_wigner_grid(&g, eps).unwrap();
        let f = |x: f64, p: f64| (-(x * x + p * p) / 0.5).exp();
        let h = 0.1;
        let mix = coherent_mixture(f, (-2.0, 2.0), (-2.0, 2.0), h, eps, &g).unwrap();
        let w_mix = crate::phase_space::wigner_ensemble(&mix).unwrap();
        let mut target = Array2::zeros(pg.shape());
        for ((i, j), v) in target.indexed_iter_mut() {
            *v = f(pg.x.node(i), pg.p.node(j));
        }
        let t = PhaseSpaceDensity::from_grid(pg.clone(), target, DensityKind::Classical).unwrap();
        let t = t.scaled(1.0 / t.total_mass());
        let realized = heat_smooth(&t, eps / 4.0).unwrap();
        let diff = w_mix.values().unwrap() - realized.values().unwrap();
        let l2 = (diff.iter().map(|v| v * v).sum::<f64>() * pg.cell_area()).sqrt();
        let norm = crate::phase_space::l2_norm(&realized).unwrap();
        assert!(l2 / norm < 1e-3, "{}", l2 / norm);
    }

    #[test]
    fn random_family_determinism_and_mean() {
        let g = build_position_grid(512, -12.0, 12.0).unwrap();
        let spec = RandomFamilySpec {
            law: SamplingLaw::Gaussian {
                mean: [0.5, -0.2],
                std: [1.0, 0.5],
            },
            samples: 1000,
            seed: 7,
        };
        let a: Vec<[f64; 2]> = (0..spec.samples).map(|i| sample_point(&spec, i)).collect();
        let b: Vec<[f64; 2]> = (0..spec.samples).map(|i| sample_point(&spec, i)).collect();
        assert_eq!(a, b);
        let m = spec.samples as f64;
        let mx = a.iter().map(|w| w[0]).sum::<f64>() / m;
        let mp = a.iter().map(|w| w[1]).sum::<f64>() / m;
        assert!((mx - 0.5).abs() < 5.0 * 1.0 / m.sqrt());
        assert!((mp + 0.2).abs() < 5.0 * 0.5 / m.sqrt());

        let single = RandomFamilySpec {
            law: SamplingLaw::PointMass { x: 1.0, p: 0.0 },
            samples: 1,
            seed: 1,
        };
        let fam = sample_random_family(&single, 0.1, &g).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].point, [1.0, 0.0]);
        let direct = coherent_state(1.0, 0.0, 0.1, &g).unwrap();
        assert_eq!(fam[0].state.values(), direct.values());
    }

    #[test]
    fn law_densities_integrate_to_one() {
        let laws = [
            SamplingLaw::Gaussian {
                mean: [0.3, 0.1],
                std: [1.2, 0.7],
            },
            SamplingLaw::UniformBox {
                x: [-1.0, 2.0],
                p: [0.0, 0.5],
            },
        ];
        for law in laws {
            let n = 1600;
            let h = 16.0 / n as f64;
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let x = -8.0 + (a as f64 + 0.5) * h;
                    let p = -8.0 + (b as f64 + 0.5) * h;
                    s += law.pdf(x, p).unwrap() * h * h;
                }
            }
            assert!((s - 1.0).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn law_ratio_matches_a_dense_quadrature() {
        let eps = 0.2;
        let law = SamplingLaw::Gaussian {
            mean: [0.0, 0.0],
            std: [0.7, 0.5],
        };
        let g = build_position_grid(256, -8.0, 8.0).unwrap();
        let pdf = |x: f64, p: f64| law.pdf(x, p).unwrap();
        let mix = coherent_mixture(pdf, (-3.5, 3.5), (-2.5, 2.5), 0.1, eps, &g).unwrap();
        let dense = check_epsn_operator_bound(mix.members(), eps).unwrap();
        let exact = law.operator_bound_ratio(eps);
        assert!((dense / exact - 1.0).abs() < 1e-3, "{dense} vs {exact}");
        assert_eq!(SamplingLaw::PointMass { x: 0.0, p: 0.0 }.operator_bound_ratio(0.5), 2.0);
    }

    #[test]
    fn operator_bound_pure_and_spread() {
        let g = build_position_grid(1024, -10.0, 10.0).unwrap();
        let eps = 0.05;
        let pure = vec![(1.0, coherent_state(0.0, 0.0, eps, &g).unwrap())];
        let r = check_epsn_operator_bound(&pure, eps).unwrap();
        assert!((r - 1.0 / eps).abs() < 1e-8);
        assert!(check_epsn_operator_bound(&[(0.0, pure[0].1.clone())], eps).is_err());

        // uniform lattice mixture over a box of area A: top eigenvalue about
        // 2πε/A, so the ratio is about 2π/A
        let (l, h) = (4.0, 0.2);
        let mut fam = Vec::new();
        let m = (l / h) as usize;
        for a in 0..m {
            for b in 0..m {
                let x = -l / 2.0 + (a as f64 + 0.5) * h;
                let p = -l / 2.0 + (b as f64 + 0.5) * h;
                fam.push((1.0 / (m * m) as f64, coherent_state(x, p, eps, &g).unwrap()));
            }
        }
        let r = check_epsn_operator_bound(&fam, eps).unwrap();
        let expected = 2.0 * PI / (l * l);
        assert!(r <= 1.0);
        assert!((r / expected - 1.0).abs() < 0.15, "{r} vs {expected}");

        // oracle: the weighted Gram matrix G_ij = √(w_i w_j) ⟨ψ_i|ψ_j⟩ shares
        // its non-zero spectrum with the operator; its real 2n×2n embedding
        // [[Re G, -Im G], [Im G, Re G]] has every eigenvalue twice
        let n = fam.len();
        let gram = |i: usize, j: usize| fam[i].1.inner(&fam[j].1).unwrap() * (fam[i].0 * fam[j].0).sqrt();
        let real = nalgebra::DMatrix::from_fn(2 * n, 2 * n, |a, b| {
            let z = gram(a % n, b % n);
            match (a < n, b < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let top = real.symmetric_eigen().eigenvalues.max();
        assert!((top / eps - r).abs() < 1e-6 * r);
    }
}
