//! Wigner and Husimi transforms, norms and characteristic functions.
//!
//! The discrete Wigner transform of `ψ` on an `N`-point grid is
//!
//! ```text
//! W(x_i, p_j) = dx/(πε) Σ_m ψ(x_i + m dx) conj(ψ(x_i - m dx)) e^{-2πi jm/N}
//! ```
//!
//! with `m ∈ [-N/2, N/2)` and zero padding outside the grid, so that
//! `x ± εy/2` always lands on a node. Momenta are `p_j = j dp`, `dp = πε/L`
//! for a box of length `L`, and the momentum window is `|p| < πε/(2 dx)`.
//! With this layout the mass and both marginal identities hold to rounding.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::{signed_index, PhaseGrid, PositionGrid};
use crate::phase_ops::{filter_columns, filter_rows, heat_row, real_part, to_complex};
use crate::quantum::{DensityEnsemble, WaveFunction};

/// What a grid density represents. Husimi densities must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DensityKind {
    Wigner,
    Husimi,
    #[default]
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mass: f64,
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    GridFunction { grid: PhaseGrid, values: Array2<f64> },
    AtomicMeasure { atoms: Vec<Atom> },
}

/// A signed density on a phase grid, or a finite sum of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceDensity {
    representation: Representation,
    total_mass: f64,
    kind: DensityKind,
}

pub const HUSIMI_FLOOR: f64 = -1e-9;

#[derive(Serialize, Deserialize)]
struct AtomFile {
    atoms: Vec<Atom>,
}

impl PhaseSpaceDensity {
    pub fn from_grid(grid: PhaseGrid, values: Array2<f64>, kind: DensityKind) -> Result<Self> {
        let shape = grid.shape();
        if values.dim() != shape {
            return Err(Error::Shape {
                expected: shape.0 * shape.1,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite phase-space density".into()));
        }
        let total_mass = values.sum() * grid.cell_area();
        Ok(Self {
            representation: Representation::GridFunction { grid, values },
            total_mass,
            kind,
        })
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return config("atomic measure needs at least one atom");
        }
        if let Some(a) = atoms
            .iter()
            .find(|a| !(a.mass > 0.0) || !a.x.is_finite() || !a.p.is_finite())
        {
            return config(format!("invalid atom {a:?}"));
        }
        let total_mass = atoms.iter().map(|a| a.mass).sum();
        Ok(Self {
            representation: Representation::AtomicMeasure { atoms },
            total_mass,
            kind: DensityKind::Classical,
        })
    }

    pub fn dirac(x: f64, p: f64) -> Self {
        Self::from_atoms(vec![Atom { mass: 1.0, x, p }]).expect("unit atom is valid")
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: DensityKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn grid(&self) -> Option<&PhaseGrid> {
        match &self.representation {
            Representation::GridFunction { grid, .. } => Some(grid),
            Representation::AtomicMeasure { .. } => None,
        }
    }

    pub fn values(&self) -> Option<&Array2<f64>> {
        match &self.representation {
            Representation::GridFunction { values, .. } => Some(values),
            Representation::AtomicMeasure { .. } => None,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.representation {
            Representation::AtomicMeasure { atoms } => Some(atoms),
            Representation::GridFunction { .. } => None,
        }
    }

    pub(crate) fn grid_parts(&self) -> Result<(&PhaseGrid, &Array2<f64>)> {
        match &self.representation {
            Representation::GridFunction { grid, values } => Ok((grid, values)),
            Representation::AtomicMeasure { .. } => {
                Err(Error::UnsupportedRepresentation("atomic measure has no density"))
            }
        }
    }

    /// Rescales values or masses by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out.representation {
            Representation::GridFunction { values, .. } => values.mapv_inplace(|v| v * factor),
            Representation::AtomicMeasure { atoms } => atoms.iter_mut().for_each(|a| a.mass *= factor),
        }
        out.total_mass *= factor;
        out
    }

    /// Mass of the region `x > x_sep` (`right = true`) or `x < -x_sep`.
    pub fn half_plane_mass(&self, x_sep: f64, right: bool) -> f64 {
        let inside = |x: f64| if right { x > x_sep } else { x < -x_sep };
        match &self.representation {
            Representation::GridFunction { grid, values } => {
                let area = grid.cell_area();
                values
                    .axis_iter(Axis(0))
                    .enumerate()
                    .filter(|(i, _)| inside(grid.x.node(*i)))
                    .map(|(_, row)| row.sum())
                    .sum::<f64>()
                    * area
            }
            Representation::AtomicMeasure { atoms } => {
                atoms.iter().filter(|a| inside(a.x)).map(|a| a.mass).sum()
            }
        }
    }

    pub fn to_atomic_json(&self) -> Result<String> {
        match &self.representation {
            Representation::AtomicMeasure { atoms } => Ok(serde_json::to_string_pretty(&AtomFile {
                atoms: atoms.clone(),
            })?),
            Representation::GridFunction { .. } => {
                Err(Error::UnsupportedRepresentation("only atomic measures serialize as atoms"))
            }
        }
    }

    pub fn from_atomic_json(json: &str) -> Result<Self> {
        let file: AtomFile = serde_json::from_str(json)?;
        Self::from_atoms(file.atoms)
    }
}

/// Phase grid carrying the Wigner transform of states on `x_grid`.
pub fn build_wigner_grid(x_grid: &PositionGrid, eps: f64) -> Result<PhaseGrid> {
    if !(eps > 0.0) {
        return config(format!("ε must be positive, got {eps}"));
    }
    let n = x_grid.len();
    let dp = PI * eps / x_grid.extent();
    let half = (n / 2) as f64 * dp;
    Ok(PhaseGrid::new(x_grid.clone(), PositionGrid::new(n, -half, half)?))
}

/// Largest momentum magnitude representable on the Wigner grid.
pub fn wigner_momentum_window(x_grid: &PositionGrid, eps: f64) -> f64 {
    eps * x_grid.nyquist() / 2.0
}

/// Spectral weight allowed beyond the Wigner momentum window.
pub const WINDOW_LEAKAGE: f64 = 1e-10;

fn check_state_fits(state: &WaveFunction) -> Result<()> {
    let grid = state.grid();
    let leak = state.spectral_weight_above(grid.nyquist() / 2.0);
    if leak > WINDOW_LEAKAGE {
        return config(format!(
            "state has weight {leak:.2e} beyond the Wigner momentum window ±{:.4}; refine the grid or raise ε",
            wigner_momentum_window(grid, state.eps())
        ));
    }
    let margin = 6.0 * (state.eps() / 2.0).sqrt();
    let edge = state.boundary_weight(margin);
    if edge > 1e-12 {
        log::warn!("state has weight {edge:.2e} within {margin:.3} of the box edge; Wigner transform may see wrap-around");
    }
    Ok(())
}

/// Discrete Wigner transform of a pure state.
pub fn wigner(state: &WaveFunction) -> Result<PhaseSpaceDensity> {
    check_state_fits(state)?;
    let values = wigner_values(state);
    let grid = build_wigner_grid(state.grid(), state.eps())?;
    PhaseSpaceDensity::from_grid(grid, values, DensityKind::Wigner)
}

fn wigner_values(state: &WaveFunction) -> Array2<f64> {
    let grid = state.grid();
    let n = grid.len();
    let psi = state.values();
    let scale = grid.dx() / (PI * state.eps());
    let half = n / 2;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut g = vec![Complex64::default(); n];
        for m in -(half as i64)..(half as i64) {
            let a = i as i64 + m;
            let b = i as i64 - m;
            if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                g[m.rem_euclid(n as i64) as usize] = psi[a as usize] * psi[b as usize].conj();
            }
        }
        grid.fft_forward_raw(&mut g);
        // DFT index j holds momentum signed(j)·dp; store in increasing order
        for (j, z) in g.iter().enumerate() {
            let s = signed_index(j, n);
            row[(s + half as i64) as usize] = scale * z.re;
        }
    });
    Array2::from_shape_vec((n, n), out).expect("square buffer")
}

/// Weighted sum of member Wigner functions.
pub fn wigner_ensemble(ensemble: &DensityEnsemble) -> Result<PhaseSpaceDensity> {
    let grid = build_wigner_grid(ensemble.grid(), ensemble.eps())?;
    let n = ensemble.grid().len();
    let mut acc = Array2::<f64>::zeros((n, n));
    for (w, s) in ensemble.members() {
        check_state_fits(s)?;
        acc.scaled_add(*w, &wigner_values(s));
    }
    PhaseSpaceDensity::from_grid(grid, acc, DensityKind::Wigner)
}

/// Heat semigroup `e^{tΔ}` in both phase-space variables, applied spectrally
/// on the periodic grid. Equivalent to Gaussian convolution with variance
/// `2t` per axis.
pub fn heat_smooth(density: &PhaseSpaceDensity, time: f64) -> Result<PhaseSpaceDensity> {
    if !(time >= 0.0) {
        return config(format!("smoothing time must be non-negative, got {time}"));
    }
    let (grid, values) = density.grid_parts()?;
    let mut buf = to_complex(values);
    filter_rows(&mut buf, &grid.p, &heat_row(&grid.p, time));
    filter_columns(&mut buf, grid, &heat_row(&grid.x, time));
    PhaseSpaceDensity::from_grid(grid.clone(), real_part(&buf, grid.shape()), density.kind())
}

/// Husimi function `e^{εΔ} W`.
pub fn husimi(density: &PhaseSpaceDensity, eps: f64) -> Result<PhaseSpaceDensity> {
    if !(eps > 0.0) {
        return config(format!("ε must be positive, got {eps}"));
    }
    Ok(heat_smooth(density, eps)?.with_kind(DensityKind::Husimi))
}

pub fn sup_norm(density: &PhaseSpaceDensity) -> Result<f64> {
    let (_, values) = density.grid_parts()?;
    Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

pub fn l2_norm(density: &PhaseSpaceDensity) -> Result<f64> {
    let (grid, values) = density.grid_parts()?;
    Ok((values.iter().map(|v| v * v).sum::<f64>() * grid.cell_area()).sqrt())
}

pub fn min_value(density: &PhaseSpaceDensity) -> Result<f64> {
    let (_, values) = density.grid_parts()?;
    Ok(values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `(∫ W dp, ∫ W dx)` sampled on the x and p nodes.
pub fn marginals(density: &PhaseSpaceDensity) -> Result<(Vec<f64>, Vec<f64>)> {
    let (grid, values) = density.grid_parts()?;
    let x = values.sum_axis(Axis(1)).mapv(|v| v * grid.p.dx()).to_vec();
    let p = values.sum_axis(Axis(0)).mapv(|v| v * grid.x.dx()).to_vec();
    Ok((x, p))
}

/// Objects with a Fourier transform `χ(ξ, η) = ∫ e^{-i(ξx + ηp)} dμ(x, p)`.
pub trait Characteristic {
    fn mass(&self) -> f64;

    /// `χ` on the tensor grid, indexed `[ξ][η]`.
    fn characteristic(&self, xi: &[f64], eta: &[f64]) -> Result<Array2<Complex64>>;
}

fn exp_table(freqs: &[f64], nodes: &[f64]) -> Vec<Complex64> {
    freqs
        .iter()
        .flat_map(|&f| nodes.iter().map(move |&x| Complex64::from_polar(1.0, -f * x)))
        .collect()
}

impl Characteristic for PhaseSpaceDensity {
    fn mass(&self) -> f64 {
        self.total_mass
    }

    fn characteristic(&self, xi: &[f64], eta: &[f64]) -> Result<Array2<Complex64>> {
        let mut out = Array2::<Complex64>::zeros((xi.len(), eta.len()));
        match &self.representation {
            Representation::AtomicMeasure { atoms } => {
                for ((a, b), z) in out.indexed_iter_mut() {
                    *z = atoms
                        .iter()
                        .map(|at| Complex64::from_polar(at.mass, -(xi[a] * at.x + eta[b] * at.p)))
                        .sum();
                }
            }
            Representation::GridFunction { grid, values } => {
                let (nx, np) = grid.shape();
                let ex = exp_table(xi, &grid.x.nodes());
                let ep = exp_table(eta, &grid.p.nodes());
                // partial[i][b] = Σ_j W_ij e^{-iη_b p_j}
                let mut partial = vec![Complex64::default(); nx * eta.len()];
                let rows: Vec<&[f64]> = (0..nx)
                    .map(|i| values.row(i).to_slice().expect("standard layout"))
                    .collect();
                partial
                    .par_chunks_mut(eta.len())
                    .zip(rows.par_iter())
                    .for_each(|(dst, row)| {
                        for (b, d) in dst.iter_mut().enumerate() {
                            let e = &ep[b * np..(b + 1) * np];
                            *d = row.iter().zip(e).map(|(w, z)| z * *w).sum();
                        }
                    });
                let area = grid.cell_area();
                for ((a, b), z) in out.indexed_iter_mut() {
                    let e = &ex[a * nx..(a + 1) * nx];
                    *z = (0..nx).map(|i| e[i] * partial[i * eta.len() + b]).sum::<Complex64>() * area;
                }
            }
        }
        Ok(out)
    }
}

/// Wigner or Husimi function of a pure state, evaluated in Fourier space
/// without building the phase-space grid.
#[derive(Debug, Clone, Copy)]
pub struct PureStateTransform<'a> {
    state: &'a WaveFunction,
    smoothing: f64,
}

impl<'a> PureStateTransform<'a> {
    pub fn wigner(state: &'a WaveFunction) -> Self {
        Self { state, smoothing: 0.0 }
    }

    pub fn husimi(state: &'a WaveFunction) -> Self {
        Self {
            state,
            smoothing: state.eps(),
        }
    }
}

impl Characteristic for PureStateTransform<'_> {
    fn mass(&self) -> f64 {
        self.state.norm_sqr()
    }

    /// `χ(ξ, η) = e^{-t(ξ²+η²)} ∫ ψ(x - εη/2) conj(ψ(x + εη/2)) e^{-iξx} dx`.
    fn characteristic(&self, xi: &[f64], eta: &[f64]) -> Result<Array2<Complex64>> {
        let grid = self.state.grid();
        let n = grid.len();
        let eps = self.state.eps();
        let nodes = grid.nodes();
        let k = grid.frequencies();
        let mut spec = self.state.values().to_vec();
        grid.fft_forward_raw(&mut spec);
        let ex = exp_table(xi, &nodes);
        let inv_n = 1.0 / n as f64;
        let columns: Vec<Vec<Complex64>> = eta
            .par_iter()
            .map(|&e| {
                let a = eps * e / 2.0;
                let shift = |s: f64| {
                    let mut buf: Vec<Complex64> = spec
                        .iter()
                        .zip(&k)
                        .map(|(z, kk)| z * Complex64::from_polar(inv_n, -kk * s))
                        .collect();
                    grid.fft_inverse_raw(&mut buf);
                    buf
                };
                let minus = shift(a);
                let plus = shift(-a);
                let g: Vec<Complex64> = minus.iter().zip(&plus).map(|(u, v)| u * v.conj()).collect();
                xi.iter()
                    .enumerate()
                    .map(|(ai, &x)| {
                        let damp = (-self.smoothing * (x * x + e * e)).exp();
                        let row = &ex[ai * n..(ai + 1) * n];
                        g.iter().zip(row).map(|(u, v)| u * v).sum::<Complex64>() * grid.dx() * damp
                    })
                    .collect()
            })
            .collect();
        let mut out = Array2::<Complex64>::zeros((xi.len(), eta.len()));
        for (b, col) in columns.iter().enumerate() {
            for (a, z) in col.iter().enumerate() {
                out[[a, b]] = *z;
            }
        }
        Ok(out)
    }
}

/// Applies `e^{-t(ξ²+η²)}` to any characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct Smoothed<'a, C: ?Sized> {
    pub inner: &'a C,
    pub time: f64,
}

impl<C: Characteristic + ?Sized> Characteristic for Smoothed<'_, C> {
    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn characteristic(&self, xi: &[f64], eta: &[f64]) -> Result<Array2<Complex64>> {
        let mut chi = self.inner.characteristic(xi, eta)?;
        for ((a, b), z) in chi.indexed_iter_mut() {
            *z *= (-self.time * (xi[a] * xi[a] + eta[b] * eta[b])).exp();
        }
        Ok(chi)
    }
}
