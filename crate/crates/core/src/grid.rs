//! Uniform periodic grids and their discrete Fourier transforms.
//!
//! Every numerical module works on a [`PositionGrid`] (one axis) or a
//! [`PhaseGrid`] (position times momentum). Grids are immutable once built and
//! carry their FFT plans, so they can be shared freely between workers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Error, Result};

/// Plain-data description of a grid, used for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

/// Uniform periodic grid on `[x_min, x_max)` with `n_points` nodes.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct PositionGrid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PositionGrid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return config(format!(
                "grid size must be a power of two >= 8, got {n_points}"
            ));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return config(format!("degenerate interval [{x_min}, {x_max})"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: n_points,
            x_min,
            x_max,
            dx: (x_max - x_min) / n_points as f64,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    /// Symmetric grid `[-half_width, half_width)`.
    pub fn centered(n_points: usize, half_width: f64) -> Result<Self> {
        Self::new(n_points, -half_width, half_width)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_points: self.n,
            x_min: self.x_min,
            x_max: self.x_max,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Spacing of the dual (wavenumber) grid, `2π / extent`.
    pub fn frequency_spacing(&self) -> f64 {
        2.0 * PI / self.extent()
    }

    /// Wavenumbers in standard DFT order: `0, 1, .., n/2-1, -n/2, .., -1`
    /// times the dual spacing.
    pub fn frequencies(&self) -> Vec<f64> {
        let dk = self.frequency_spacing();
        (0..self.n).map(|j| signed_index(j, self.n) as f64 * dk).collect()
    }

    /// Wavenumbers in increasing order, `-n/2 .. n/2-1`.
    pub fn centered_frequencies(&self) -> Vec<f64> {
        let dk = self.frequency_spacing();
        let half = (self.n / 2) as i64;
        (0..self.n as i64).map(|j| (j - half) as f64 * dk).collect()
    }

    /// Largest representable wavenumber magnitude, `π / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Rectangle rule `dx · Σ f_i`, exact for trigonometric polynomials
    /// resolved by the grid.
    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        check_len(self.n, f.len())?;
        Ok(self.dx * f.iter().sum::<f64>())
    }

    /// Unitary forward DFT: `ĉ_k = n^{-1/2} Σ_j c_j e^{-2πi jk/n}`.
    pub fn dft_forward(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, c.len())?;
        let mut buf = c.to_vec();
        self.fft_forward_raw(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(buf)
    }

    /// Unitary inverse DFT, the exact inverse of [`Self::dft_forward`].
    pub fn dft_inverse(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, c.len())?;
        let mut buf = c.to_vec();
        self.fft_inverse_raw(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(buf)
    }

    /// Unnormalized forward transform of every length-`n` chunk of `buf`.
    pub(crate) fn fft_forward_raw(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.n, 0);
        self.forward.process(buf);
    }

    /// Unnormalized inverse transform of every length-`n` chunk of `buf`.
    pub(crate) fn fft_inverse_raw(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.n, 0);
        self.inverse.process(buf);
    }

    /// Applies the Fourier multiplier `m(k)` to a real periodic sample array.
    pub(crate) fn apply_multiplier<F>(&self, f: &[f64], multiplier: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Complex64,
    {
        check_len(self.n, f.len())?;
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_forward_raw(&mut buf);
        for (z, k) in buf.iter_mut().zip(self.frequencies()) {
            *z *= multiplier(k);
        }
        self.fft_inverse_raw(&mut buf);
        let scale = 1.0 / self.n as f64;
        Ok(buf.iter().map(|z| z.re * scale).collect())
    }

    pub fn same_as(&self, other: &PositionGrid) -> bool {
        self.n == other.n && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

impl TryFrom<GridSpec> for PositionGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        Self::new(spec.n_points, spec.x_min, spec.x_max)
    }
}

impl From<PositionGrid> for GridSpec {
    fn from(grid: PositionGrid) -> Self {
        grid.spec()
    }
}

impl fmt::Debug for PositionGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PositionGrid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for PositionGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Maps a DFT index to its signed frequency index.
pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Product grid on phase space. Arrays on it are indexed `[x, p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x: PositionGrid,
    pub p: PositionGrid,
}

impl PhaseGrid {
    pub fn new(x: PositionGrid, p: PositionGrid) -> Self {
        Self { x, p }
    }

    pub fn cell_area(&self) -> f64 {
        self.x.dx() * self.p.dx()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.p.len())
    }

    pub fn same_as(&self, other: &PhaseGrid) -> bool {
        self.x.same_as(&other.x) && self.p.same_as(&other.p)
    }
}

pub fn build_position_grid(n_points: usize, x_min: f64, x_max: f64) -> Result<PositionGrid> {
    PositionGrid::new(n_points, x_min, x_max)
}

pub fn quadrature(f: &[f64], grid: &PositionGrid) -> Result<f64> {
    grid.quadrature(f)
}

pub fn dft_forward(c: &[Complex64], grid: &PositionGrid) -> Result<Vec<Complex64>> {
    grid.dft_forward(c)
}

pub fn dft_inverse(c: &[Complex64], grid: &PositionGrid) -> Result<Vec<Complex64>> {
    grid.dft_inverse(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l2(c: &[Complex64]) -> f64 {
        c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn unit_grid_nodes_and_dual_spacing() {
        let g = build_position_grid(8, 0.0, 8.0).unwrap();
        assert_eq!(g.nodes(), (0..8).map(f64::from).collect::<Vec<_>>());
        assert_eq!(g.dx(), 1.0);
        let k = g.frequencies();
        assert!((k[1] - k[0] - 2.0 * PI / 8.0).abs() < 1e-15);
        let kc = g.centered_frequencies();
        assert!((kc[0] + 4.0 * 2.0 * PI / 8.0).abs() < 1e-14);
        for w in kc.windows(2) {
            assert!((w[1] - w[0] - 2.0 * PI / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_grid() {
        let g = build_position_grid(16, -4.0, 4.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.node(0), -4.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(build_position_grid(10, 0.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(build_position_grid(4, 0.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(build_position_grid(16, 1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn quadrature_examples() {
        let g = build_position_grid(8, 0.0, 8.0).unwrap();
        assert_eq!(quadrature(&[1.0; 8], &g).unwrap(), 8.0);
        let half: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        assert_eq!(quadrature(&half, &g).unwrap(), 4.0);
        assert!(matches!(quadrature(&[1.0; 7], &g), Err(Error::Shape { .. })));

        let g = build_position_grid(64, 0.0, 3.0).unwrap();
        let s: Vec<f64> = g.nodes().iter().map(|x| (2.0 * PI * x / 3.0).sin()).collect();
        // direct summation oracle: sines over a full period cancel pairwise
        let direct: f64 = s.iter().sum::<f64>() * g.dx();
        assert!(quadrature(&s, &g).unwrap().abs() < 1e-12);
        assert!(direct.abs() < 1e-12);
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = build_position_grid(16, 0.0, 1.0).unwrap();
        let mut d = vec![Complex64::new(0.0, 0.0); 16];
        d[0] = Complex64::new(1.0, 0.0);
        let s = dft_forward(&d, &g).unwrap();
        for z in &s {
            assert!((z.norm() - 0.25).abs() < 1e-15);
        }
        assert!(dft_forward(&d[..8], &g).is_err());
    }

    #[test]
    fn parseval_by_direct_summation() {
        let g = build_position_grid(32, 0.0, 1.0).unwrap();
        let c: Vec<Complex64> = (0..32)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()))
            .collect();
        // O(n^2) DFT oracle
        let n = 32.0f64;
        let direct: Vec<Complex64> = (0..32)
            .map(|k| {
                c.iter()
                    .enumerate()
                    .map(|(j, cj)| cj * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n))
                    .sum::<Complex64>()
                    / n.sqrt()
            })
            .collect();
        let fast = dft_forward(&c, &g).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((l2(&c) - l2(&direct)).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_keeps_plans_usable() {
        let g = build_position_grid(16, -2.0, 2.0).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: PositionGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
        let c = vec![Complex64::new(1.0, 0.0); 16];
        assert_eq!(back.dft_forward(&c).unwrap().len(), 16);
        assert!(serde_json::from_str::<PositionGrid>(
            r#"{"n_points":12,"x_min":0.0,"x_max":1.0}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn dft_round_trip_and_parseval(
            exp in 3u32..10,
            seed in proptest::collection::vec(-1.0f64..1.0, 2048),
        ) {
            let n = 1usize << exp;
            let g = build_position_grid(n, -1.0, 2.0).unwrap();
            let c: Vec<Complex64> = (0..n).map(|j| Complex64::new(seed[2 * j], seed[2 * j + 1])).collect();
            let f = dft_forward(&c, &g).unwrap();
            let back = dft_inverse(&f, &g).unwrap();
            let norm = l2(&c).max(1e-300);
            let err = c.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * norm);
            prop_assert!((l2(&f) - l2(&c)).abs() <= 1e-12 * norm.max(1.0));
        }

        #[test]
        fn quadrature_is_positive_and_linear(
            a in proptest::collection::vec(0.0f64..10.0, 16),
            b in proptest::collection::vec(-10.0f64..10.0, 16),
            s in -3.0f64..3.0,
        ) {
            let g = build_position_grid(16, -1.0, 1.0).unwrap();
            prop_assert!(quadrature(&a, &g).unwrap() >= 0.0);
            let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
            let lhs = quadrature(&comb, &g).unwrap();
            let rhs = quadrature(&a, &g).unwrap() + s * quadrature(&b, &g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
