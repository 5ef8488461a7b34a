//! Row-wise spectral kernels on phase-space arrays.
//!
//! Arrays are stored `[x][p]`, so a row is the momentum axis at fixed `x`.
//! Operations along `x` go through a transpose.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::{PhaseGrid, PositionGrid};

pub(crate) fn to_complex(values: &Array2<f64>) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

pub(crate) fn real_part(buf: &[Complex64], shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(shape, buf.iter().map(|z| z.re).collect()).expect("shape matches buffer")
}

pub(crate) fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    const B: usize = 32;
    let mut dst = vec![Complex64::default(); rows * cols];
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    dst
}

/// Transforms every row, multiplies row `r` by `table[r]` (or by a single
/// shared row when the table has one row), and transforms back.
pub(crate) fn filter_rows(buf: &mut [Complex64], axis: &PositionGrid, table: &[Complex64]) {
    let n = axis.len();
    let shared = table.len() == n;
    buf.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        axis.fft_forward_raw(row);
        let factors = if shared { table } else { &table[r * n..(r + 1) * n] };
        row.iter_mut().zip(factors).for_each(|(z, f)| *z *= f);
        axis.fft_inverse_raw(row);
    });
}

/// Same as [`filter_rows`] but along the `x` axis of an `[x][p]` buffer.
pub(crate) fn filter_columns(buf: &mut Vec<Complex64>, grid: &PhaseGrid, table: &[Complex64]) {
    let (nx, np) = grid.shape();
    let mut t = transpose(buf, nx, np);
    filter_rows(&mut t, &grid.x, table);
    *buf = transpose(&t, np, nx);
}

/// Unit-modulus phase factor, made real at the unpaired Nyquist index so that
/// real inputs stay real.
pub(crate) fn phase_factor(phase: f64, j: usize, n: usize, scale: f64) -> Complex64 {
    if j == n / 2 {
        Complex64::new(scale * phase.cos(), 0.0)
    } else {
        Complex64::from_polar(scale, phase)
    }
}

/// Heat multiplier `e^{-t k²}` along one axis, normalization included.
pub(crate) fn heat_row(axis: &PositionGrid, time: f64) -> Vec<Complex64> {
    let scale = 1.0 / axis.len() as f64;
    axis.frequencies()
        .iter()
        .map(|k| Complex64::new(scale * (-time * k * k).exp(), 0.0))
        .collect()
}

/// Strang splitting for phase-space transport of the form
/// `∂t W + v(p) ∂x W + (kick along p) = 0`, arranged kick-drift-kick.
///
/// The drift shifts each `p`-row in `x` by `v(p) h`. The kick multiplies the
/// Fourier transform along `p` at fixed `x_i` by `e^{i φ(x_i, κ)}`, where `κ`
/// is the wavenumber dual to `p` and `φ` is the phase for a full step. A
/// classical force `F` corresponds to `φ = -h κ F(x)`.
pub(crate) struct SplitFlow {
    grid: PhaseGrid,
    drift: Vec<Complex64>,
    kick_half: Vec<Complex64>,
    kick_full: Vec<Complex64>,
}

impl SplitFlow {
    pub(crate) fn new<V, K>(grid: &PhaseGrid, h: f64, velocity: V, kick_phase: K) -> Self
    where
        V: Fn(f64) -> f64,
        K: Fn(usize, f64) -> f64 + Sync,
    {
        let (nx, np) = grid.shape();
        let xi = grid.x.frequencies();
        let kappa = grid.p.frequencies();
        let sx = 1.0 / nx as f64;
        let sp = 1.0 / np as f64;
        let mut drift = Vec::with_capacity(nx * np);
        for p in grid.p.nodes() {
            let v = velocity(p);
            for (m, &k) in xi.iter().enumerate() {
                drift.push(phase_factor(-k * v * h, m, nx, sx));
            }
        }
        let mut kick_half = vec![Complex64::default(); nx * np];
        let mut kick_full = vec![Complex64::default(); nx * np];
        kick_half
            .par_chunks_mut(np)
            .zip(kick_full.par_chunks_mut(np))
            .enumerate()
            .for_each(|(i, (half, full))| {
                for m in 0..np {
                    let phi = kick_phase(i, kappa[m]);
                    half[m] = phase_factor(phi / 2.0, m, np, sp);
                    full[m] = phase_factor(phi, m, np, sp);
                }
            });
        Self {
            grid: grid.clone(),
            drift,
            kick_half,
            kick_full,
        }
    }

    pub(crate) fn run(&self, values: &Array2<f64>, steps: usize) -> Array2<f64> {
        if steps == 0 {
            return values.clone();
        }
        let mut buf = to_complex(values);
        filter_rows(&mut buf, &self.grid.p, &self.kick_half);
        for step in 0..steps {
            filter_columns(&mut buf, &self.grid, &self.drift);
            let table = if step + 1 == steps { &self.kick_half } else { &self.kick_full };
            filter_rows(&mut buf, &self.grid.p, table);
        }
        real_part(&buf, self.grid.shape())
    }
}
