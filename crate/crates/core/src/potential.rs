//! Potentials, their heat-semigroup mollifications and regularity diagnostics.
//!
//! The rough-core potential is `-|x|^{1+θ}` on `[-r, r]`, continued C¹ by a
//! confining quartic tail. No Coulomb part is ever present, so the BV part
//! `U_b` of every catalog potential is the potential itself.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::grid::PositionGrid;

/// Convention stamped into diagnostics: the BV part is the whole potential.
pub const BV_PART_CONVENTION: &str = "U_b = V (no Coulomb part)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `V = 0`.
    Free,
    Constant { value: f64 },
    /// `V = x²/2`.
    Harmonic,
    /// `V = a x²/2 + b x⁴`.
    Anharmonic { quadratic: f64, quartic: f64 },
    /// `-|x|^{1+θ}` on the core `[-r, r]`, then
    /// `-r^{1+θ} - (1+θ) r^θ (|x|-r) + q (|x|-r)⁴`.
    RoughPower {
        theta: f64,
        core_radius: f64,
        quartic: f64,
    },
    /// `A exp(-((x-c)/w)²)`.
    Gaussian { amplitude: f64, width: f64, center: f64 },
    /// `A cos(k x)`.
    Cosine { amplitude: f64, wavenumber: f64 },
    /// Uniform samples starting at `x_min` with spacing `dx`, linearly
    /// interpolated and held constant outside the sampled range.
    Custom { x_min: f64, dx: f64, samples: Vec<f64> },
}

impl PotentialSpec {
    /// Rough core with the default tail (`r = 1`, `q = 1`).
    pub fn rough_power(theta: f64) -> Self {
        Self::RoughPower {
            theta,
            core_radius: 1.0,
            quartic: 1.0,
        }
    }

    pub fn custom_on(grid: &PositionGrid, samples: Vec<f64>) -> Self {
        Self::Custom {
            x_min: grid.x_min(),
            dx: grid.dx(),
            samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RoughPower {
                theta,
                core_radius,
                quartic,
            } => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return config(format!("rough exponent θ must lie in (0,1), got {theta}"));
                }
                if !(*core_radius > 0.0) || !(*quartic > 0.0) {
                    return config("rough potential needs positive core radius and quartic tail");
                }
            }
            Self::Anharmonic { quartic, .. } if *quartic < 0.0 => {
                return config("anharmonic quartic coefficient must be non-negative");
            }
            Self::Gaussian { width, .. } if !(*width > 0.0) => {
                return config("Gaussian potential width must be positive");
            }
            Self::Custom { dx, samples, .. } if !(*dx > 0.0) || samples.len() < 2 => {
                return config("custom potential needs at least two samples and dx > 0");
            }
            _ => {}
        }
        Ok(())
    }

    /// Interval on which the closed form must be resolved by any grid.
    pub fn core_interval(&self) -> Option<(f64, f64)> {
        match self {
            Self::RoughPower { core_radius, .. } => Some((-core_radius, *core_radius)),
            _ => None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Free => 0.0,
            Self::Constant { value } => *value,
            Self::Harmonic => 0.5 * x * x,
            Self::Anharmonic { quadratic, quartic } => 0.5 * quadratic * x * x + quartic * x.powi(4),
            Self::RoughPower {
                theta,
                core_radius: r,
                quartic: q,
            } => {
                let a = x.abs();
                if a <= *r {
                    -a.powf(1.0 + theta)
                } else {
                    let d = a - r;
                    -r.powf(1.0 + theta) - (1.0 + theta) * r.powf(*theta) * d + q * d.powi(4)
                }
            }
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp()
            }
            Self::Cosine {
                amplitude,
                wavenumber,
            } => amplitude * (wavenumber * x).cos(),
            Self::Custom { x_min, dx, samples } => {
                let t = (x - x_min) / dx;
                if t <= 0.0 {
                    samples[0]
                } else if t >= (samples.len() - 1) as f64 {
                    samples[samples.len() - 1]
                } else {
                    let i = t.floor() as usize;
                    let f = t - i as f64;
                    samples[i] * (1.0 - f) + samples[i + 1] * f
                }
            }
        }
    }

    /// `V'(x)`. The rough core uses the symmetric value `V'(0) = 0`.
    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            Self::Free | Self::Constant { .. } => 0.0,
            Self::Harmonic => x,
            Self::Anharmonic { quadratic, quartic } => quadratic * x + 4.0 * quartic * x.powi(3),
            Self::RoughPower {
                theta,
                core_radius: r,
                quartic: q,
            } => {
                if x == 0.0 {
                    return 0.0;
                }
                let a = x.abs();
                let d_abs = if a <= *r {
                    -(1.0 + theta) * a.powf(*theta)
                } else {
                    -(1.0 + theta) * r.powf(*theta) + 4.0 * q * (a - r).powi(3)
                };
                x.signum() * d_abs
            }
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let u = (x - center) / width;
                -2.0 * u / width * amplitude * (-u * u).exp()
            }
            Self::Cosine {
                amplitude,
                wavenumber,
            } => -amplitude * wavenumber * (wavenumber * x).sin(),
            Self::Custom { dx, .. } => (self.value(x + dx) - self.value(x - dx)) / (2.0 * dx),
        }
    }

    /// Classical force `-V'(x)`.
    pub fn force(&self, x: f64) -> f64 {
        -self.gradient(x)
    }

    pub fn name(&self) -> String {
        match self {
            Self::Free => "free".into(),
            Self::Constant { value } => format!("constant({value})"),
            Self::Harmonic => "harmonic".into(),
            Self::Anharmonic { quadratic, quartic } => format!("anharmonic({quadratic},{quartic})"),
            Self::RoughPower {
                theta,
                core_radius,
                quartic,
            } => format!("rough_power(theta={theta},r={core_radius},q={quartic})"),
            Self::Gaussian {
                amplitude, width, ..
            } => format!("gaussian({amplitude},{width})"),
            Self::Cosine {
                amplitude,
                wavenumber,
            } => format!("cosine({amplitude},{wavenumber})"),
            Self::Custom { samples, .. } => format!("custom({} samples)", samples.len()),
        }
    }

    pub fn hash(&self) -> String {
        crate::hash_json(self)
    }
}

/// Pointwise samples of the potential on `grid`.
pub fn evaluate(pot: &PotentialSpec, grid: &PositionGrid) -> Result<Vec<f64>> {
    pot.validate()?;
    if let Some((lo, hi)) = pot.core_interval() {
        if lo < grid.x_min() || hi > grid.x_max() {
            return config(format!(
                "core interval [{lo}, {hi}] exceeds grid domain [{}, {})",
                grid.x_min(),
                grid.x_max()
            ));
        }
    }
    Ok(grid.nodes().into_iter().map(|x| pot.value(x)).collect())
}

/// `e^{εΔ} V` on the grid, via the Fourier multiplier `e^{-ε k²}`.
pub fn mollify(pot: &PotentialSpec, eps: f64, grid: &PositionGrid) -> Result<Vec<f64>> {
    let samples = evaluate(pot, grid)?;
    mollify_samples(&samples, eps, grid)
}

pub fn mollify_samples(samples: &[f64], eps: f64, grid: &PositionGrid) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return config(format!("mollification time must be positive, got {eps}"));
    }
    grid.apply_multiplier(samples, |k| Complex64::new((-eps * k * k).exp(), 0.0))
}

/// `∂x e^{εΔ} V` on the grid; `eps = 0` returns the exact gradient samples.
pub fn mollified_gradient(pot: &PotentialSpec, eps: f64, grid: &PositionGrid) -> Result<Vec<f64>> {
    if eps == 0.0 {
        evaluate(pot, grid)?;
        return Ok(grid.nodes().into_iter().map(|x| pot.gradient(x)).collect());
    }
    let samples = evaluate(pot, grid)?;
    if !(eps > 0.0) {
        return config(format!("mollification time must be non-negative, got {eps}"));
    }
    grid.apply_multiplier(&samples, |k| Complex64::new(0.0, k) * (-eps * k * k).exp())
}

/// Shell-integral diagnostics of `|V̂|` against the bounds
/// `∫_{a<|S|<b} |V̂(S)| |S|^m dS ≤ C |b^{m-1-θ} - a^{m-1-θ}|`, `m = 0, 1, 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierConditionReport {
    pub shells: Vec<(f64, f64)>,
    /// `shell_integrals[m][j]` for shell `j`.
    pub shell_integrals: Vec<Vec<f64>>,
    /// Least-squares constant per `m` (log space, exponent held fixed).
    pub fitted_c: Vec<f64>,
    pub theta_used: f64,
    pub slack: f64,
    /// `passes[m][j]`.
    pub passes: Vec<Vec<bool>>,
    /// Discrete value of `∫ |V̂(S)| S²/(1+S²) dS`.
    pub weighted_integral: f64,
    pub weighted_integral_converges: bool,
    pub bv_part: String,
}

impl FourierConditionReport {
    pub fn all_pass(&self) -> bool {
        self.weighted_integral_converges && self.passes.iter().flatten().all(|&p| p)
    }
}

pub const DEFAULT_FOURIER_SLACK: f64 = 3.0;

pub fn check_fourier_conditions(
    pot: &PotentialSpec,
    grid: &PositionGrid,
    theta: f64,
) -> Result<FourierConditionReport> {
    check_fourier_conditions_with(pot, grid, theta, DEFAULT_FOURIER_SLACK)
}

/// Smooth taper equal to one away from the boundary, vanishing with all
/// derivatives at the ends. Removes the periodic-extension kink of confining
/// potentials, which would otherwise dominate the high shells.
fn taper(grid: &PositionGrid, x: f64) -> f64 {
    let w = grid.extent() / 8.0;
    let step = |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / t).exp();
            let b = (-1.0 / (1.0 - t)).exp();
            a / (a + b)
        }
    };
    step((x - grid.x_min()) / w) * step((grid.x_max() - x) / w)
}

/// `|V̂(S)|` with the continuous-transform normalization
/// `V̂(S) ≈ dx Σ χ(x_j) V(x_j) e^{-i S x_j}`, on the DFT frequencies.
pub fn tapered_spectrum(pot: &PotentialSpec, grid: &PositionGrid) -> Result<Vec<f64>> {
    let samples = evaluate(pot, grid)?;
    let mut buf: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(&samples)
        .map(|(&x, &v)| Complex64::new(v * taper(grid, x), 0.0))
        .collect();
    grid.fft_forward_raw(&mut buf);
    Ok(buf.iter().map(|z| z.norm() * grid.dx()).collect())
}

pub fn check_fourier_conditions_with(
    pot: &PotentialSpec,
    grid: &PositionGrid,
    theta: f64,
    slack: f64,
) -> Result<FourierConditionReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return config(format!("θ must lie in (0,1), got {theta}"));
    }
    let spectrum = tapered_spectrum(pot, grid)?;
    let freqs = grid.frequencies();
    let dk = grid.frequency_spacing();

    // dyadic shells with at least four dual points, below half the Nyquist
    // wavenumber where aliasing stays negligible
    let mut shells = Vec::new();
    let mut j = (4.0 * dk).log2().ceil() as i32;
    while 2f64.powi(j + 1) <= grid.nyquist() / 2.0 {
        shells.push((2f64.powi(j), 2f64.powi(j + 1)));
        j += 1;
    }
    if shells.len() < 2 {
        return config("grid too coarse for a dyadic shell analysis");
    }

    let mut shell_integrals = vec![vec![0.0; shells.len()]; 3];
    for (s, &amp) in freqs.iter().zip(&spectrum) {
        let a = s.abs();
        for (idx, &(lo, hi)) in shells.iter().enumerate() {
            if a > lo && a <= hi {
                for (m, row) in shell_integrals.iter_mut().enumerate() {
                    row[idx] += amp * a.powi(m as i32) * dk;
                }
            }
        }
    }

    let peak = spectrum.iter().cloned().fold(0.0, f64::max);
    let weighted: Vec<f64> = shells
        .iter()
        .map(|&(lo, hi)| {
            freqs
                .iter()
                .zip(&spectrum)
                .filter(|(s, _)| s.abs() > lo && s.abs() <= hi)
                .map(|(s, amp)| amp * s * s / (1.0 + s * s) * dk)
                .sum()
        })
        .collect();
    let weighted_integral: f64 = freqs
        .iter()
        .zip(&spectrum)
        .map(|(s, amp)| amp * s * s / (1.0 + s * s) * dk)
        .sum();

    if peak == 0.0 {
        return Ok(FourierConditionReport {
            shells: shells.clone(),
            shell_integrals,
            fitted_c: vec![0.0; 3],
            theta_used: theta,
            slack,
            passes: vec![vec![true; shells.len()]; 3],
            weighted_integral: 0.0,
            weighted_integral_converges: true,
            bv_part: BV_PART_CONVENTION.into(),
        });
    }

    // values below this are round-off and count as zero
    let floor = 1e-13 * peak;
    let calib = shells.len().div_ceil(2);
    let mut fitted_c = Vec::with_capacity(3);
    let mut passes = Vec::with_capacity(3);
    for (m, integrals) in shell_integrals.iter().enumerate() {
        let e = m as f64 - 1.0 - theta;
        let ratios: Vec<f64> = shells
            .iter()
            .zip(integrals)
            .map(|(&(a, b), &i)| {
                if i <= floor * a {
                    0.0
                } else {
                    i / (b.powf(e) - a.powf(e)).abs()
                }
            })
            .collect();
        let logs: Vec<f64> = ratios.iter().filter(|r| **r > 0.0).map(|r| r.ln()).collect();
        fitted_c.push(if logs.is_empty() {
            0.0
        } else {
            (logs.iter().sum::<f64>() / logs.len() as f64).exp()
        });
        let reference = ratios[..calib].iter().cloned().fold(0.0, f64::max);
        passes.push(ratios.iter().map(|&r| r <= slack * reference).collect());
    }

    // the weighted integral converges when the high-shell contributions decay
    let upper: Vec<(f64, f64)> = weighted[calib - 1..]
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > floor)
        .map(|(i, w)| (i as f64, w.ln()))
        .collect();
    let weighted_integral_converges = upper.len() < 2 || least_squares_slope(&upper) < 0.0;

    Ok(FourierConditionReport {
        shells,
        shell_integrals,
        fitted_c,
        theta_used: theta,
        slack,
        passes,
        weighted_integral,
        weighted_integral_converges,
        bv_part: BV_PART_CONVENTION.into(),
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvDiagnostic {
    /// `Σ |g_{i+1} - g_i|` of the sampled gradient.
    pub total_variation: f64,
    /// `max |g_i| / (1 + |x_i|)`.
    pub growth_bound: f64,
}

pub fn bv_gradient_diagnostic(pot: &PotentialSpec, grid: &PositionGrid) -> BvDiagnostic {
    let xs = grid.nodes();
    let g: Vec<f64> = xs.iter().map(|&x| pot.gradient(x)).collect();
    let total_variation = g.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let growth_bound = xs
        .iter()
        .zip(&g)
        .map(|(x, gi)| gi.abs() / (1.0 + x.abs()))
        .fold(0.0, f64::max);
    BvDiagnostic {
        total_variation,
        growth_bound,
    }
}

/// Exact heat-kernel width: `e^{εΔ}` convolves with a Gaussian of variance `2ε`.
pub fn heat_kernel(eps: f64, y: f64) -> f64 {
    (-(y * y) / (4.0 * eps)).exp() / (4.0 * PI * eps).sqrt()
}
