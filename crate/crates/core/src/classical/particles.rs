use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::PositionGrid;
use crate::phase_space::{Atom, PhaseSpaceDensity};
use crate::potential::{mollified_gradient, PotentialSpec};

/// Force `-Ṽ'(x)`, either exact or sampled from a mollified potential.
#[derive(Debug, Clone)]
pub enum ForceField {
    Exact(PotentialSpec),
    /// Samples of `-Ṽ'` on a uniform grid, cubic-interpolated; outside the
    /// sampled range the exact force of `fallback` is used.
    Sampled {
        x_min: f64,
        dx: f64,
        force: Vec<f64>,
        fallback: PotentialSpec,
    },
}

impl ForceField {
    pub fn exact(pot: &PotentialSpec) -> Self {
        Self::Exact(pot.clone())
    }

    /// Field of `e^{εΔ} V` sampled on `grid`; `eps = 0` gives the exact field.
    pub fn mollified(pot: &PotentialSpec, eps: f64, grid: &PositionGrid) -> Result<Self> {
        if eps == 0.0 {
            pot.validate()?;
            return Ok(Self::exact(pot));
        }
        let g = mollified_gradient(pot, eps, grid)?;
        Ok(Self::Sampled {
            x_min: grid.x_min(),
            dx: grid.dx(),
            force: g.into_iter().map(|v| -v).collect(),
            fallback: pot.clone(),
        })
    }

    /// Mollified field on an automatically chosen grid covering `[lo, hi]`
    /// with a margin, at a spacing resolving the heat kernel.
    pub fn mollified_auto(pot: &PotentialSpec, eps: f64, lo: f64, hi: f64) -> Result<Self> {
        if eps == 0.0 {
            return Self::mollified(pot, 0.0, &PositionGrid::new(8, -1.0, 1.0)?);
        }
        let (mut a, mut b) = (lo, hi);
        if let Some((c, d)) = pot.core_interval() {
            a = a.min(c);
            b = b.max(d);
        }
        let margin = 8.0;
        let span = b - a + 2.0 * margin;
        let target_dx = ((2.0 * eps).sqrt() / 8.0).min(1.0 / 64.0);
        let n = ((span / target_dx).ceil() as usize).next_power_of_two().clamp(1024, 1 << 18);
        let grid = PositionGrid::new(n, a - margin, a - margin + span)?;
        Self::mollified(pot, eps, &grid)
    }

    pub fn force(&self, x: f64) -> f64 {
        match self {
            Self::Exact(pot) => pot.force(x),
            Self::Sampled {
                x_min,
                dx,
                force,
                fallback,
            } => {
                let t = (x - x_min) / dx;
                let n = force.len();
                if !(t >= 1.0 && t < (n - 2) as f64) {
                    return fallback.force(x);
                }
                let i = t.floor() as usize;
                let s = t - i as f64;
                let w = cubic_weights(s);
                w[0] * force[i - 1] + w[1] * force[i] + w[2] * force[i + 1] + w[3] * force[i + 2]
            }
        }
    }
}

/// Lagrange weights on nodes `-1, 0, 1, 2` at offset `s ∈ [0, 1)`.
pub(crate) fn cubic_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

fn step_count(dt: f64, t_final: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return config(format!("time step must be positive, got {dt}"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return config(format!("t_final must be non-negative, got {t_final}"));
    }
    if t_final == 0.0 {
        return Ok((0, dt));
    }
    let n = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

/// Kick-drift-kick Störmer–Verlet.
fn verlet(field: &ForceField, mut x: f64, mut p: f64, h: f64) -> (f64, f64) {
    p += 0.5 * h * field.force(x);
    x += h * p;
    p += 0.5 * h * field.force(x);
    (x, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl SampledPath {
    pub fn last(&self) -> (f64, f64) {
        (*self.x.last().expect("non-empty"), *self.p.last().expect("non-empty"))
    }
}

/// Verlet path in the exact field, sampled every step.
pub fn integrate_hamiltonian(x0: f64, p0: f64, pot: &PotentialSpec, dt: f64, t_final: f64) -> Result<SampledPath> {
    pot.validate()?;
    integrate_in_field(x0, p0, &ForceField::exact(pot), dt, t_final, 1)
}

/// Verlet path in any field, keeping every `sample_every`-th step and the end
/// point.
pub fn integrate_in_field(
    x0: f64,
    p0: f64,
    field: &ForceField,
    dt: f64,
    t_final: f64,
    sample_every: usize,
) -> Result<SampledPath> {
    let (steps, h) = step_count(dt, t_final)?;
    let every = sample_every.max(1);
    let mut path = SampledPath {
        times: vec![0.0],
        x: vec![x0],
        p: vec![p0],
    };
    let (mut x, mut p) = (x0, p0);
    for k in 1..=steps {
        (x, p) = verlet(field, x, p, h);
        if !(x.is_finite() && p.is_finite()) {
            return Err(Error::Numerical(format!("trajectory left the finite range at step {k}")));
        }
        if k % every == 0 || k == steps {
            path.times.push(k as f64 * h);
            path.x.push(x);
            path.p.push(p);
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub mass: f64,
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub time: f64,
}

impl ParticleCloud {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return config("particle cloud is empty");
        }
        if particles.iter().any(|q| !(q.mass > 0.0)) {
            return config("particle masses must be positive");
        }
        Ok(Self { particles, time: 0.0 })
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|q| q.mass).sum()
    }

    pub fn to_measure(&self) -> Result<PhaseSpaceDensity> {
        PhaseSpaceDensity::from_atoms(
            self.particles
                .iter()
                .map(|q| Atom {
                    mass: q.mass,
                    x: q.x,
                    p: q.p,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mass,x,p\n");
        for q in &self.particles {
            let _ = writeln!(s, "{:e},{:e},{:e}", q.mass, q.x, q.p);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("mass,x,p") {
            return Err(Error::Format("particle CSV must start with 'mass,x,p'".into()));
        }
        let mut particles = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 2)))
            };
            if cols.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 columns", n + 2)));
            }
            particles.push(Particle {
                mass: parse(cols[0])?,
                x: parse(cols[1])?,
                p: parse(cols[2])?,
            });
        }
        Self::new(particles)
    }
}

/// Moves every particle by Verlet in the (mollified, if `eps_mollify > 0`)
/// field of `pot`.
pub fn transport_particles(
    cloud: &ParticleCloud,
    pot: &PotentialSpec,
    eps_mollify: f64,
    dt: f64,
    t_final: f64,
) -> Result<ParticleCloud> {
    pot.validate()?;
    let lo = cloud.particles.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
    let hi = cloud.particles.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
    let field = ForceField::mollified_auto(pot, eps_mollify, lo, hi)?;
    transport_particles_in(cloud, &field, dt, t_final)
}

pub fn transport_particles_in(cloud: &ParticleCloud, field: &ForceField, dt: f64, t_final: f64) -> Result<ParticleCloud> {
    let (steps, h) = step_count(dt, t_final)?;
    let moved: Result<Vec<Particle>> = cloud
        .particles
        .par_iter()
        .map(|q| {
            let (mut x, mut p) = (q.x, q.p);
            for _ in 0..steps {
                (x, p) = verlet(field, x, p, h);
            }
            if x.is_finite() && p.is_finite() {
                Ok(Particle { mass: q.mass, x, p })
            } else {
                Err(Error::Numerical("particle left the finite range".into()))
            }
        })
        .collect();
    Ok(ParticleCloud {
        particles: moved?,
        time: cloud.time + t_final,
    })
}
