use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSign {
    Plus,
    Minus,
    Rest,
}

/// One solution of `Ẋ = P`, `Ṗ = (1+θ)|X|^θ sgn X` leaving the origin at
/// time `t0`: `X = ±c0 (t-t0)^ν`, `P = ±c0 ν (t-t0)^{ν-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBranch {
    pub sign: BranchSign,
    pub t0: f64,
    pub theta: f64,
    pub c0: f64,
    pub nu: f64,
}

/// Largest θ the branch atlas accepts; ν = 2/(1-θ) blows up as θ → 1.
pub const MAX_ATLAS_THETA: f64 = 0.95;

/// `(c0, ν)` with `ν = 2/(1-θ)` and `c0 = ((1-θ)²/2)^{1/(1-θ)}`.
pub fn branch_constants(theta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&theta) {
        return config(format!("θ must lie in [0, 1), got {theta}"));
    }
    let nu = 2.0 / (1.0 - theta);
    let c0 = ((1.0 - theta).powi(2) / 2.0).powf(1.0 / (1.0 - theta));
    Ok((c0, nu))
}

/// `-V'(x)` for `V = -|x|^{1+θ}`, with the symmetric value 0 at the origin.
pub fn core_force(theta: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (1.0 + theta) * x.abs().powf(theta) * x.signum()
    }
}

impl TrajectoryBranch {
    pub fn new(theta: f64, sign: BranchSign, t0: f64) -> Result<Self> {
        let (c0, nu) = branch_constants(theta)?;
        if !(t0 >= 0.0 && t0.is_finite()) {
            return config(format!("branch delay must be non-negative, got {t0}"));
        }
        Ok(Self {
            sign,
            t0,
            theta,
            c0,
            nu,
        })
    }

    pub fn state(&self, t: f64) -> (f64, f64) {
        let s = match self.sign {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
            BranchSign::Rest => return (0.0, 0.0),
        };
        if t <= self.t0 {
            return (0.0, 0.0);
        }
        let tau = t - self.t0;
        (s * self.c0 * tau.powf(self.nu), s * self.c0 * self.nu * tau.powf(self.nu - 1.0))
    }

    /// Relative residuals of `Ẋ = P` and `Ṗ = -V'(X)` at `t`, with central
    /// differences of step `h`.
    pub fn residual(&self, t: f64, h: f64) -> (f64, f64) {
        let (x, p) = self.state(t);
        let (xm, pm) = self.state(t - h);
        let (xp, pp) = self.state(t + h);
        let xdot = (xp - xm) / (2.0 * h);
        let pdot = (pp - pm) / (2.0 * h);
        (relative(xdot, p), relative(pdot, core_force(self.theta, x)))
    }

    pub fn label(&self) -> String {
        match self.sign {
            BranchSign::Plus => format!("plus_t0={}", self.t0),
            BranchSign::Minus => format!("minus_t0={}", self.t0),
            BranchSign::Rest => "rest".into(),
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn branch_family(theta: f64, signs_and_delays: &[(BranchSign, f64)]) -> Result<Vec<TrajectoryBranch>> {
    signs_and_delays
        .iter()
        .map(|&(s, t0)| TrajectoryBranch::new(theta, s, t0))
        .collect()
}
