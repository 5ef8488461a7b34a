//! Direct evolution of a phase-space density under the quantum Liouville
//! (Moyal) equation.
//!
//! For a mixed state with a smooth Wigner function the von Neumann equation
//! reads, after a Fourier transform in momentum (`p → y`),
//!
//! ```text
//! ∂t Z = -(i/ε) [V(x + εy/2) - V(x - εy/2)] Z
//! ```
//!
//! plus the free drift. The drift `∂t W + 2α p ∂x W = 0` is solved exactly by a Fourier shift of
//! each momentum row; the potential part is a pointwise phase in `(x, y)`.
//! Both substeps are exact, so the only error is the Strang splitting error.
//! Cost per step is `O(Nx Np log(Nx Np))` independently of how many pure
//! states the density would need.

use crate::error::Result;
use crate::phase_ops::SplitFlow;
use crate::phase_space::{DensityKind, PhaseSpaceDensity};
use crate::potential::PotentialSpec;

use super::{Propagation, PropagatorConfig};

pub fn propagate_wigner(
    w0: &PhaseSpaceDensity,
    eps: f64,
    pot: &PotentialSpec,
    cfg: &PropagatorConfig,
) -> Result<Propagation<PhaseSpaceDensity>> {
    cfg.validate()?;
    pot.validate()?;
    if !(eps > 0.0) {
        return crate::error::config(format!("ε must be positive, got {eps}"));
    }
    let (grid, values) = w0.grid_parts()?;
    let (steps, h) = cfg.steps();
    if steps == 0 {
        return Ok(Propagation {
            state: w0.clone(),
            steps,
            warnings: Vec::new(),
        });
    }
    let x = grid.x.nodes();
    let alpha = cfg.alpha;
    // with y = -κ the kick factor e^{-i h ΔV / ε} becomes
    // e^{i h [V(x + εκ/2) - V(x - εκ/2)] / ε}
    let flow = SplitFlow::new(
        grid,
        h,
        |p| 2.0 * alpha * p,
        |i, kappa| {
            let s = eps * kappa / 2.0;
            h * (pot.value(x[i] + s) - pot.value(x[i] - s)) / eps
        },
    );
    let out = flow.run(values, steps);
    let state = PhaseSpaceDensity::from_grid(grid.clone(), out, DensityKind::Wigner)?;
    Ok(Propagation {
        state: state.with_kind(w0.kind()),
        steps,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_position_grid;
    use crate::initial_data::coherent_state;
    use crate::phase_space::{l2_norm, wigner, wigner_ensemble};
    use crate::quantum::{propagate, propagate_ensemble, DensityEnsemble};

    fn l2_diff(a: &PhaseSpaceDensity, b: &PhaseSpaceDensity) -> f64 {
        let d = a.values().unwrap() - b.values().unwrap();
        (d.iter().map(|v| v * v).sum::<f64>() * a.grid().unwrap().cell_area()).sqrt()
    }

    #[test]
    fn matches_pure_state_propagation() {
        let g = build_position_grid(512, -6.0, 6.0).unwrap();
        let eps = 0.1;
        let psi = coherent_state(-0.8, 0.6, eps, &g).unwrap();
        let w0 = wigner(&psi).unwrap();
        for pot in [
            PotentialSpec::Harmonic,
            PotentialSpec::Anharmonic {
                quadratic: 1.0,
                quartic: 0.1,
            },
            PotentialSpec::rough_power(0.5),
        ] {
            let cfg = PropagatorConfig::new(2e-3, 1.0);
            let a = propagate_wigner(&w0, eps, &pot, &cfg).unwrap().state;
            let b = wigner(&propagate(&psi, &pot, &cfg).unwrap().state).unwrap();
            let rel = l2_diff(&a, &b) / l2_norm(&b).unwrap();
            assert!(rel < 1e-6, "{} {rel}", pot.name());
            assert!((a.total_mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_ensemble_propagation() {
        let g = build_position_grid(512, -6.0, 6.0).unwrap();
        let eps = 0.1;
        let members = vec![
            (0.5, coherent_state(-1.0, 0.0, eps, &g).unwrap()),
            (0.3, coherent_state(0.5, 0.5, eps, &g).unwrap()),
            (0.2, coherent_state(0.2, -0.7, eps, &g).unwrap()),
        ];
        let d = DensityEnsemble::new(members).unwrap();
        let pot = PotentialSpec::rough_power(0.5);
        let cfg = PropagatorConfig::new(2e-3, 0.8);
        let a = propagate_wigner(&wigner_ensemble(&d).unwrap(), eps, &pot, &cfg).unwrap().state;
        let b = wigner_ensemble(&propagate_ensemble(&d, &pot, &cfg).unwrap().state).unwrap();
        assert!(l2_diff(&a, &b) / l2_norm(&b).unwrap() < 1e-6);
    }
}
