//! Classical dynamics: closed-form escape branches of the rough core,
//! Störmer–Verlet trajectories and particle clouds, and Liouville transport
//! of phase-space densities.

mod branches;
mod liouville;
mod particles;

pub use branches::{branch_constants, branch_family, core_force, BranchSign, TrajectoryBranch, MAX_ATLAS_THETA};
pub use liouville::{liouville_semi_lagrangian, liouville_with, Interpolation, LiouvilleConfig};
pub use particles::{
    integrate_hamiltonian, integrate_in_field, transport_particles, transport_particles_in, ForceField, Particle,
    ParticleCloud, SampledPath,
};
