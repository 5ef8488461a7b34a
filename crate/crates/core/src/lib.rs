//! Numerical semiclassical analysis on one-dimensional phase space.
//!
//! The crate propagates ε-scaled quantum states, turns them into Wigner and
//! Husimi densities, transports classical densities along (possibly
//! non-unique) Hamiltonian flows of rough potentials, and measures how far the
//! two pictures are apart as ε → 0.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod grid;
pub mod gridio;
pub mod harness;
pub mod initial_data;
pub mod metrics;
pub mod phase_space;
pub mod potential;
pub mod quantum;

mod phase_ops;

pub use error::{Error, Result};
pub use grid::{PhaseGrid, PositionGrid};
pub use phase_space::PhaseSpaceDensity;
pub use potential::PotentialSpec;
pub use quantum::{DensityEnsemble, PropagatorConfig, WaveFunction};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical JSON form of `value`.
pub(crate) fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(&json))
}
