//! Finite spin-chain laboratory for quantum energy teleportation (QET) and
//! quantum energy distribution (QED).
//!
//! The crate is `no_std` with `alloc`. It contains:
//!
//! * [`chain`]: transverse-field Ising chains with calibrated energy
//!   densities, ground states and expectation values,
//! * [`protocol`]: measurement/feedback protocols with full energy
//!   bookkeeping and the impersonation adversary,
//! * [`cooling`]: the supplier's best local cooling and its residual energy,
//! * [`analytic`]: infinite-chain correlators `G(n)`, Toeplitz determinants
//!   `Δ(n)` and the closed-form energies at and off criticality,
//! * [`netsim`]: a deterministic message-passing harness running the
//!   distribution protocol between keyed and unkeyed parties.
//!
//! Basis encoding is little-endian: site `n` is bit `n` of the basis index,
//! and bit value `0` is spin up (`σ^z = +1`).

#![no_std]
// std float methods shadow `Float` in unit-test builds
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod analytic;
pub mod chain;
pub mod cooling;
mod error;
pub mod linalg;
pub mod netsim;
pub mod operator;
pub mod optimize;
pub mod pauli;
pub mod protocol;
pub mod state;

pub use error::{Error, Result};

pub use chain::{Boundary, ChainModel, GroundState, SolverConfig};
pub use operator::{ChainOperator, Mat2};
pub use pauli::{PauliString, UnitVector};
pub use protocol::{PartyConfig, PlacementRules, ProtocolReport, Role};
pub use state::{QuantumState, StateVector};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Largest chain supported by default (`2^20` amplitudes).
pub const DEFAULT_MAX_SITES: usize = 20;

pub(crate) mod prelude {
    pub use alloc::borrow::ToOwned;
    pub use alloc::format;
    pub use alloc::string::String;
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    pub use num_traits::Float;

    pub use crate::C64;
}
