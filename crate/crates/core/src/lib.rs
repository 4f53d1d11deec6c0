//! Simulation of a coherently driven two-level system coupled to a cavity
//! through n-photon Jaynes-Cummings exchange, with cavity and emitter decay.
//!
//! * [`hilbert`]: truncated Fock ⊗ qubit space, operators and states.
//! * [`model`]: Hamiltonians, dressed states, resonance conditions and
//!   effective couplings in closed form.
//! * [`dynamics`]: Schrödinger and master-equation evolution, steady states
//!   and quantum-jump trajectories.
//! * [`observables`]: populations and photon correlation functions.
//! * [`cli`]: configuration, presets and dataset output for the binary.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, Operator, SpaceDims, StateVector, Tls};
pub use model::{Branch, ModelParams};
