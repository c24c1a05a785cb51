//! Simulator for dissipative preparation of the antisymmetric Bell state of
//! two trapped ions sharing a motional mode, with and without conditioning on
//! photodetection of the pumping emission.
//!
//! Module map:
//!
//! - [`qops`]: Hilbert space layout and elementary operators.
//! - [`scheme`]: physical parameters and Lindblad generators (full three-level
//!   model and the model with the temporary level eliminated).
//! - [`evolve`]: RK4 propagation, click-free evolution and steady states.
//! - [`jumps`]: detection-conditioned trajectories and ensembles.
//! - [`analyze`]: fidelity, parameter sweeps and the linear error model.
//! - [`cli`]: configuration and the file-producing subcommands.

pub mod analyze;
pub mod cli;
pub mod error;
pub mod evolve;
pub mod jumps;
mod liouville;
pub mod qops;
pub mod scheme;

pub use error::{Error, Result};
pub use liouville::Superoperator;
