//! Simulation and analysis of a circuit-QED Set-Reset flip-flop memory: two
//! driven resonators that block each other through qubit-mediated
//! photon-number-dependent couplings, switched by π-pulses on two
//! three-level transmon "transistors".
//!
//! - [`hilbert`]: tensor-product space, sparse operators and states
//! - [`device`]: device Hamiltonian, jump operators and pulse schedule
//! - [`model`], [`trajectory`], [`ensemble`]: Monte Carlo wave-function engine
//! - [`master`]: dense master-equation and steady-state solvers for validation
//! - [`analysis`]: memory-time estimates, exponential fits, switch detection

pub mod analysis;
pub mod device;
pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod master;
pub mod model;
pub mod trajectory;

pub use error::{Error, Result};
