//! Simulation of monitored quantum trees with U(1) and SU(2) symmetry.
//!
//! * [`u1`]: collapse trees of charged qubits with neutral qudits, evolved
//!   with the pool method.
//! * [`classical`]: the infinite-qudit limit as percolation plus a
//!   stochastic charge walk.
//! * [`wavefront`]: travelling-wave velocities and critical points.
//! * [`su2`]: exact enumeration of the SU(2) expansion-tree ensemble.
//! * [`replica`]: forced and replica-weighted outcome distributions.

pub mod classical;
pub mod error;
pub mod output;
pub mod par;
pub mod replica;
pub mod rng;
pub mod stats;
pub mod su2;
pub mod u1;
pub mod wavefront;

pub use error::{Error, Result};
pub use par::Execution;
