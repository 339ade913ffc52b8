//! Soft-pulse dynamical decoupling: pulse shapes, self-refocusing pulse
//! design, average-Hamiltonian expansions and exact propagation of a qubit
//! coupled to a bath or a cavity mode.

pub mod algebra;
pub mod cli;
pub mod designer;
pub mod error;
pub mod metrics;
pub mod propagate;
pub mod sequences;
pub mod shapes;

pub use error::{Error, Result};
