//! Quantum-critical scaling of resonantly driven Rydberg gases.
//!
//! * [`geometry`]: frozen random ensembles in a periodic box and their van der Waals table.
//! * [`basis`], [`dynamics`], [`observables`]: exact dynamics on the energy-truncated Hilbert space.
//! * [`meanfield`]: the self-consistent critical theory and its exponents.
//! * [`master`]: the nonlinear second-order time-convolutionless master equation.
//! * [`analysis`]: saturation averages, disorder statistics and power-law fits.

pub mod analysis;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod master;
pub mod meanfield;
pub mod observables;

pub use error::{Error, Result};
