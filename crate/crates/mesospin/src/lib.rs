//! Exact numerical simulator for entangling two uncoupled spin qubits
//! through an intermediate mesoscopic spin system (MSS).
//!
//! The crate builds the spin Hamiltonians on small lattices, runs the two
//! magnification circuits that correlate a target qubit with the collective
//! magnetization of its half of the MSS, models the coarse-grained
//! collective measurement as a phase-function POVM, and computes the
//! entanglement and distinctness quantities of the protocol — exactly for
//! up to 20 spins per half, and through a binomial spectral model beyond.
//!
//! See the `book/` guide for a narrative walk-through of each piece.

pub mod entanglement;
pub mod error;
pub mod hamiltonian;
pub mod largescale;
pub mod lattice;
pub mod linalg;
pub mod magnification;
pub mod measurement;
pub mod parallel;
pub mod propagator;
pub mod spectra;
pub mod state;

pub use error::{Error, Result};
