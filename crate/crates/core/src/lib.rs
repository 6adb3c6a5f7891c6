//! Canonical moment dynamics of tunneling ionization.
//!
//! A quantum state is tracked through its expectation values and
//! second-order fluctuations on an extended phase space. The fluctuations
//! enter through an all-orders effective potential (a symmetric corner
//! average of the classical potential), which lowers the classical barrier
//! and turns tunneling into ordinary Hamiltonian motion. On top of the
//! flow, several tunneling-time criteria are implemented and compared:
//! the interaction-free energy condition, the classical back-propagation
//! momentum condition, static traversal and WKB-like integral times, and
//! two criteria built from the transverse fluctuations.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod integrator;
pub mod model;
pub mod output;
pub mod phase_space;
pub mod pulse;
pub mod scenario;

pub use error::{Error, Result};
