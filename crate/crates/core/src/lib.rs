//! Statevector simulation and analysis toolkit for teleporting a two-qubit
//! graph state around a regenerating ring of qubits (a "hamster wheel").
//!
//! The crate is layered bottom-up:
//!
//! * [`sim`] is a dense statevector engine with the gate set, forced or
//!   sampled measurements and reset needed by the protocol.
//! * [`noise`] samples stochastic Pauli faults and readout flips and builds
//!   readout calibration matrices.
//! * [`wheel`] runs the teleportation protocol itself: hops, ring
//!   regeneration, the measurement record and byproduct correction.
//! * [`tomography`] reconstructs the final two-qubit state from Pauli-basis
//!   counts with readout mitigation and physical projections.
//! * [`metrics`] evaluates negativity, fidelity and bootstrap intervals.
//! * [`experiment`] ties the above into configurable hop sweeps.
//!
//! Qubit ordering: qubit 0 is the most significant bit of an amplitude index.

pub mod density;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod sim;
pub mod tomography;
pub mod wheel;

pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
