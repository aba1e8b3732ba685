//! Simulation laboratory for SWAP-gate attacks on hybrid quantum-classical
//! classifiers.
//!
//! The crate is organised as a pipeline:
//!
//! * [`circuit`] — gate-level IR, validation, text format, SWAP lowering;
//! * [`sim`] — dense statevector simulator and SWAP-test primitives;
//! * [`hqnn`] — the hybrid classifier (dense extractor, angle encoding,
//!   variational ansatz, fidelity readout) and its training loop;
//! * [`attack`] — untargeted SWAP injection and targeted fidelity-noise
//!   perturbation attacks;
//! * [`detector`] — fingerprint-based structural tamper detection;
//! * [`harness`] — datasets, experiment configs, run ledger, overhead
//!   measurement and report generation.

pub mod attack;
pub mod circuit;
pub mod detector;
pub mod harness;
pub mod hqnn;
pub mod sim;

pub use circuit::{Circuit, CircuitStats, GateKind, GateOp, Provenance, QubitRole};
pub use sim::StateVector;
