//! Shaped-pulse Rydberg blockade gates.
//!
//! This crate designs smooth analytic laser envelopes (square, generalized
//! Gaussian and DRAG) for the three-pulse π / 2π / −π Rydberg blockade
//! sequence, propagates the full ten-level-per-atom two-atom dynamics with
//! and without spontaneous emission, and evaluates gate metrics such as the
//! population error and the Bell-state fidelity.
//!
//! Units throughout: time in nanoseconds, angular frequency in rad/ns and
//! ħ = 1. Linear frequencies (GHz) only appear at the I/O boundary, see
//! [`units`].
//!
//! Module map:
//!
//! - [`params`]: physical settings and setting-override files.
//! - [`pulses`]: envelopes, exact derivatives, DRAG coefficients, spectra.
//! - [`atom`]: single-atom level structure and the composite Hamiltonian.
//! - [`dynamics`]: Schrödinger and Lindblad propagation.
//! - [`gate`]: the gate sequence, metrics and the (Λ, s) optimizer.
//! - [`blockade`]: analytic leakage model and optimal blockade strength.
//! - [`report`]: deterministic CSV writers shared by the CLI.

pub mod atom;
pub mod blockade;
pub mod dynamics;
pub mod error;
pub mod gate;
pub mod linalg;
pub mod ode;
pub mod optimize;
pub mod params;
pub mod pulses;
pub mod quadrature;
pub mod report;
pub mod sparse;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use atom::{AtomBasis, AtomLevel, CompositeHamiltonian, Level};
pub use blockade::LeakModel;
pub use dynamics::{BranchConvention, CollapseSet, DensityMatrix, QuantumState, Tolerances};
pub use gate::{GateMetrics, GateSimulator, Model, SequenceSpec};
pub use params::PhysicalSetting;
pub use pulses::{PulseKind, PulseShape};
