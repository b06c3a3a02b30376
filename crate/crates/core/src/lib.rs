//! Simulation of squeezed mechanical and multicomponent optical Schrödinger
//! cat states in a cavity optomechanical system whose mechanical element is
//! the collective density excitation of a Bose–Einstein condensate.
//!
//! The two-mode model is
//!
//! ```text
//! H = ω_c' c†c + ω_b b†b + ¼ ω_sw (b² + b†²) + (g/√2) c†c (b + b†)      (ħ = 1)
//! ```
//!
//! with `c` the cavity mode and `b` the mechanical mode. Every closed-form
//! construction in [`analytic`] and [`model`] has a brute-force counterpart
//! (dense exponentiation of `H`, direct matrix expectations, numeric
//! projections) and the test suites compare the two.
//!
//! Units: frequencies are angular (rad/s), times are seconds.
//!
//! Modules:
//! - [`fock`]: truncated Fock spaces, operators, states, `expm`.
//! - [`model`]: parameters, effective parameters, Hamiltonian, propagators.
//! - [`analytic`]: entangled state, projected cats, variances, optical cats.
//! - [`dynamics`]: unitary and Lindblad evolution.
//! - [`measures`]: Wigner functions, fidelity, entanglement diagnostics.

pub mod analytic;
pub mod dynamics;
mod error;
pub mod fock;
pub mod measures;
pub mod model;

pub use error::{Error, Result};
pub use fock::{DensityOp, ModeSpec, Operator, PureState, C64};
