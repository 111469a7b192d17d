//! Simulation and reconstruction toolkit for tomography of noisy ion-based
//! qudits.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: dense complex linear algebra, density matrices, unitaries,
//!   channels in Choi form, fidelities and seeded Haar sampling.
//! - [`circuits`]: elementary two-level rotations and their Euler form.
//! - [`readout`]: cascade readout POVMs, classical SPAM models and the gauge
//!   transformation that makes them non-identifiable.
//! - [`protocols`]: two-level state/process tomography protocols, the MUB
//!   reference protocol, SPAM calibration circuits and completeness checks.
//! - [`sim`]: noisy circuit semantics and Monte Carlo count generation.
//! - [`recon`]: maximum-likelihood reconstruction of states, processes and
//!   SPAM parameters.
//! - [`experiments`]: the batch experiment runner behind the `qudit-tomo` CLI.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuits;
pub mod error;
pub mod experiments;
pub mod protocols;
pub mod qcore;
pub mod readout;
pub mod recon;
pub mod sim;

pub use error::{Error, Result};
pub use qcore::{CMatrix, ChoiMatrix, Complex64, DensityMatrix, RandomSeed, UnitaryMatrix};
