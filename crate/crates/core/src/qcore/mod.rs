//! Complex dense linear algebra and quantum primitives.

mod channel;
pub mod linalg;
mod random;
mod state;

pub use channel::{process_fidelity, ChoiMatrix};
pub use linalg::CMatrix;
pub use nalgebra::Complex as Complex;
pub use num_complex::Complex64;
pub use random::{haar_random_state, haar_random_state_with, haar_random_unitary, haar_random_unitary_with, RandomSeed, SeedRng};
pub use state::{depolarize, fidelity_states, DensityMatrix, UnitaryMatrix};
pub(crate) use state::{depolarize_raw, unitarity_error as state_unitarity_error};

/// Hermiticity tolerance for density matrices (max-norm).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Unitarity tolerance, `max |U^dag U - I|`.
pub const UNITARY_TOL: f64 = 1e-12;
/// Trace-preservation tolerance for Choi matrices.
pub const TP_TOL: f64 = 1e-10;
