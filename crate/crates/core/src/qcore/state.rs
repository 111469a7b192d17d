use super::linalg::{self, c, CMatrix, CVector};
use super::{HERMITIAN_TOL, PSD_TOL, TRACE_TOL, UNITARY_TOL};
use crate::error::{domain, Error, Result};

/// A qudit density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates `mat` against the density-matrix invariants.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return domain(format!("density matrix must be square, got {}x{}", mat.nrows(), mat.ncols()));
        }
        if mat.nrows() < 1 || mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("density matrix has no entries or non-finite entries");
        }
        let herm = linalg::hermiticity_error(&mat);
        if herm > HERMITIAN_TOL {
            return domain(format!("density matrix not Hermitian (error {herm:e})"));
        }
        let tr = linalg::trace(&mat);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return domain(format!("density matrix trace is {tr}"));
        }
        let min = linalg::min_eigenvalue(&mat);
        if min < -PSD_TOL {
            return domain(format!("density matrix not PSD (min eigenvalue {min:e})"));
        }
        Ok(Self { mat })
    }

    /// Takes the Hermitian part and rescales to unit trace before validating.
    /// Used for results of arithmetic that are valid up to rounding.
    pub fn from_approx(mat: &CMatrix) -> Result<Self> {
        let h = linalg::hermitian_part(mat);
        let tr = linalg::trace(&h).re;
        if !(tr > 0.0) {
            return Err(Error::Numerical(format!("cannot normalise matrix with trace {tr}")));
        }
        Self::new(h / c(tr, 0.0))
    }

    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        Self { mat }
    }

    /// `|psi><psi|` for a (not necessarily normalised) vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return domain("cannot build a pure state from the zero vector");
        }
        let v = psi / c(norm, 0.0);
        Self::from_approx(&linalg::outer(&v))
    }

    /// Computational basis state `|k><k|`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return domain(format!("level {k} out of range for dimension {d}"));
        }
        Ok(Self { mat: linalg::basis_projector(d, k) })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { mat: linalg::identity(d) / c(d as f64, 0.0) }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_real(populations))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn populations(&self) -> Vec<f64> {
        linalg::real_diagonal(&self.mat)
    }

    /// `U rho U^dag`.
    pub fn conjugate(&self, u: &UnitaryMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(Self::from_trusted(linalg::hermitian_part(&(u.matrix() * &self.mat * u.matrix().adjoint()))))
    }

    /// Born-rule probability `Tr(rho E)` for a Hermitian effect `E`.
    pub fn expectation(&self, effect: &CMatrix) -> f64 {
        linalg::trace_product_re(&self.mat, effect)
    }
}

impl TryFrom<CMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(mat: CMatrix) -> Result<Self> {
        Self::new(mat)
    }
}

impl From<DensityMatrix> for CMatrix {
    fn from(rho: DensityMatrix) -> CMatrix {
        rho.mat
    }
}

/// A unitary `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    mat: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(mat, UNITARY_TOL)
    }

    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return domain(format!("unitary must be square, got {}x{}", mat.nrows(), mat.ncols()));
        }
        let err = unitarity_error(&mat);
        if !(err <= tol) {
            return domain(format!("matrix is not unitary (error {err:e})"));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: linalg::identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self { mat: &self.mat * &rhs.mat })
    }
}

pub(crate) fn unitarity_error(m: &CMatrix) -> f64 {
    linalg::max_abs_diff(&(m.adjoint() * m), &linalg::identity(m.nrows()))
}

/// Depolarizing channel `(1 - p) rho + p I / d`.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    Ok(DensityMatrix::from_trusted(depolarize_raw(rho.matrix(), p)))
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} outside [0, 1]"));
    }
    Ok(())
}

/// `(1 - p) m + p Tr(m) I / d`; also the (self-adjoint) Heisenberg picture.
pub(crate) fn depolarize_raw(m: &CMatrix, p: f64) -> CMatrix {
    if p == 0.0 {
        return m.clone();
    }
    let d = m.nrows();
    let tr = linalg::trace(m);
    let mut out = m * c(1.0 - p, 0.0);
    let shift = tr * (p / d as f64);
    for i in 0..d {
        out[(i, i)] += shift;
    }
    out
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity_states(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: sigma.dim() });
    }
    Ok(fidelity_psd(rho.matrix(), sigma.matrix()))
}

/// Uhlmann fidelity of two unit-trace PSD matrices, clamped to `[0, 1]`.
///
/// Computed as `(sum of singular values of sqrt(a) sqrt(b))^2`; eigenvalues at
/// round-off level are zeroed before the square roots so that rank-deficient
/// inputs keep full precision.
pub(crate) fn fidelity_psd(a: &CMatrix, b: &CMatrix) -> f64 {
    let sa = sqrt_floored(a);
    let sb = sqrt_floored(b);
    let root: f64 = (sa * sb).singular_values().iter().sum();
    (root * root).clamp(0.0, 1.0)
}

fn sqrt_floored(m: &CMatrix) -> CMatrix {
    let floor = 1e-14 * linalg::max_abs(m).max(1.0);
    linalg::hermitian_fn(m, |v| if v > floor { v.sqrt() } else { 0.0 })
}
