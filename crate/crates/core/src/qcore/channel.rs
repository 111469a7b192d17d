use super::linalg::{self, c, CMatrix, ZERO};
use super::state::{check_probability, fidelity_psd, DensityMatrix, UnitaryMatrix};
use super::{HERMITIAN_TOL, PSD_TOL, TP_TOL};
use crate::error::{domain, Error, Result};

/// Choi matrix `J = sum_ij |i><j| ⊗ L(|i><j|)` of a channel on a `d`-level
/// system. Input index is the major factor: entry `((i, a), (j, b))` lives at
/// `(i * d + a, j * d + b)`.
///
/// Probabilities follow `Tr(L(rho) P) = Tr(J (rho^T ⊗ P))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    mat: CMatrix,
}

impl ChoiMatrix {
    /// Validates complete positivity and trace preservation.
    pub fn new(dim: usize, mat: CMatrix) -> Result<Self> {
        let choi = Self::unchecked(dim, mat)?;
        let herm = linalg::hermiticity_error(&choi.mat);
        if herm > HERMITIAN_TOL {
            return domain(format!("Choi matrix not Hermitian (error {herm:e})"));
        }
        let min = linalg::min_eigenvalue(&choi.mat);
        if min < -PSD_TOL {
            return domain(format!("Choi matrix not completely positive (min eigenvalue {min:e})"));
        }
        let tp = choi.tp_error();
        if tp > TP_TOL {
            return domain(format!("Choi matrix not trace preserving (error {tp:e})"));
        }
        Ok(choi)
    }

    /// Shape check only; used for intermediate iterates of reconstructions.
    pub fn unchecked(dim: usize, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: mat.nrows() });
        }
        Ok(Self { dim, mat })
    }

    pub fn from_unitary(u: &UnitaryMatrix) -> Self {
        let d = u.dim();
        let um = u.matrix();
        let mut mat = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for a in 0..d {
                let x = um[(a, i)];
                for j in 0..d {
                    for b in 0..d {
                        mat[(i * d + a, j * d + b)] = x * um[(b, j)].conj();
                    }
                }
            }
        }
        Self { dim: d, mat }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_unitary(&UnitaryMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// `Tr_out J`; equals the identity for trace-preserving channels.
    pub fn partial_trace_output(&self) -> CMatrix {
        linalg::partial_trace_second(&self.mat, self.dim)
    }

    pub fn tp_error(&self) -> f64 {
        linalg::max_abs_diff(&self.partial_trace_output(), &linalg::identity(self.dim))
    }

    /// Choi matrix of `E_p ∘ L`.
    pub fn compose_depolarize(&self, p: f64) -> Result<Self> {
        check_probability(p)?;
        let d = self.dim;
        let pt = self.partial_trace_output();
        let mut mat = &self.mat * c(1.0 - p, 0.0);
        let scale = p / d as f64;
        for i in 0..d {
            for j in 0..d {
                let v = pt[(i, j)] * scale;
                for a in 0..d {
                    mat[(i * d + a, j * d + a)] += v;
                }
            }
        }
        Ok(Self { dim: d, mat })
    }

    /// `L(rho)`; the channel must be trace preserving.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rho.dim() });
        }
        let tp = self.tp_error();
        if tp > TP_TOL {
            return domain(format!("cannot apply a non trace-preserving channel (error {tp:e})"));
        }
        Ok(DensityMatrix::from_trusted(linalg::hermitian_part(&self.apply_raw(rho.matrix()))))
    }

    pub(crate) fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let r = rho[(i, j)];
                if r == ZERO {
                    continue;
                }
                for a in 0..d {
                    for b in 0..d {
                        out[(a, b)] += r * self.mat[(i * d + a, j * d + b)];
                    }
                }
            }
        }
        out
    }
}

/// Uhlmann fidelity between the normalised Choi states `J_a / d` and `J_b / d`.
pub fn process_fidelity(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    let scale = c(1.0 / a.dim as f64, 0.0);
    Ok(fidelity_psd(&(&a.mat * scale), &(&b.mat * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{haar_random_state, haar_random_unitary, RandomSeed};

    fn random_state(d: usize, seed: u64) -> DensityMatrix {
        let a = haar_random_state(d, RandomSeed::new(seed)).unwrap();
        let b = haar_random_state(d, RandomSeed::new(seed + 1)).unwrap();
        DensityMatrix::from_approx(&(linalg::outer(&a) * c(0.6, 0.0) + linalg::outer(&b) * c(0.4, 0.0))).unwrap()
    }

    #[test]
    fn unitary_choi_is_valid_and_matches_conjugation() {
        for seed in 0..10 {
            let u = haar_random_unitary(3, RandomSeed::new(seed)).unwrap();
            let choi = ChoiMatrix::from_unitary(&u);
            ChoiMatrix::new(3, choi.matrix().clone()).unwrap();
            let rho = random_state(3, 100 + seed);
            let via_choi = choi.apply(&rho).unwrap();
            let direct = u.matrix() * rho.matrix() * u.matrix().adjoint();
            assert!(linalg::max_abs_diff(via_choi.matrix(), &direct) < 1e-12);
        }
    }

    #[test]
    fn identity_and_full_depolarization() {
        let rho = random_state(3, 7);
        let id = ChoiMatrix::identity(3);
        assert!(linalg::max_abs_diff(id.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-15);
        let full = id.compose_depolarize(1.0).unwrap();
        let out = full.apply(&rho).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), DensityMatrix::maximally_mixed(3).matrix()) < 1e-15);
    }

    #[test]
    fn composed_depolarization_acts_on_output() {
        let u = haar_random_unitary(3, RandomSeed::new(3)).unwrap();
        let rho = random_state(3, 8);
        let choi = ChoiMatrix::from_unitary(&u).compose_depolarize(0.2).unwrap();
        let expected = crate::qcore::depolarize(&rho.conjugate(&u).unwrap(), 0.2).unwrap();
        assert!(linalg::max_abs_diff(choi.apply(&rho).unwrap().matrix(), expected.matrix()) < 1e-12);
        assert!(choi.tp_error() < 1e-12);
    }

    #[test]
    fn apply_rejects_non_tp() {
        let bad = ChoiMatrix::unchecked(2, CMatrix::identity(4, 4) * c(0.3, 0.0)).unwrap();
        assert!(bad.apply(&DensityMatrix::maximally_mixed(2)).is_err());
        assert!(ChoiMatrix::new(2, CMatrix::identity(4, 4) * c(0.3, 0.0)).is_err());
    }

    #[test]
    fn probability_rule_matches_channel_action() {
        let u = haar_random_unitary(3, RandomSeed::new(5)).unwrap();
        let choi = ChoiMatrix::from_unitary(&u).compose_depolarize(0.05).unwrap();
        let rho = random_state(3, 9);
        let effect = random_state(3, 10).into_matrix();
        let direct = linalg::trace_product_re(choi.apply(&rho).unwrap().matrix(), &effect);
        let via = linalg::trace_product_re(choi.matrix(), &linalg::kron(&rho.matrix().transpose(), &effect));
        assert!((direct - via).abs() < 1e-12);
    }

    #[test]
    fn process_fidelity_examples() {
        let u = haar_random_unitary(3, RandomSeed::new(21)).unwrap();
        let ju = ChoiMatrix::from_unitary(&u);
        assert!((process_fidelity(&ju, &ju).unwrap() - 1.0).abs() < 1e-10);
        // Pure Choi state overlap: (1 - p) + p / d^2.
        let noisy = ju.compose_depolarize(0.01).unwrap();
        let f = process_fidelity(&ju, &noisy).unwrap();
        assert!((f - (1.0 - 0.01 * (1.0 - 1.0 / 9.0))).abs() < 1e-10, "{f}");
        assert!((f - 0.991111).abs() < 1e-6);
        assert!(process_fidelity(&ju, &ChoiMatrix::identity(2)).is_err());
    }

    #[test]
    fn process_fidelity_is_unitarily_invariant() {
        let a = ChoiMatrix::from_unitary(&haar_random_unitary(3, RandomSeed::new(1)).unwrap()).compose_depolarize(0.1).unwrap();
        let b = ChoiMatrix::from_unitary(&haar_random_unitary(3, RandomSeed::new(2)).unwrap()).compose_depolarize(0.3).unwrap();
        let w = haar_random_unitary(3, RandomSeed::new(4)).unwrap();
        // Post-composition with W maps J -> (I ⊗ W) J (I ⊗ W)^dag.
        let big = linalg::kron(&linalg::identity(3), w.matrix());
        let rot = |j: &ChoiMatrix| ChoiMatrix::unchecked(3, &big * j.matrix() * big.adjoint()).unwrap();
        let f0 = process_fidelity(&a, &b).unwrap();
        let f1 = process_fidelity(&rot(&a), &rot(&b)).unwrap();
        assert!((f0 - f1).abs() < 1e-10);
    }
}
