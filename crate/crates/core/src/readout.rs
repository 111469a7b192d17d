//! Readout POVMs and classical state-preparation-and-measurement (SPAM) models.
//!
//! An ion qudit is read level by level: level `j` is probed with an effect
//! `E_j` and the cascade stops at the first detector click. Outcome `k >= 1`
//! means "first click while probing level k"; outcome 0 means no click at all.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{DensityMatrix, PSD_TOL};

const POVM_TOL: f64 = 1e-10;
const SIMPLEX_TOL: f64 = 1e-9;

/// Ordered measurement operators `Π_0 .. Π_{d-1}`, PSD and summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    operators: Vec<CMatrix>,
}

impl PovmSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return domain("POVM needs at least one operator");
        };
        let d = first.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (k, op) in operators.iter().enumerate() {
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
            }
            if linalg::hermiticity_error(op) > POVM_TOL {
                return domain(format!("POVM operator {k} is not Hermitian"));
            }
            let min = linalg::min_eigenvalue(op);
            if min < -PSD_TOL {
                return domain(format!("POVM operator {k} is not PSD (min eigenvalue {min:e})"));
            }
            sum += op;
        }
        let err = linalg::max_abs_diff(&sum, &linalg::identity(d));
        if err > POVM_TOL {
            return domain(format!("POVM operators do not sum to the identity (error {err:e})"));
        }
        Ok(Self { operators })
    }

    /// Projectors onto the computational basis.
    pub fn computational(d: usize) -> Self {
        Self { operators: (0..d).map(|k| linalg::basis_projector(d, k)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// Outcome probabilities `Tr(rho Π_k)`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.operators.iter().map(|op| rho.expectation(op)).collect()
    }
}

/// False-negative (`b0`) and false-positive (`b1`) probabilities of a single
/// level read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelReadoutParams {
    pub b0: f64,
    pub b1: f64,
}

impl LevelReadoutParams {
    pub fn new(b0: f64, b1: f64) -> Result<Self> {
        let p = Self { b0, b1 };
        p.validate()?;
        Ok(p)
    }

    pub fn ideal() -> Self {
        Self { b0: 0.0, b1: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b0", self.b0), ("b1", self.b1)] {
            if !(0.0..=1.0).contains(&v) {
                return domain(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.b0 + self.b1 > 0.5 {
            log::warn!("b0 + b1 = {} exceeds 0.5; readout parameters are poorly identifiable", self.b0 + self.b1);
        }
        Ok(())
    }
}

/// `E_j = (1 - b0)|j><j| + b1 (I - |j><j|)`.
pub fn level_readout_operator(d: usize, j: usize, params: LevelReadoutParams) -> Result<CMatrix> {
    if j >= d {
        return domain(format!("level {j} out of range for dimension {d}"));
    }
    params.validate()?;
    let diag: Vec<f64> = (0..d).map(|i| if i == j { 1.0 - params.b0 } else { params.b1 }).collect();
    Ok(linalg::diag_real(&diag))
}

/// Cascade POVM from the level effects `E_1 .. E_{d-1}`:
/// `Π_1 = E_1`, `Π_k = E_k (I - E_{k-1}) ... (I - E_1)`,
/// `Π_0 = (I - E_{d-1}) ... (I - E_1)`.
pub fn cascade_povm(effects: &[CMatrix]) -> Result<PovmSet> {
    if effects.is_empty() {
        return domain("cascade needs at least one level effect (d >= 2)");
    }
    let d = effects.len() + 1;
    for (i, e) in effects.iter().enumerate() {
        if e.nrows() != d || e.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.nrows() });
        }
        if linalg::hermiticity_error(e) > POVM_TOL {
            return domain(format!("effect E_{} is not Hermitian", i + 1));
        }
        let (values, _) = linalg::hermitian_eigen(e);
        if values[0] < -POVM_TOL || values[d - 1] > 1.0 + POVM_TOL {
            return domain(format!("effect E_{} has spectrum outside [0, 1]", i + 1));
        }
    }
    let id = linalg::identity(d);
    let mut operators = vec![CMatrix::zeros(d, d); d];
    // Running product (I - E_{k-1}) ... (I - E_1).
    let mut no_click = id.clone();
    for (idx, e) in effects.iter().enumerate() {
        operators[idx + 1] = e * &no_click;
        no_click = (&id - e) * &no_click;
    }
    operators[0] = no_click;
    for (k, op) in operators.iter_mut().enumerate() {
        if linalg::hermiticity_error(op) > POVM_TOL {
            return domain(format!("cascade operator Π_{k} is not Hermitian (non-commuting effects)"));
        }
        *op = linalg::hermitian_part(op);
    }
    PovmSet::new(operators)
}

/// Cascade POVM built from identical per-level readout errors.
pub fn noisy_cascade_povm(d: usize, params: LevelReadoutParams) -> Result<PovmSet> {
    let effects = (1..d).map(|j| level_readout_operator(d, j, params)).collect::<Result<Vec<_>>>()?;
    cascade_povm(&effects)
}

/// Thermal initialization: temperature and level energies (same units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsInitParams {
    pub temperature: f64,
    pub omegas: Vec<f64>,
}

impl GibbsInitParams {
    pub fn new(temperature: f64, omegas: Vec<f64>) -> Result<Self> {
        let p = Self { temperature, omegas };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return domain(format!("temperature must be positive, got {}", self.temperature));
        }
        match self.omegas.first() {
            None => return domain("at least one level energy is required"),
            Some(&w0) if w0 != 0.0 => return domain(format!("omegas[0] must be 0, got {w0}")),
            _ => {}
        }
        if self.omegas.iter().any(|w| !w.is_finite()) {
            return domain("level energies must be finite");
        }
        Ok(())
    }
}

/// Boltzmann populations `a_j = exp(-ω_j / T) / Z`.
pub fn gibbs_populations(params: &GibbsInitParams) -> Result<Vec<f64>> {
    params.validate()?;
    let min = params.omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = params.omegas.iter().map(|w| (-(w - min) / params.temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Classical SPAM: diagonal initial populations `a` and a column-stochastic
/// confusion matrix `b[k][j]` = P(outcome k | level j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSpamModel {
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

impl DiagonalSpamModel {
    pub fn new(a: Vec<f64>, b: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal(d: usize) -> Self {
        let mut a = vec![0.0; d];
        a[0] = 1.0;
        let b = (0..d).map(|k| (0..d).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect();
        Self { a, b }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex(&self.a, "a")?;
        check_stochastic(&self.b, self.a.len())
    }

    /// Predicted outcome distribution `B x` for level populations `x`.
    pub fn outcome_probabilities(&self, populations: &[f64]) -> Vec<f64> {
        self.b.iter().map(|row| row.iter().zip(populations).map(|(b, x)| b * x).sum()).collect()
    }
}

fn check_simplex(a: &[f64], name: &str) -> Result<()> {
    if a.is_empty() {
        return domain(format!("{name} is empty"));
    }
    if a.iter().any(|&x| !(x >= -SIMPLEX_TOL) || !x.is_finite()) {
        return domain(format!("{name} has negative or non-finite entries"));
    }
    let s: f64 = a.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return domain(format!("{name} sums to {s}, not 1"));
    }
    Ok(())
}

fn check_stochastic(b: &[Vec<f64>], d: usize) -> Result<()> {
    if b.len() != d || b.iter().any(|row| row.len() != d) {
        return domain(format!("confusion matrix must be {d}x{d}"));
    }
    for j in 0..d {
        let col: Vec<f64> = b.iter().map(|row| row[j]).collect();
        check_simplex(&col, &format!("column {j} of B"))?;
    }
    Ok(())
}

/// `rho_0 = sum_j a_j |j><j|`.
pub fn diagonal_spam_state(a: &[f64]) -> Result<DensityMatrix> {
    check_simplex(a, "a")?;
    DensityMatrix::diagonal(a)
}

/// `Π_k = sum_j b_kj |j><j|`.
pub fn diagonal_spam_povm(b: &[Vec<f64>]) -> Result<PovmSet> {
    let d = b.len();
    check_stochastic(b, d)?;
    PovmSet::new(b.iter().map(|row| linalg::diag_real(row)).collect())
}

/// Moves a depolarization of strength `p` from the initial state into the
/// readout: `a' = (a - p/d) / (1 - p)` and `Π'_k = (1 - p) Π_k + p Tr(Π_k) I / d`.
/// Both models predict identical probabilities for every unitary circuit.
pub fn gauge_transform(model: &DiagonalSpamModel, p: f64) -> Result<DiagonalSpamModel> {
    model.validate()?;
    if !(0.0..1.0).contains(&p) {
        return domain(format!("gauge parameter {p} outside [0, 1)"));
    }
    let d = model.dim();
    let shift = p / d as f64;
    let mut a = Vec::with_capacity(d);
    for &x in &model.a {
        let v = (x - shift) / (1.0 - p);
        if v < -1e-12 {
            return domain(format!("gauge parameter {p} makes initial populations negative"));
        }
        a.push(v.max(0.0));
    }
    let b = model
        .b
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter().map(|&x| (1.0 - p) * x + shift * total).collect()
        })
        .collect();
    Ok(DiagonalSpamModel { a, b })
}

/// Initialization model used by the simulator and by reconstruction models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitModel {
    Ideal,
    Populations { a: Vec<f64> },
    Gibbs(GibbsInitParams),
}

impl InitModel {
    pub fn populations(&self, d: usize) -> Result<Vec<f64>> {
        let a = match self {
            InitModel::Ideal => {
                let mut a = vec![0.0; d];
                a[0] = 1.0;
                a
            }
            InitModel::Populations { a } => a.clone(),
            InitModel::Gibbs(g) => gibbs_populations(g)?,
        };
        if a.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.len() });
        }
        check_simplex(&a, "a")?;
        Ok(a)
    }

    pub fn state(&self, d: usize) -> Result<DensityMatrix> {
        DensityMatrix::diagonal(&self.populations(d)?)
    }
}

/// Readout model used by the simulator and by reconstruction models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadoutModel {
    Ideal,
    Cascade(LevelReadoutParams),
    Matrix { b: Vec<Vec<f64>> },
}

impl ReadoutModel {
    pub fn povm(&self, d: usize) -> Result<PovmSet> {
        match self {
            ReadoutModel::Ideal => Ok(PovmSet::computational(d)),
            ReadoutModel::Cascade(p) => noisy_cascade_povm(d, *p),
            ReadoutModel::Matrix { b } => {
                if b.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: b.len() });
                }
                diagonal_spam_povm(b)
            }
        }
    }
}

/// Initialization plus readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamModel {
    pub init: InitModel,
    pub readout: ReadoutModel,
}

impl SpamModel {
    pub fn ideal() -> Self {
        Self { init: InitModel::Ideal, readout: ReadoutModel::Ideal }
    }

    /// Thermal initialization with cascade readout.
    pub fn gibbs(temperature: f64, omegas: Vec<f64>, b0: f64, b1: f64) -> Result<Self> {
        Ok(Self {
            init: InitModel::Gibbs(GibbsInitParams::new(temperature, omegas)?),
            readout: ReadoutModel::Cascade(LevelReadoutParams::new(b0, b1)?),
        })
    }

    pub fn diagonal(model: &DiagonalSpamModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            init: InitModel::Populations { a: model.a.clone() },
            readout: ReadoutModel::Matrix { b: model.b.clone() },
        })
    }

    pub fn initial_state(&self, d: usize) -> Result<DensityMatrix> {
        self.init.state(d)
    }

    pub fn povm(&self, d: usize) -> Result<PovmSet> {
        self.readout.povm(d)
    }

    /// The diagonal `(a, B)` form; every model here is diagonal.
    pub fn to_diagonal(&self, d: usize) -> Result<DiagonalSpamModel> {
        let a = self.init.populations(d)?;
        let povm = self.povm(d)?;
        let b = povm.operators().iter().map(linalg::real_diagonal).collect();
        DiagonalSpamModel::new(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{haar_random_unitary, RandomSeed};
    use proptest::prelude::*;

    #[test]
    fn level_operator_examples() {
        assert_eq!(level_readout_operator(3, 1, LevelReadoutParams::ideal()).unwrap(), linalg::basis_projector(3, 1));
        let p = LevelReadoutParams::new(0.01, 0.02).unwrap();
        assert_eq!(linalg::real_diagonal(&level_readout_operator(2, 1, p).unwrap()), vec![0.02, 0.99]);
        assert_eq!(linalg::real_diagonal(&level_readout_operator(3, 2, p).unwrap()), vec![0.02, 0.02, 0.99]);
        assert!(level_readout_operator(3, 3, p).is_err());
        assert!(LevelReadoutParams::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn ideal_cascade_gives_projectors() {
        for d in 2..6 {
            let povm = noisy_cascade_povm(d, LevelReadoutParams::ideal()).unwrap();
            for k in 0..d {
                assert_eq!(povm.operators()[k], linalg::basis_projector(d, k));
            }
        }
    }

    #[test]
    fn noisy_qutrit_cascade() {
        // Π_1 = E_1, Π_2 = E_2 (I - E_1), Π_0 = (I - E_2)(I - E_1) with
        // E_1 = diag(.02, .99, .02), E_2 = diag(.02, .02, .99).
        let povm = noisy_cascade_povm(3, LevelReadoutParams::new(0.01, 0.02).unwrap()).unwrap();
        let expected = [[0.9604, 0.0098, 0.0098], [0.02, 0.99, 0.02], [0.0196, 0.0002, 0.9702]];
        for (k, row) in expected.iter().enumerate() {
            let got = linalg::real_diagonal(&povm.operators()[k]);
            for j in 0..3 {
                assert!((got[j] - row[j]).abs() < 1e-12, "Π_{k}[{j}] = {}", got[j]);
            }
        }
    }

    #[test]
    fn cascade_rejects_bad_spectrum() {
        let e = linalg::diag_real(&[1.2, 0.0]);
        assert!(cascade_povm(&[e]).is_err());
        assert!(cascade_povm(&[]).is_err());
    }

    #[test]
    fn cascade_rejects_non_commuting_effects() {
        let u = haar_random_unitary(3, RandomSeed::new(0)).unwrap();
        let e1 = linalg::diag_real(&[0.1, 0.9, 0.3]);
        let e2 = u.matrix() * linalg::diag_real(&[0.2, 0.4, 0.8]) * u.matrix().adjoint();
        assert!(matches!(cascade_povm(&[e1, e2]), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn cascade_sums_to_identity(diags in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 4), 3)) {
            let effects: Vec<CMatrix> = diags.iter().map(|v| linalg::diag_real(v)).collect();
            let povm = cascade_povm(&effects).unwrap();
            let sum = povm.operators().iter().fold(CMatrix::zeros(4, 4), |acc, op| acc + op);
            prop_assert!(linalg::max_abs_diff(&sum, &linalg::identity(4)) < 1e-12);
            for op in povm.operators() {
                prop_assert!(linalg::min_eigenvalue(op) >= -1e-12);
            }
        }
    }

    #[test]
    fn gibbs_examples() {
        let hot = gibbs_populations(&GibbsInitParams::new(1e9, vec![0.0, 4.0, 6.0]).unwrap()).unwrap();
        assert!(hot.iter().all(|a| (a - 1.0 / 3.0).abs() < 1e-8));
        let a = gibbs_populations(&GibbsInitParams::new(1.0, vec![0.0, 4.0, 6.0]).unwrap()).unwrap();
        let z = 1.0 + (-4.0f64).exp() + (-6.0f64).exp();
        assert!((a[0] - 1.0 / z).abs() < 1e-15);
        assert!((a[0] - 0.97963).abs() < 1e-5 && (a[1] - 0.01794).abs() < 1e-5 && (a[2] - 0.00243).abs() < 1e-5);
        let flat = gibbs_populations(&GibbsInitParams::new(1.0, vec![0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert!(flat.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(GibbsInitParams::new(0.0, vec![0.0, 1.0]).is_err());
        assert!(GibbsInitParams::new(-1.0, vec![0.0, 1.0]).is_err());
        assert!(GibbsInitParams::new(1.0, vec![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn gibbs_monotone(t in 0.05f64..50.0, steps in proptest::collection::vec(0.0f64..5.0, 1..6)) {
            let mut omegas = vec![0.0];
            for s in steps { omegas.push(omegas.last().unwrap() + s); }
            let a = gibbs_populations(&GibbsInitParams::new(t, omegas).unwrap()).unwrap();
            for w in a.windows(2) { prop_assert!(w[1] <= w[0] + 1e-15); }
        }
    }

    #[test]
    fn diagonal_models() {
        let rho = diagonal_spam_state(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(rho.matrix(), &linalg::basis_projector(3, 0));
        let id = DiagonalSpamModel::ideal(3);
        let povm = diagonal_spam_povm(&id.b).unwrap();
        for k in 0..3 {
            assert_eq!(povm.operators()[k], linalg::basis_projector(3, k));
        }
        // Values reported for the general fit of the qutrit experiment.
        let fitted = DiagonalSpamModel::new(
            vec![0.97, 0.03, 0.0],
            vec![vec![0.98, 0.0, 0.01], vec![0.0, 1.0, 0.0], vec![0.02, 0.0, 0.99]],
        )
        .unwrap();
        diagonal_spam_povm(&fitted.b).unwrap();
        assert!(diagonal_spam_state(&[0.5, 0.6]).is_err());
        assert!(diagonal_spam_povm(&[vec![0.5, 0.0], vec![0.4, 1.0]]).is_err());
    }

    #[test]
    fn gauge_examples() {
        let m = SpamModel::gibbs(1.0, vec![0.0, 4.0, 6.0], 0.01, 0.02).unwrap().to_diagonal(3).unwrap();
        assert_eq!(gauge_transform(&m, 0.0).unwrap(), m);
        let uniform = DiagonalSpamModel::new(vec![0.5, 0.5], vec![vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let g = gauge_transform(&uniform, 0.2).unwrap();
        assert!((g.a[0] - 0.5).abs() < 1e-15 && (g.a[1] - 0.5).abs() < 1e-15);
        // a_2 ≈ 0.00243 caps the gauge parameter near 3 * 0.00243.
        assert!(gauge_transform(&m, 0.01).is_err());
        assert!(gauge_transform(&m, 1.0).is_err());
    }

    #[test]
    fn gauge_preserves_probabilities() {
        let m = SpamModel::gibbs(1.0, vec![0.0, 4.0, 6.0], 0.01, 0.02).unwrap().to_diagonal(3).unwrap();
        let g = gauge_transform(&m, 0.006).unwrap();
        g.validate().unwrap();
        let (rho, povm) = (diagonal_spam_state(&m.a).unwrap(), diagonal_spam_povm(&m.b).unwrap());
        let (rho_g, povm_g) = (diagonal_spam_state(&g.a).unwrap(), diagonal_spam_povm(&g.b).unwrap());
        for seed in 0..100 {
            let u = haar_random_unitary(3, RandomSeed::new(seed)).unwrap();
            let p = povm.probabilities(&rho.conjugate(&u).unwrap());
            let q = povm_g.probabilities(&rho_g.conjugate(&u).unwrap());
            for (x, y) in p.iter().zip(&q) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_limit_is_ideal() {
        let m = SpamModel::gibbs(1e-3, vec![0.0, 4.0, 6.0], 0.0, 0.0).unwrap();
        assert_eq!(m.initial_state(3).unwrap().matrix(), &linalg::basis_projector(3, 0));
        assert_eq!(m.povm(3).unwrap(), PovmSet::computational(3));
    }
}
