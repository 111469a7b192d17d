use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::protocols::{ProtocolKind, TomographyProtocol};
use crate::qcore::{linalg, ChoiMatrix, DensityMatrix};
use crate::readout::{DiagonalSpamModel, PovmSet, SpamModel};
use crate::sim::{evolve_effect_noisy, evolve_noisy};

/// SPAM operators assumed by a reconstruction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpamAssumption {
    Ideal,
    Diagonal { model: DiagonalSpamModel },
    Gibbs { temperature: f64, omegas: Vec<f64>, b0: f64, b1: f64 },
    True { model: SpamModel },
}

impl SpamAssumption {
    pub fn spam_model(&self) -> Result<SpamModel> {
        match self {
            SpamAssumption::Ideal => Ok(SpamModel::ideal()),
            SpamAssumption::Diagonal { model } => SpamModel::diagonal(model),
            SpamAssumption::Gibbs { temperature, omegas, b0, b1 } => SpamModel::gibbs(*temperature, omegas.clone(), *b0, *b1),
            SpamAssumption::True { model } => Ok(model.clone()),
        }
    }
}

/// Effective input state and measurement operators of one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitModel {
    pub label: String,
    pub input: DensityMatrix,
    pub povm: PovmSet,
}

/// Effective `(rho_i, P_ik)` for every circuit of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    pub kind: ProtocolKind,
    pub dim: usize,
    pub circuits: Vec<CircuitModel>,
}

/// Builds `rho_i = U_i^p(rho_0)` and `P_ik = U_i^m(Π_k)` (Heisenberg picture)
/// under the given SPAM assumption.
///
/// With `gate_depol` set, every gate is followed by a depolarizing channel
/// of that strength, exactly as in the simulator; with `None` gates are ideal.
pub fn build_measurement_model(
    protocol: &TomographyProtocol,
    spam: &SpamAssumption,
    gate_depol: Option<f64>,
) -> Result<MeasurementModel> {
    let d = protocol.dim;
    let p = gate_depol.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("gate depolarizing probability {p} outside [0, 1]"));
    }
    let spam = spam.spam_model()?;
    let rho0 = spam.initial_state(d)?;
    let povm = spam.povm(d)?;
    let circuits = protocol
        .circuits
        .iter()
        .map(|c| {
            let mut rho = rho0.matrix().clone();
            evolve_noisy(&mut rho, &c.prep, p);
            let effects = povm.operators().iter().map(|e| linalg::hermitian_part(&evolve_effect_noisy(e, &c.meas, p))).collect();
            Ok(CircuitModel { label: c.label.clone(), input: DensityMatrix::from_approx(&rho)?, povm: PovmSet::new(effects)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementModel { kind: protocol.kind, dim: d, circuits })
}

impl MeasurementModel {
    /// Coordinates of `P_ik` in the real Hermitian basis.
    pub(crate) fn state_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.circuits.iter().map(|c| c.povm.operators().iter().map(linalg::hermitian_to_real_vec).collect()).collect()
    }

    /// Coordinates of `rho_i^T ⊗ P_ik`, so that `p_ik = Tr(J (rho_i^T ⊗ P_ik))`.
    pub(crate) fn process_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.circuits
            .iter()
            .map(|c| {
                let rt = c.input.matrix().transpose();
                c.povm.operators().iter().map(|e| linalg::hermitian_to_real_vec(&linalg::kron(&rt, e))).collect()
            })
            .collect()
    }

    /// Model probabilities `Tr(rho P_ik)`.
    pub fn state_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rho.dim() });
        }
        Ok(self.circuits.iter().map(|c| c.povm.probabilities(rho)).collect())
    }

    /// Model probabilities `Tr(Λ(rho_i) P_ik)`.
    pub fn process_probabilities(&self, choi: &ChoiMatrix) -> Result<Vec<Vec<f64>>> {
        if choi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: choi.dim() });
        }
        Ok(self
            .circuits
            .iter()
            .map(|c| {
                let out = choi.apply_raw(c.input.matrix());
                c.povm.operators().iter().map(|e| linalg::trace_product_re(&out, e)).collect()
            })
            .collect())
    }

    pub(crate) fn check_data(&self, weights: &[Vec<f64>]) -> Result<()> {
        if weights.len() != self.circuits.len() {
            return Err(Error::DimensionMismatch { expected: self.circuits.len(), got: weights.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{qpt_two_level, qst_two_level};
    use crate::qcore::{haar_random_state, haar_random_unitary, RandomSeed};
    use crate::sim::{circuit_probabilities, NoiseConfig, Truth};

    #[test]
    fn ideal_qst_model_uses_rotated_projectors() {
        let proto = qst_two_level(3).unwrap();
        let model = build_measurement_model(&proto, &SpamAssumption::Ideal, None).unwrap();
        for (c, m) in proto.circuits.iter().zip(&model.circuits) {
            let u = c.meas_unitary().unwrap();
            for (k, e) in m.povm.operators().iter().enumerate() {
                let expected = u.matrix().adjoint() * linalg::basis_projector(3, k) * u.matrix();
                assert!(linalg::max_abs_diff(e, &expected) < 1e-14);
            }
            assert_eq!(m.input, DensityMatrix::basis(3, 0).unwrap());
        }
    }

    #[test]
    fn true_model_matches_simulator() {
        let spam = SpamModel::gibbs(1.0, vec![0.0, 4.0, 6.0], 0.01, 0.02).unwrap();
        let noise = NoiseConfig::new(0.001, spam.clone(), 0.0).unwrap();
        let assumption = SpamAssumption::True { model: spam };

        let qst = qst_two_level(3).unwrap();
        let rho = DensityMatrix::pure(&haar_random_state(3, RandomSeed::new(1)).unwrap()).unwrap();
        let model = build_measurement_model(&qst, &assumption, Some(0.001)).unwrap();
        for (c, p) in qst.circuits.iter().zip(model.state_probabilities(&rho).unwrap()) {
            let q = circuit_probabilities(c, Truth::State(&rho), &noise).unwrap();
            assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
        }

        let qpt = qpt_two_level(3).unwrap();
        let choi = ChoiMatrix::from_unitary(&haar_random_unitary(3, RandomSeed::new(2)).unwrap()).compose_depolarize(0.01).unwrap();
        let model = build_measurement_model(&qpt, &assumption, Some(0.001)).unwrap();
        for (c, p) in qpt.circuits.iter().zip(model.process_probabilities(&choi).unwrap()) {
            let q = circuit_probabilities(c, Truth::Process(&choi), &noise).unwrap();
            assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn gibbs_assumption_equals_spam_model() {
        let a = SpamAssumption::Gibbs { temperature: 0.9868, omegas: vec![0.0, 4.0, 6.0], b0: 0.0116, b1: 0.0203 };
        let m = a.spam_model().unwrap();
        assert_eq!(m, SpamModel::gibbs(0.9868, vec![0.0, 4.0, 6.0], 0.0116, 0.0203).unwrap());
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains("\"kind\":\"gibbs\""));
        assert_eq!(serde_json::from_str::<SpamAssumption>(&text).unwrap(), a);
    }

    #[test]
    fn rows_reproduce_probabilities() {
        let proto = qpt_two_level(2).unwrap();
        let model = build_measurement_model(&proto, &SpamAssumption::Ideal, Some(0.01)).unwrap();
        let choi = ChoiMatrix::from_unitary(&haar_random_unitary(2, RandomSeed::new(5)).unwrap());
        let x = linalg::hermitian_to_real_vec(choi.matrix());
        let probs = model.process_probabilities(&choi).unwrap();
        for (rows, p) in model.process_rows().iter().zip(&probs) {
            for (r, q) in rows.iter().zip(p) {
                let dot: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((dot - q).abs() < 1e-12);
            }
        }
        assert!(model.check_data(&[vec![1.0]]).is_err());
    }
}
