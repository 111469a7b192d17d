use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{genetic_optimize, FitReport, JsonEstimate, OptimizerConfig, PROBABILITY_FLOOR};
use crate::error::{domain, Error, Result};
use crate::protocols::{spam_calibration_circuits, MeasurementCircuit};
use crate::qcore::linalg;
use crate::readout::{gibbs_populations, DiagonalSpamModel, GibbsInitParams};
use crate::sim::{evolve_noisy, CountsDataset};

/// Logit box for simplex parameters; `e^-15` is far below any tolerance
/// used for the fitted probabilities.
const LOGIT_BOUND: f64 = 15.0;

/// Temperature search range of the Gibbs fit, searched on a log scale.
const T_MIN: f64 = 1e-2;
const T_MAX: f64 = 100.0;
const B_MAX: f64 = 0.5;

/// Linear maps from initial populations to pre-readout populations, one per
/// calibration circuit, including gate depolarization.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub dim: usize,
    pub gate_depol_p: f64,
    transfers: Vec<DMatrix<f64>>,
}

impl CalibrationModel {
    pub fn new(circuits: &[MeasurementCircuit], gate_depol_p: f64) -> Result<Self> {
        if circuits.is_empty() {
            return domain("no calibration circuits");
        }
        if !(0.0..=1.0).contains(&gate_depol_p) {
            return domain(format!("gate depolarizing probability {gate_depol_p} outside [0, 1]"));
        }
        let d = circuits[0].dim;
        let transfers = circuits
            .iter()
            .map(|c| {
                let full = c.prep.clone().then(&c.meas)?;
                let mut t = DMatrix::zeros(d, d);
                for l in 0..d {
                    let mut rho = linalg::basis_projector(d, l);
                    evolve_noisy(&mut rho, &full, gate_depol_p);
                    for j in 0..d {
                        t[(j, l)] = rho[(j, j)].re;
                    }
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: d, gate_depol_p, transfers })
    }

    /// The `d` standard calibration circuits.
    pub fn standard(d: usize, gate_depol_p: f64) -> Result<Self> {
        Self::new(&spam_calibration_circuits(d)?, gate_depol_p)
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    fn probabilities_raw(&self, a: &[f64], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.transfers
            .iter()
            .map(|t| {
                let x: Vec<f64> = (0..self.dim).map(|j| (0..self.dim).map(|l| t[(j, l)] * a[l]).sum()).collect();
                b.iter().map(|row| row.iter().zip(&x).map(|(bk, xj)| bk * xj).sum()).collect()
            })
            .collect()
    }

    /// Outcome probabilities of every calibration circuit.
    pub fn probabilities(&self, model: &DiagonalSpamModel) -> Result<Vec<Vec<f64>>> {
        model.validate()?;
        if model.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: model.dim() });
        }
        Ok(self.probabilities_raw(&model.a, &model.b))
    }
}

fn multinomial_ll(weights: &[Vec<f64>], probs: &[Vec<f64>], total: f64) -> f64 {
    let mut acc = 0.0;
    for (w, p) in weights.iter().zip(probs) {
        for (n, q) in w.iter().zip(p) {
            if *n > 0.0 {
                acc += n * q.max(PROBABILITY_FLOOR).ln();
            }
        }
    }
    acc / total
}

fn check_weights(weights: &[Vec<f64>], circuits: usize, outcomes: usize) -> Result<f64> {
    if weights.len() != circuits {
        return Err(Error::DimensionMismatch { expected: circuits, got: weights.len() });
    }
    if let Some(w) = weights.iter().find(|w| w.len() != outcomes) {
        return Err(Error::DimensionMismatch { expected: outcomes, got: w.len() });
    }
    if weights.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
        return domain("counts must be finite and nonnegative");
    }
    let total: f64 = weights.iter().flatten().sum();
    if total <= 0.0 {
        return domain("calibration dataset contains no shots");
    }
    Ok(total)
}

/// Log-likelihood per shot of a diagonal SPAM model on calibration data.
pub fn spam_log_likelihood(weights: &[Vec<f64>], calib: &CalibrationModel, model: &DiagonalSpamModel) -> Result<f64> {
    let total = check_weights(weights, calib.len(), calib.dim)?;
    Ok(multinomial_ll(weights, &calib.probabilities(model)?, total))
}

fn residual(weights: &[Vec<f64>], probs: &[Vec<f64>]) -> f64 {
    let mut max: f64 = 0.0;
    for (w, p) in weights.iter().zip(probs) {
        let n: f64 = w.iter().sum();
        if n > 0.0 {
            for (x, q) in w.iter().zip(p) {
                max = max.max((q - x / n).abs());
            }
        }
    }
    max
}

fn floored(weights: &[Vec<f64>], probs: &[Vec<f64>]) -> usize {
    weights.iter().flatten().zip(probs.iter().flatten()).filter(|(n, q)| **n > 0.0 && **q < PROBABILITY_FLOOR).count()
}

fn report<E>(estimate: E, weights: &[Vec<f64>], probs: Vec<Vec<f64>>, total: f64, evaluations: usize) -> FitReport<E> {
    let per_shot = multinomial_ll(weights, &probs, total);
    FitReport {
        estimate,
        log_likelihood: per_shot * total,
        log_likelihood_per_shot: per_shot,
        iterations: evaluations,
        converged: per_shot.is_finite(),
        max_residual: residual(weights, &probs),
        floored_outcomes: floored(weights, &probs),
        predicted: probs,
        history: Vec::new(),
    }
}

/// Softmax with a fixed zero logit at position `reference`.
fn softmax_with_reference(logits: &[f64], reference: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(logits.len() + 1);
    z.extend_from_slice(&logits[..reference]);
    z.push(0.0);
    z.extend_from_slice(&logits[reference..]);
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `(a, B)` from `(d - 1)(d + 1)` logits: one block for `a` (reference
/// level 0), then one block per column `j` of `B` (reference outcome `j`).
fn decode_general(params: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = d - 1;
    let a = softmax_with_reference(&params[..k], 0);
    let mut b = vec![vec![0.0; d]; d];
    for j in 0..d {
        let col = softmax_with_reference(&params[k * (j + 1)..k * (j + 2)], j);
        for (row, v) in b.iter_mut().zip(col) {
            row[j] = v;
        }
    }
    (a, b)
}

/// General diagonal SPAM fit from calibration counts.
pub fn estimate_spam_general(data: &CountsDataset, gate_depol_p: f64, config: &OptimizerConfig) -> Result<FitReport<DiagonalSpamModel>> {
    let d = data.circuits.len();
    if d < 2 {
        return domain("calibration data needs at least two circuits");
    }
    estimate_spam_general_weights(&data.weights(), &CalibrationModel::standard(d, gate_depol_p)?, config)
}

/// Maximizes the multinomial likelihood over `a` and the columns of `B`,
/// each parametrized on its simplex by softmax, with [`genetic_optimize`].
pub fn estimate_spam_general_weights(weights: &[Vec<f64>], calib: &CalibrationModel, config: &OptimizerConfig) -> Result<FitReport<DiagonalSpamModel>> {
    let d = calib.dim;
    let total = check_weights(weights, calib.len(), d)?;
    let n_params = (d - 1) * (d + 1);
    let objective = |x: &[f64]| {
        let (a, b) = decode_general(x, d);
        multinomial_ll(weights, &calib.probabilities_raw(&a, &b), total)
    };
    let result = genetic_optimize(objective, &vec![(-LOGIT_BOUND, LOGIT_BOUND); n_params], config)?;
    let (a, b) = decode_general(&result.best, d);
    let model = DiagonalSpamModel::new(a, b)?;
    let probs = calib.probabilities(&model)?;
    Ok(report(model, weights, probs, total, result.evaluations))
}

/// Fitted thermal initialization and level-read error parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsFit {
    pub temperature: f64,
    pub b0: f64,
    pub b1: f64,
    pub omegas: Vec<f64>,
}

impl JsonEstimate for GibbsFit {
    fn to_json_value(&self) -> Value {
        json!({ "type": "gibbs", "temperature": self.temperature, "b0": self.b0, "b1": self.b1, "omegas": self.omegas })
    }
}

/// Settings of the Gibbs fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsFitConfig {
    pub omegas: Vec<f64>,
    pub optimizer: OptimizerConfig,
}

/// Click probability `Tr(rho_0 E_j) = (1 - b0) a_j + b1 (1 - a_j)` of each
/// isolated level read.
pub fn gibbs_level_read_probabilities(temperature: f64, omegas: &[f64], b0: f64, b1: f64) -> Result<Vec<f64>> {
    let a = gibbs_populations(&GibbsInitParams::new(temperature, omegas.to_vec())?)?;
    Ok(a.iter().map(|aj| (1.0 - b0) * aj + b1 * (1.0 - aj)).collect())
}

fn binary_rows(q: &[f64]) -> Vec<Vec<f64>> {
    q.iter().map(|x| vec![1.0 - x, *x]).collect()
}

/// Gibbs fit from binary level-read counts (outcome 1 = click).
pub fn estimate_spam_gibbs(data: &CountsDataset, config: &GibbsFitConfig) -> Result<FitReport<GibbsFit>> {
    estimate_spam_gibbs_weights(&data.weights(), config)
}

/// Maximizes the likelihood over `(ln T, b0, b1)` with
/// `T ∈ [0.01, 100]` and `b0, b1 ∈ [0, 0.5]`.
pub fn estimate_spam_gibbs_weights(weights: &[Vec<f64>], config: &GibbsFitConfig) -> Result<FitReport<GibbsFit>> {
    let d = config.omegas.len();
    GibbsInitParams::new(1.0, config.omegas.clone())?;
    let total = check_weights(weights, d, 2)?;
    if weights.iter().all(|w| w[1] == 0.0) && weights.iter().all(|w| w[0] == 0.0) {
        return domain("level-read dataset is empty");
    }
    let objective = |x: &[f64]| match gibbs_level_read_probabilities(x[0].exp(), &config.omegas, x[1], x[2]) {
        Ok(q) => multinomial_ll(weights, &binary_rows(&q), total),
        Err(_) => f64::NEG_INFINITY,
    };
    let bounds = [(T_MIN.ln(), T_MAX.ln()), (0.0, B_MAX), (0.0, B_MAX)];
    let result = genetic_optimize(objective, &bounds, &config.optimizer)?;
    let fit = GibbsFit { temperature: result.best[0].exp(), b0: result.best[1], b1: result.best[2], omegas: config.omegas.clone() };
    let q = gibbs_level_read_probabilities(fit.temperature, &fit.omegas, fit.b0, fit.b1)?;
    Ok(report(fit, weights, binary_rows(&q), total, result.evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::RandomSeed;
    use crate::readout::{gauge_transform, SpamModel};
    use crate::sim::{circuit_probabilities, run_circuits, run_level_reads, NoiseConfig, Truth};

    fn omegas() -> Vec<f64> {
        vec![0.0, 4.0, 6.0]
    }

    fn reference_truth() -> SpamModel {
        SpamModel::gibbs(1.0, omegas(), 0.01, 0.02).unwrap()
    }

    #[test]
    fn calibration_model_matches_simulator() {
        let spam = reference_truth();
        let noise = NoiseConfig::new(0.001, spam.clone(), 0.0).unwrap();
        let circuits = spam_calibration_circuits(3).unwrap();
        let calib = CalibrationModel::new(&circuits, 0.001).unwrap();
        let probs = calib.probabilities(&spam.to_diagonal(3).unwrap()).unwrap();
        for (c, p) in circuits.iter().zip(&probs) {
            let q = circuit_probabilities(c, Truth::None, &noise).unwrap();
            assert!(p.iter().zip(&q).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn softmax_decoding() {
        let (a, b) = decode_general(&[0.0; 8], 3);
        assert!(a.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(b.iter().flatten().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let (a, b) = decode_general(&[-LOGIT_BOUND; 8], 3);
        assert!(a[0] > 1.0 - 1e-6);
        assert!((0..3).all(|j| b[j][j] > 1.0 - 1e-6));
    }

    #[test]
    fn gauge_flatness_of_likelihood() {
        let truth = reference_truth().to_diagonal(3).unwrap();
        let calib = CalibrationModel::standard(3, 0.001).unwrap();
        let data = run_circuits(
            &spam_calibration_circuits(3).unwrap(),
            Truth::None,
            &NoiseConfig::new(0.001, reference_truth(), 0.0).unwrap(),
            1_000_000,
            RandomSeed::new(1),
        )
        .unwrap();
        let w = data.weights();
        let l0 = spam_log_likelihood(&w, &calib, &truth).unwrap();
        for p in [0.001, 0.003, 0.007] {
            let moved = gauge_transform(&truth, p).unwrap();
            let l1 = spam_log_likelihood(&w, &calib, &moved).unwrap();
            assert!((l0 - l1).abs() <= 1e-6, "p={p}: {l0} vs {l1}");
        }
    }

    #[test]
    fn general_fit_noiseless_fixed_point() {
        let calib = CalibrationModel::standard(3, 0.0).unwrap();
        let w: Vec<Vec<f64>> = (0..3).map(|j| (0..3).map(|k| if j == k { 1000.0 } else { 0.0 }).collect()).collect();
        let fit = estimate_spam_general_weights(&w, &calib, &OptimizerConfig::default()).unwrap();
        let ideal = DiagonalSpamModel::ideal(3);
        assert!(fit.estimate.a.iter().zip(&ideal.a).all(|(x, y)| (x - y).abs() < 1e-3), "{:?}", fit.estimate);
        assert!(fit.estimate.b.iter().flatten().zip(ideal.b.iter().flatten()).all(|(x, y)| (x - y).abs() < 1e-3));
    }

    #[test]
    fn general_fit_reproduces_probabilities() {
        let truth = reference_truth();
        let calib = CalibrationModel::standard(3, 0.001).unwrap();
        let exact = calib.probabilities(&truth.to_diagonal(3).unwrap()).unwrap();
        let w: Vec<Vec<f64>> = exact.iter().map(|p| p.iter().map(|x| x * 333_333.0).collect()).collect();
        let fit = estimate_spam_general_weights(&w, &calib, &OptimizerConfig::default()).unwrap();
        assert!(fit.max_residual < 1e-3, "{}", fit.max_residual);
        assert!(fit.estimate.validate().is_ok());
    }

    #[test]
    fn gibbs_fit_from_exact_probabilities() {
        let q = gibbs_level_read_probabilities(1.0, &omegas(), 0.01, 0.02).unwrap();
        let w: Vec<Vec<f64>> = binary_rows(&q).into_iter().map(|r| r.into_iter().map(|x| x * 333_333.0).collect()).collect();
        let cfg = GibbsFitConfig { omegas: omegas(), optimizer: OptimizerConfig::default() };
        let fit = estimate_spam_gibbs_weights(&w, &cfg).unwrap();
        let e = &fit.estimate;
        assert!((e.temperature - 1.0).abs() < 1e-4, "{e:?}");
        assert!((e.b0 - 0.01).abs() < 1e-4 && (e.b1 - 0.02).abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn gibbs_fit_noiseless_boundary() {
        let q = gibbs_level_read_probabilities(1.0, &omegas(), 0.0, 0.0).unwrap();
        let w: Vec<Vec<f64>> = binary_rows(&q).into_iter().map(|r| r.into_iter().map(|x| x * 333_333.0).collect()).collect();
        let cfg = GibbsFitConfig { omegas: omegas(), optimizer: OptimizerConfig::default() };
        let e = estimate_spam_gibbs_weights(&w, &cfg).unwrap().estimate;
        assert!(e.b0 < 1e-4 && e.b1 < 1e-4, "{e:?}");
        assert!((e.temperature - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gibbs_fit_from_samples() {
        let noise = NoiseConfig::new(0.0, reference_truth(), 0.0).unwrap();
        let data = run_level_reads(&noise, 3, 1_000_000, RandomSeed::new(11)).unwrap();
        let cfg = GibbsFitConfig { omegas: omegas(), optimizer: OptimizerConfig::default() };
        let e = estimate_spam_gibbs(&data, &cfg).unwrap().estimate;
        assert!((e.temperature - 1.0).abs() <= 0.05 && (e.b0 - 0.01).abs() <= 0.005 && (e.b1 - 0.02).abs() <= 0.005, "{e:?}");
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let cfg = GibbsFitConfig { omegas: omegas(), optimizer: OptimizerConfig::default() };
        assert!(estimate_spam_gibbs_weights(&vec![vec![0.0, 0.0]; 3], &cfg).is_err());
        let calib = CalibrationModel::standard(3, 0.0).unwrap();
        assert!(estimate_spam_general_weights(&vec![vec![0.0; 3]; 3], &calib, &OptimizerConfig::default()).is_err());
        assert!(estimate_spam_general_weights(&vec![vec![1.0; 3]; 2], &calib, &OptimizerConfig::default()).is_err());
    }
}
