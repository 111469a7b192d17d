use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{projected_gradient, AscentState, FitReport, LinearLikelihood, MeasurementModel};
use crate::error::{Error, Result};
use crate::qcore::linalg::{self, c, CMatrix};
use crate::qcore::ChoiMatrix;
use crate::sim::CountsDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessMleOptions {
    /// Stop once the log-likelihood per shot gains less than this over
    /// [`STALL_WINDOW`](super::STALL_WINDOW) iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Alternations per CPTP projection.
    pub max_projection_steps: usize,
    pub record_history: bool,
}

impl Default for ProcessMleOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 10_000, max_projection_steps: 200, record_history: false }
    }
}

/// Maximum-likelihood Choi matrix for a process tomography dataset.
pub fn mle_process(data: &CountsDataset, model: &MeasurementModel) -> Result<FitReport<ChoiMatrix>> {
    mle_process_weights(&data.weights(), model, &ProcessMleOptions::default())
}

/// `J - (Tr_out J - I) ⊗ I / d`: orthogonal projection onto trace-preserving maps.
fn tp_projection(m: &CMatrix, d: usize) -> CMatrix {
    let mut excess = linalg::partial_trace_second(m, d);
    for i in 0..d {
        excess[(i, i)] -= c(1.0, 0.0);
    }
    let mut out = m.clone();
    let scale = 1.0 / d as f64;
    for i in 0..d {
        for j in 0..d {
            let v = excess[(i, j)] * scale;
            for a in 0..d {
                out[(i * d + a, j * d + a)] -= v;
            }
        }
    }
    out
}

/// `(M^{-1/2} ⊗ I) J (M^{-1/2} ⊗ I)` with `M = Tr_out J`; exact trace
/// preservation while keeping positivity.
fn tp_normalize(m: &CMatrix, d: usize) -> Result<CMatrix> {
    let pt = linalg::partial_trace_second(m, d);
    let (values, _) = linalg::hermitian_eigen(&pt);
    if values[0] <= 1e-12 {
        return Err(Error::Numerical(format!("input marginal of Choi iterate is singular (min eigenvalue {:e})", values[0])));
    }
    let s = linalg::hermitian_fn(&pt, |v| 1.0 / v.sqrt());
    let big = linalg::kron(&s, &linalg::identity(d));
    Ok(linalg::hermitian_part(&(&big * m * &big)))
}

/// Nearest CPTP Choi matrix by Dykstra alternation between the PSD cone and
/// the trace-preserving affine set, finished by an exact TP normalization.
pub fn cptp_projection(m: &CMatrix, d: usize, max_steps: usize) -> Result<CMatrix> {
    if m.nrows() != d * d || m.ncols() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: m.nrows() });
    }
    let n = d * d;
    let mut x = linalg::hermitian_part(m);
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    let mut y = x.clone();
    for _ in 0..max_steps.max(1) {
        y = linalg::psd_projection(&(&x + &p));
        p = &x + &p - &y;
        let next = tp_projection(&(&y + &q), d);
        q = &y + &q - &next;
        let change = linalg::max_abs_diff(&next, &x);
        x = next;
        if change < 1e-13 {
            break;
        }
    }
    tp_normalize(&y, d)
}

/// Projected gradient ascent with Barzilai-Borwein steps and Armijo
/// backtracking over CPTP Choi matrices.
pub fn mle_process_weights(weights: &[Vec<f64>], model: &MeasurementModel, opts: &ProcessMleOptions) -> Result<FitReport<ChoiMatrix>> {
    model.check_data(weights)?;
    let d = model.dim;
    let n = d * d;
    let ll = LinearLikelihood::new(&model.process_rows(), weights)?;
    let to_vec = |m: &CMatrix| DVector::from_vec(linalg::hermitian_to_real_vec(m));
    let project = |v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(to_vec(&cptp_projection(&linalg::real_vec_to_hermitian(v.as_slice(), n), d, opts.max_projection_steps)?))
    };

    let x0 = to_vec(&(linalg::identity(n) * c(1.0 / d as f64, 0.0)));
    let mut history = if opts.record_history { vec![ll.value(&x0)] } else { Vec::new() };
    let mut sink = opts.record_history.then_some(&mut history);
    let AscentState { x, iterations, converged } = projected_gradient(&ll, x0, project, opts.tolerance, opts.max_iterations, &mut sink)?;
    let estimate = ChoiMatrix::new(d, linalg::real_vec_to_hermitian(x.as_slice(), n))?;
    Ok(ll.report(estimate, &x, iterations, converged, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::qpt_two_level;
    use crate::qcore::{haar_random_unitary, process_fidelity, RandomSeed};
    use crate::recon::{build_measurement_model, SpamAssumption};

    fn exact_weights(model: &MeasurementModel, choi: &ChoiMatrix, shots: f64) -> Vec<Vec<f64>> {
        model.process_probabilities(choi).unwrap().into_iter().map(|p| p.into_iter().map(|x| x * shots).collect()).collect()
    }

    #[test]
    fn projection_fixes_cptp_points_and_repairs_others() {
        let u = haar_random_unitary(3, RandomSeed::new(1)).unwrap();
        let choi = ChoiMatrix::from_unitary(&u).compose_depolarize(0.1).unwrap();
        let proj = cptp_projection(choi.matrix(), 3, 200).unwrap();
        assert!(linalg::max_abs_diff(&proj, choi.matrix()) < 1e-10);

        let noisy = choi.matrix() + CMatrix::from_fn(9, 9, |i, j| c(((i * 7 + j * 3) % 5) as f64 * 0.05, 0.0));
        let fixed = ChoiMatrix::new(3, cptp_projection(&noisy, 3, 200).unwrap()).unwrap();
        assert!(fixed.tp_error() < 1e-12);
        assert!(cptp_projection(&CMatrix::zeros(4, 4), 3, 10).is_err());
    }

    #[test]
    fn identity_channel_from_exact_data() {
        let proto = qpt_two_level(3).unwrap();
        let model = build_measurement_model(&proto, &SpamAssumption::Ideal, None).unwrap();
        let id = ChoiMatrix::identity(3);
        let fit = mle_process_weights(&exact_weights(&model, &id, 1e6), &model, &ProcessMleOptions::default()).unwrap();
        let f = process_fidelity(&fit.estimate, &id).unwrap();
        assert!(f >= 1.0 - 1e-5, "{f} after {} iterations", fit.iterations);
        assert!(fit.estimate.tp_error() < 1e-6);
    }

    #[test]
    fn noisy_unitary_from_exact_data() {
        let proto = qpt_two_level(3).unwrap();
        let model = build_measurement_model(&proto, &SpamAssumption::Ideal, None).unwrap();
        let u = haar_random_unitary(3, RandomSeed::new(9)).unwrap();
        let truth = ChoiMatrix::from_unitary(&u).compose_depolarize(0.01).unwrap();
        let opts = ProcessMleOptions { record_history: true, ..Default::default() };
        let fit = mle_process_weights(&exact_weights(&model, &truth, 1e6), &model, &opts).unwrap();
        let f = process_fidelity(&fit.estimate, &truth).unwrap();
        assert!(f >= 1.0 - 1e-5, "{f} after {} iterations", fit.iterations);
        assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn qubit_channel() {
        let proto = qpt_two_level(2).unwrap();
        let model = build_measurement_model(&proto, &SpamAssumption::Ideal, None).unwrap();
        let truth = ChoiMatrix::from_unitary(&haar_random_unitary(2, RandomSeed::new(3)).unwrap()).compose_depolarize(0.2).unwrap();
        let fit = mle_process_weights(&exact_weights(&model, &truth, 1e5), &model, &ProcessMleOptions::default()).unwrap();
        assert!(process_fidelity(&fit.estimate, &truth).unwrap() > 1.0 - 1e-6);
    }
}
