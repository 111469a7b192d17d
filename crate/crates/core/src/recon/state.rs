use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{projected_gradient, FitReport, LinearLikelihood, MeasurementModel, StallDetector};
use crate::error::{Error, Result};
use crate::qcore::{linalg, DensityMatrix};
use crate::sim::CountsDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMleOptions {
    /// Weight kept on the previous iterate.
    pub epsilon: f64,
    /// Stop once the log-likelihood per shot gains less than this over
    /// [`STALL_WINDOW`](super::STALL_WINDOW) iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iteration cap of the projected-gradient refinement that follows the
    /// `RρR` phase; zero disables it.
    pub refine_iterations: usize,
    pub record_history: bool,
}

impl Default for StateMleOptions {
    fn default() -> Self {
        Self { epsilon: 0.1, tolerance: 1e-10, max_iterations: 10_000, refine_iterations: 2_000, record_history: false }
    }
}

/// Maximum-likelihood density matrix for a counts dataset.
pub fn mle_state(data: &CountsDataset, model: &MeasurementModel) -> Result<FitReport<DensityMatrix>> {
    mle_state_weights(&data.weights(), model, &StateMleOptions::default())
}

/// Diluted `RρR` iteration on arbitrary nonnegative weights per outcome.
///
/// Each step moves from `rho` toward `N[R rho R]` with weight `1 - epsilon`;
/// if that lowers the likelihood the weight is halved until it does not, so
/// the log-likelihood never decreases. `RρR` slows down badly near
/// rank-deficient optima, so it is followed by projected gradient ascent
/// over density matrices, which is also monotone.
pub fn mle_state_weights(weights: &[Vec<f64>], model: &MeasurementModel, opts: &StateMleOptions) -> Result<FitReport<DensityMatrix>> {
    model.check_data(weights)?;
    if !(0.0..1.0).contains(&opts.epsilon) {
        return Err(Error::Config(format!("epsilon {} outside [0, 1)", opts.epsilon)));
    }
    let d = model.dim;
    let ll = LinearLikelihood::new(&model.state_rows(), weights)?;
    let mut rho = DensityMatrix::maximally_mixed(d).into_matrix();
    let mut x = DVector::from_vec(linalg::hermitian_to_real_vec(&rho));
    let mut p = ll.probabilities(&x);
    let mut value = ll.value_at(&p);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(value);
    }
    let mut stall = StallDetector::new(opts.tolerance, value);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let r = linalg::real_vec_to_hermitian(ll.gradient_at(&p).as_slice(), d);
        let rrr = &r * &rho * &r;
        let tr = linalg::trace(&rrr).re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Numerical(format!("RρR iteration produced trace {tr}")));
        }
        let target = DVector::from_vec(linalg::hermitian_to_real_vec(&linalg::hermitian_part(&rrr))) / tr;
        let mut t = 1.0 - opts.epsilon;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x * (1.0 - t) + &target * t;
            let pc = ll.probabilities(&cand);
            let vc = ll.value_at(&pc);
            if vc >= value {
                accepted = Some((cand, pc, vc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, pc, vc)) = accepted else {
            converged = true;
            break;
        };
        x = cand;
        p = pc;
        value = vc;
        rho = linalg::real_vec_to_hermitian(x.as_slice(), d);
        if opts.record_history {
            history.push(value);
        }
        if stall.push(value) {
            converged = true;
            break;
        }
    }
    if opts.refine_iterations > 0 {
        let project = |v: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(linalg::hermitian_to_real_vec(&linalg::density_projection(&linalg::real_vec_to_hermitian(v.as_slice(), d)))))
        };
        let mut sink = opts.record_history.then_some(&mut history);
        let refined = projected_gradient(&ll, x, project, opts.tolerance * 1e-3, opts.refine_iterations, &mut sink)?;
        x = refined.x;
        iterations += refined.iterations;
        converged = refined.converged;
        rho = linalg::real_vec_to_hermitian(x.as_slice(), d);
    }
    let estimate = DensityMatrix::from_approx(&rho)?;
    Ok(ll.report(estimate, &x, iterations, converged, history))
}
