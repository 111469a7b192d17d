//! Maximum-likelihood reconstruction of states, processes and SPAM parameters.

mod genetic;
mod model;
mod process;
mod spam;
mod state;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{domain, Error, Result};
use crate::qcore::{ChoiMatrix, DensityMatrix};

pub use genetic::{genetic_optimize, GeneticResult, OptimizerConfig};
pub use model::{build_measurement_model, CircuitModel, MeasurementModel, SpamAssumption};
pub use process::{cptp_projection, mle_process, mle_process_weights, ProcessMleOptions};
pub use spam::{
    estimate_spam_general, estimate_spam_general_weights, estimate_spam_gibbs, estimate_spam_gibbs_weights,
    gibbs_level_read_probabilities, spam_log_likelihood, CalibrationModel, GibbsFit, GibbsFitConfig,
};
pub use state::{mle_state, mle_state_weights, StateMleOptions};

/// Model probabilities below this value are floored inside logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Iterations over which the likelihood gain is measured by the stopping rule.
pub const STALL_WINDOW: usize = 20;

/// Stopping rule shared by the iterative estimators: stop once the
/// log-likelihood per shot has gained less than `tol` over the last
/// [`STALL_WINDOW`] iterations.
#[derive(Debug, Clone)]
pub(crate) struct StallDetector {
    recent: std::collections::VecDeque<f64>,
    tol: f64,
}

impl StallDetector {
    pub fn new(tol: f64, start: f64) -> Self {
        let mut recent = std::collections::VecDeque::with_capacity(STALL_WINDOW + 1);
        recent.push_back(start);
        Self { recent, tol }
    }

    /// Records a new value; true when the rule is met.
    pub fn push(&mut self, value: f64) -> bool {
        self.recent.push_back(value);
        if self.recent.len() > STALL_WINDOW + 1 {
            self.recent.pop_front();
        }
        self.recent.len() == STALL_WINDOW + 1 && value - self.recent[0] < self.tol
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitReport<E> {
    pub estimate: E,
    /// Total log-likelihood `sum n_ik log p_ik`.
    pub log_likelihood: f64,
    /// Log-likelihood divided by the number of shots.
    pub log_likelihood_per_shot: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max |p_model - n_ik / n_i|` over all circuits and outcomes.
    pub max_residual: f64,
    /// Observed outcomes whose model probability hit the floor.
    pub floored_outcomes: usize,
    /// Model outcome probabilities at the estimate, per circuit.
    pub predicted: Vec<Vec<f64>>,
    /// Per-iteration log-likelihood per shot, when requested.
    pub history: Vec<f64>,
}

/// Estimates that can be written into a JSON fit report.
pub trait JsonEstimate {
    fn to_json_value(&self) -> Value;
}

fn complex_json(m: &crate::qcore::CMatrix) -> Value {
    let rows = m.nrows();
    let re: Vec<f64> = (0..rows).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij].re).collect();
    let im: Vec<f64> = (0..rows).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij].im).collect();
    json!({ "rows": rows, "cols": m.ncols(), "re": re, "im": im })
}

impl JsonEstimate for DensityMatrix {
    fn to_json_value(&self) -> Value {
        json!({ "type": "density_matrix", "dim": self.dim(), "matrix": complex_json(self.matrix()) })
    }
}

impl JsonEstimate for ChoiMatrix {
    fn to_json_value(&self) -> Value {
        json!({ "type": "choi_matrix", "dim": self.dim(), "matrix": complex_json(self.matrix()) })
    }
}

impl JsonEstimate for crate::readout::DiagonalSpamModel {
    fn to_json_value(&self) -> Value {
        json!({ "type": "diagonal_spam", "a": self.a, "b": self.b })
    }
}

impl<E: JsonEstimate> FitReport<E> {
    /// JSON form; `config` is echoed verbatim.
    pub fn to_json(&self, config: &impl Serialize) -> Result<Value> {
        Ok(json!({
            "estimate": self.estimate.to_json_value(),
            "log_likelihood": self.log_likelihood,
            "log_likelihood_per_shot": self.log_likelihood_per_shot,
            "iterations": self.iterations,
            "converged": self.converged,
            "diagnostics": {
                "max_residual": self.max_residual,
                "floored_outcomes": self.floored_outcomes,
                "predicted": self.predicted,
            },
            "config": serde_json::to_value(config)?,
        }))
    }
}

/// Multinomial likelihood that is linear in a real parameter vector `x`:
/// row `r` has probability `<a_r, x>` and observed weight `w_r`.
#[derive(Debug, Clone)]
pub(crate) struct LinearLikelihood {
    design: DMatrix<f64>,
    weights: DVector<f64>,
    /// Row ranges belonging to each circuit.
    circuits: Vec<std::ops::Range<usize>>,
    total: f64,
}

impl LinearLikelihood {
    /// `rows[i][k]` are the coordinates of outcome `k` of circuit `i`.
    pub fn new(rows: &[Vec<Vec<f64>>], weights: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: weights.len() });
        }
        let ncols = rows.first().and_then(|r| r.first()).map(Vec::len).unwrap_or(0);
        let mut flat = Vec::new();
        let mut w = Vec::new();
        let mut circuits = Vec::new();
        for (r, wi) in rows.iter().zip(weights) {
            if r.len() != wi.len() {
                return Err(Error::DimensionMismatch { expected: r.len(), got: wi.len() });
            }
            let start = w.len();
            for (row, &x) in r.iter().zip(wi) {
                if !x.is_finite() || x < 0.0 {
                    return domain(format!("invalid count {x}"));
                }
                flat.extend_from_slice(row);
                w.push(x);
            }
            circuits.push(start..w.len());
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return domain("dataset contains no shots");
        }
        let design = DMatrix::from_row_slice(w.len(), ncols, &flat);
        Ok(Self { design, weights: DVector::from_vec(w), circuits, total })
    }

    pub fn probabilities(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.design * x
    }

    /// Log-likelihood per shot at model probabilities `p`.
    pub fn value_at(&self, p: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (w, q) in self.weights.iter().zip(p.iter()) {
            if *w > 0.0 {
                acc += w * q.max(PROBABILITY_FLOOR).ln();
            }
        }
        acc / self.total
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_at(&self.probabilities(x))
    }

    /// Gradient per shot: `sum_r (w_r / p_r) a_r / total`.
    pub fn gradient_at(&self, p: &DVector<f64>) -> DVector<f64> {
        let ratio = DVector::from_iterator(
            p.len(),
            self.weights.iter().zip(p.iter()).map(|(w, q)| if *w > 0.0 { w / q.max(PROBABILITY_FLOOR) / self.total } else { 0.0 }),
        );
        self.design.tr_mul(&ratio)
    }

    pub fn floored(&self, p: &DVector<f64>) -> usize {
        self.weights.iter().zip(p.iter()).filter(|(w, q)| **w > 0.0 && **q < PROBABILITY_FLOOR).count()
    }

    /// Model probabilities per circuit and the largest deviation from the
    /// empirical frequencies.
    pub fn diagnostics(&self, p: &DVector<f64>) -> (Vec<Vec<f64>>, f64) {
        let mut predicted = Vec::with_capacity(self.circuits.len());
        let mut max_res: f64 = 0.0;
        for range in &self.circuits {
            let n: f64 = self.weights.rows_range(range.clone()).sum();
            let probs: Vec<f64> = range.clone().map(|r| p[r]).collect();
            if n > 0.0 {
                for (r, q) in range.clone().zip(&probs) {
                    max_res = max_res.max((q - self.weights[r] / n).abs());
                }
            }
            predicted.push(probs);
        }
        (predicted, max_res)
    }

    pub fn report<E>(&self, estimate: E, x: &DVector<f64>, iterations: usize, converged: bool, history: Vec<f64>) -> FitReport<E> {
        let p = self.probabilities(x);
        let per_shot = self.value_at(&p);
        let (predicted, max_residual) = self.diagnostics(&p);
        FitReport {
            estimate,
            log_likelihood: per_shot * self.total,
            log_likelihood_per_shot: per_shot,
            iterations,
            converged,
            max_residual,
            floored_outcomes: self.floored(&p),
            predicted,
            history,
        }
    }
}

/// Where an iterative ascent ended.
pub(crate) struct AscentState {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected gradient ascent of `ll` from the feasible point `x`, with
/// Barzilai-Borwein step lengths and Armijo backtracking along the projection
/// arc. Every accepted step increases the likelihood.
pub(crate) fn projected_gradient<P>(
    ll: &LinearLikelihood,
    mut x: DVector<f64>,
    project: P,
    tolerance: f64,
    max_iterations: usize,
    history: &mut Option<&mut Vec<f64>>,
) -> Result<AscentState>
where
    P: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let p0 = ll.probabilities(&x);
    let mut value = ll.value_at(&p0);
    let mut g = ll.gradient_at(&p0);
    let mut step = 1.0 / g.norm().max(1e-300);
    let mut stall = StallDetector::new(tolerance, value);
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut accepted = None;
        let mut s = step;
        for _ in 0..50 {
            let cand = project(&(&x + &g * s))?;
            let pc = ll.probabilities(&cand);
            let vc = ll.value_at(&pc);
            if vc >= value + 1e-4 * g.dot(&(&cand - &x)) && vc >= value {
                accepted = Some((cand, pc, vc));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, pc, vc)) = accepted else {
            return Ok(AscentState { x, iterations, converged: true });
        };
        let gc = ll.gradient_at(&pc);
        let dx = &cand - &x;
        let curv = dx.dot(&(&gc - &g));
        step = if curv < 0.0 { (dx.norm_squared() / -curv).clamp(1e-12, 1e12) } else { (s * 2.0).min(1e12) };
        x = cand;
        value = vc;
        g = gc;
        if let Some(h) = history.as_deref_mut() {
            h.push(value);
        }
        if stall.push(value) {
            return Ok(AscentState { x, iterations, converged: true });
        }
    }
    Ok(AscentState { x, iterations, converged: false })
}
