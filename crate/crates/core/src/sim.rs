//! Noisy circuit semantics and Monte Carlo data generation.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::circuits::{self, GateSequence};
use crate::error::{domain, Error, Result};
use crate::protocols::{MeasurementCircuit, TomographyProtocol};
use crate::qcore::{depolarize_raw, linalg::CMatrix, ChoiMatrix, DensityMatrix, RandomSeed, UnitaryMatrix};
use crate::readout::{level_readout_operator, PovmSet, ReadoutModel, SpamModel};

/// Negative probabilities down to this value are treated as round-off.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Noise acting during simulated experiments.
///
/// Every elementary gate is followed by a depolarizing channel of strength
/// `gate_depol_p`. `truth_depol_p` is the strength used by
/// [`NoiseConfig::truth_state`] and [`NoiseConfig::truth_process`] to build
/// the object under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gate_depol_p: f64,
    pub spam: SpamModel,
    pub truth_depol_p: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self { gate_depol_p: 0.0, spam: SpamModel::ideal(), truth_depol_p: 0.0 }
    }

    pub fn new(gate_depol_p: f64, spam: SpamModel, truth_depol_p: f64) -> Result<Self> {
        let cfg = Self { gate_depol_p, spam, truth_depol_p };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("gate_depol_p", self.gate_depol_p), ("truth_depol_p", self.truth_depol_p)] {
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("{name} = {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// `E_q(|psi><psi|)` with `q = truth_depol_p`.
    pub fn truth_state(&self, psi: &DensityMatrix) -> Result<DensityMatrix> {
        crate::qcore::depolarize(psi, self.truth_depol_p)
    }

    /// `E_q ∘ U` with `q = truth_depol_p`.
    pub fn truth_process(&self, u: &UnitaryMatrix) -> Result<ChoiMatrix> {
        ChoiMatrix::from_unitary(u).compose_depolarize(self.truth_depol_p)
    }
}

/// What sits between preparation and measurement.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    /// State tomography: the state replaces initialization and preparation.
    State(&'a DensityMatrix),
    /// Process tomography: the channel acts on the prepared state.
    Process(&'a ChoiMatrix),
    /// Calibration: the prepared state goes straight to measurement.
    None,
}

/// `rho <- E_p(G rho G^dag)` for each gate in time order.
pub(crate) fn evolve_noisy(rho: &mut CMatrix, seq: &GateSequence, p: f64) {
    for g in &seq.gates {
        circuits::apply_gate_left(g, rho);
        let mut m = rho.adjoint();
        circuits::apply_gate_left(g, &mut m);
        *rho = depolarize_raw(&m, p);
    }
}

/// Heisenberg-picture counterpart of [`evolve_noisy`] for an effect `e`.
pub(crate) fn evolve_effect_noisy(e: &CMatrix, seq: &GateSequence, p: f64) -> CMatrix {
    let mut m = e.clone();
    for g in seq.gates.iter().rev() {
        m = depolarize_raw(&m, p);
        let inv = g.inverse();
        circuits::apply_gate_left(&inv, &mut m);
        let mut t = m.adjoint();
        circuits::apply_gate_left(&inv, &mut t);
        m = t;
    }
    m
}

/// Initial state followed by the noisy preparation gates.
pub fn noisy_prep_state(circuit: &MeasurementCircuit, noise: &NoiseConfig) -> Result<DensityMatrix> {
    noise.validate()?;
    let rho0 = noise.spam.initial_state(circuit.dim)?;
    let mut m = rho0.into_matrix();
    evolve_noisy(&mut m, &circuit.prep, noise.gate_depol_p);
    DensityMatrix::from_approx(&m)
}

fn check_truth_dim(truth: Truth<'_>, d: usize) -> Result<()> {
    let got = match truth {
        Truth::State(rho) => rho.dim(),
        Truth::Process(j) => j.dim(),
        Truth::None => d,
    };
    if got != d {
        return Err(Error::DimensionMismatch { expected: d, got });
    }
    Ok(())
}

/// Clamps round-off negatives and renormalizes.
pub(crate) fn clean_probabilities(mut p: Vec<f64>) -> Result<Vec<f64>> {
    for x in p.iter_mut() {
        if !x.is_finite() || *x < -NEGATIVE_CLAMP {
            return Err(Error::Numerical(format!("invalid outcome probability {x}")));
        }
        *x = x.max(0.0);
    }
    let s: f64 = p.iter().sum();
    if s <= 0.0 {
        return Err(Error::Numerical("outcome probabilities sum to zero".into()));
    }
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

fn probabilities_with_povm(
    circuit: &MeasurementCircuit,
    truth: Truth<'_>,
    noise: &NoiseConfig,
    povm: &PovmSet,
) -> Result<Vec<f64>> {
    let d = circuit.dim;
    check_truth_dim(truth, d)?;
    let mut rho = match truth {
        Truth::State(rho) => rho.matrix().clone(),
        Truth::Process(j) => j.apply_raw(noisy_prep_state(circuit, noise)?.matrix()),
        Truth::None => noisy_prep_state(circuit, noise)?.into_matrix(),
    };
    evolve_noisy(&mut rho, &circuit.meas, noise.gate_depol_p);
    let rho = DensityMatrix::from_approx(&rho)?;
    clean_probabilities(povm.probabilities(&rho))
}

/// Outcome distribution of one circuit.
pub fn circuit_probabilities(circuit: &MeasurementCircuit, truth: Truth<'_>, noise: &NoiseConfig) -> Result<Vec<f64>> {
    noise.validate()?;
    let povm = noise.spam.povm(circuit.dim)?;
    probabilities_with_povm(circuit, truth, noise, &povm)
}

/// Outcome distributions of every circuit of a protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub rows: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    /// Noise-free "counts" `shots_i * p_ik`.
    pub fn expected_counts(&self, shots: &[u64]) -> Result<Vec<Vec<f64>>> {
        if shots.len() != self.rows.len() {
            return Err(Error::DimensionMismatch { expected: self.rows.len(), got: shots.len() });
        }
        Ok(self.rows.iter().zip(shots).map(|(p, &n)| p.iter().map(|x| x * n as f64).collect()).collect())
    }
}

pub fn protocol_probabilities(protocol: &TomographyProtocol, truth: Truth<'_>, noise: &NoiseConfig) -> Result<ProbabilityTable> {
    noise.validate()?;
    let povm = noise.spam.povm(protocol.dim)?;
    let rows = protocol
        .circuits
        .iter()
        .map(|c| probabilities_with_povm(c, truth, noise, &povm))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable { rows })
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(p: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    if p.is_empty() {
        return domain("empty probability vector");
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return domain("probabilities must be finite and nonnegative");
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("probabilities sum to {total}, not 1"));
    }
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == p.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(remaining, q).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
        counts[k] = n;
        remaining -= n;
        mass -= pk;
    }
    Ok(counts)
}

/// Shots per circuit: `total / n` each, the first `total % n` circuits get one more.
pub fn allocate_shots(total_shots: u64, circuits: usize) -> Result<Vec<u64>> {
    if circuits == 0 {
        return domain("no circuits to allocate shots to");
    }
    let n = circuits as u64;
    if total_shots < n {
        return domain(format!("{total_shots} shots cannot cover {circuits} circuits"));
    }
    let (base, rem) = (total_shots / n, total_shots % n);
    Ok((0..n).map(|i| base + u64::from(i < rem)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCounts {
    pub label: String,
    pub shots: u64,
    pub counts: Vec<u64>,
}

/// Sampled outcome counts for every circuit of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsDataset {
    pub protocol_ref: String,
    pub seed: RandomSeed,
    pub circuits: Vec<CircuitCounts>,
}

impl CountsDataset {
    pub fn total_shots(&self) -> u64 {
        self.circuits.iter().map(|c| c.shots).sum()
    }

    /// Counts as floating-point weights, the form taken by the estimators.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.circuits.iter().map(|c| c.counts.iter().map(|&n| n as f64).collect()).collect()
    }

    pub fn shots(&self) -> Vec<u64> {
        self.circuits.iter().map(|c| c.shots).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.circuits {
            let s: u64 = c.counts.iter().sum();
            if s != c.shots {
                return domain(format!("circuit {}: counts sum to {s}, shots = {}", c.label, c.shots));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Self = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }

    /// Rows `circuit_index,outcome,count` with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["circuit_index", "outcome", "count"]).map_err(csv_err)?;
        for (i, c) in self.circuits.iter().enumerate() {
            for (k, n) in c.counts.iter().enumerate() {
                w.serialize((i, k, n)).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn sample_table(labels: Vec<String>, table: &ProbabilityTable, shots: &[u64], protocol_ref: String, seed: RandomSeed) -> Result<CountsDataset> {
    let mut rng = seed.rng();
    let circuits = labels
        .into_iter()
        .zip(&table.rows)
        .zip(shots)
        .map(|((label, p), &n)| Ok(CircuitCounts { label, shots: n, counts: sample_counts(p, n, &mut rng)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountsDataset { protocol_ref, seed, circuits })
}

/// Simulates a whole protocol with equal shot allocation.
pub fn run_protocol(
    protocol: &TomographyProtocol,
    truth: Truth<'_>,
    noise: &NoiseConfig,
    total_shots: u64,
    seed: RandomSeed,
) -> Result<CountsDataset> {
    let shots = allocate_shots(total_shots, protocol.len())?;
    let table = protocol_probabilities(protocol, truth, noise)?;
    let labels = protocol.circuits.iter().map(|c| c.label.clone()).collect();
    let reference = format!("{:?}:d={}:circuits={}", protocol.kind, protocol.dim, protocol.len()).to_lowercase();
    sample_table(labels, &table, &shots, reference, seed)
}

/// Simulates loose circuits (e.g. SPAM calibration) with equal shot allocation.
pub fn run_circuits(
    circuits: &[MeasurementCircuit],
    truth: Truth<'_>,
    noise: &NoiseConfig,
    total_shots: u64,
    seed: RandomSeed,
) -> Result<CountsDataset> {
    let shots = allocate_shots(total_shots, circuits.len())?;
    let povm = noise.spam.povm(circuits[0].dim)?;
    let rows = circuits.iter().map(|c| probabilities_with_povm(c, truth, noise, &povm)).collect::<Result<Vec<_>>>()?;
    let labels = circuits.iter().map(|c| c.label.clone()).collect();
    sample_table(labels, &ProbabilityTable { rows }, &shots, format!("circuits:d={}:n={}", circuits[0].dim, circuits.len()), seed)
}

/// Click probabilities of isolated level reads after initialization:
/// `Tr(rho_0 E_j)`, `j = 0 .. d-1`.
pub fn level_read_probabilities(noise: &NoiseConfig, d: usize) -> Result<Vec<f64>> {
    let params = match &noise.spam.readout {
        ReadoutModel::Ideal => crate::readout::LevelReadoutParams::ideal(),
        ReadoutModel::Cascade(p) => *p,
        ReadoutModel::Matrix { .. } => return domain("level reads need per-level readout parameters"),
    };
    let rho0 = noise.spam.initial_state(d)?;
    (0..d).map(|j| Ok(rho0.expectation(&level_readout_operator(d, j, params)?).clamp(0.0, 1.0))).collect()
}

/// Binary level-read dataset; outcome 0 is "no click", outcome 1 is "click".
pub fn run_level_reads(noise: &NoiseConfig, d: usize, total_shots: u64, seed: RandomSeed) -> Result<CountsDataset> {
    let shots = allocate_shots(total_shots, d)?;
    let rows = level_read_probabilities(noise, d)?.into_iter().map(|q| vec![1.0 - q, q]).collect();
    let labels = (0..d).map(|j| format!("read:{j}")).collect();
    sample_table(labels, &ProbabilityTable { rows }, &shots, format!("level-reads:d={d}"), seed)
}
