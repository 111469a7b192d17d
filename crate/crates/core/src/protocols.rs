//! Measurement protocols for qudit state and process tomography.
//!
//! The two-level protocols use at most one elementary rotation per
//! measurement basis: the computational basis, then `R_y(π/2)` on every level
//! pair, then `R_x(3π/2)` on every level pair. Level pairs are enumerated
//! lexicographically `(0,1), (0,2), ..., (d-2, d-1)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::circuits::{self, euler_decompose, Axis, GateSequence, TwoLevelGate};
use crate::error::{domain, Error, Result};
use crate::qcore::linalg::{self, c, CMatrix};
use crate::qcore::UnitaryMatrix;
use crate::readout::SpamModel;

const THREE_HALVES_PI: f64 = 3.0 * FRAC_PI_2;

/// Preparation gates, then (in the process case) the process under study,
/// then basis-change gates and readout.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCircuit {
    pub dim: usize,
    pub prep: GateSequence,
    pub meas: GateSequence,
    pub label: String,
}

impl MeasurementCircuit {
    pub fn new(label: impl Into<String>, prep: GateSequence, meas: GateSequence) -> Result<Self> {
        if prep.dim != meas.dim {
            return Err(Error::DimensionMismatch { expected: prep.dim, got: meas.dim });
        }
        Ok(Self { dim: prep.dim, prep, meas, label: label.into() })
    }

    pub fn gate_count(&self) -> usize {
        self.prep.len() + self.meas.len()
    }

    /// Ideal preparation unitary.
    pub fn prep_unitary(&self) -> Result<UnitaryMatrix> {
        circuits::sequence_unitary(&self.prep)
    }

    /// Ideal basis-change unitary applied before readout.
    pub fn meas_unitary(&self) -> Result<UnitaryMatrix> {
        circuits::sequence_unitary(&self.meas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Qst,
    Qpt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyProtocol {
    pub kind: ProtocolKind,
    pub dim: usize,
    pub circuits: Vec<MeasurementCircuit>,
}

impl TomographyProtocol {
    pub fn new(kind: ProtocolKind, dim: usize, circuits: Vec<MeasurementCircuit>) -> Result<Self> {
        if circuits.is_empty() {
            return domain("protocol has no circuits");
        }
        if let Some(bad) = circuits.iter().find(|c| c.dim != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim });
        }
        Ok(Self { kind, dim, circuits })
    }

    pub fn len(&self) -> usize {
        self.circuits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuits.is_empty()
    }

    pub fn max_gates_per_circuit(&self) -> usize {
        self.circuits.iter().map(MeasurementCircuit::gate_count).max().unwrap_or(0)
    }

    /// Distinct preparation sequences in order of first appearance.
    pub fn preparations(&self) -> Vec<&GateSequence> {
        let mut out: Vec<&GateSequence> = Vec::new();
        for circ in &self.circuits {
            if !out.contains(&&circ.prep) {
                out.push(&circ.prep);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProtocolDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProtocolDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return domain(format!("dimension must be at least 2, got {d}"));
    }
    Ok(())
}

fn level_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |j| ((j + 1)..d).map(move |k| (j, k)))
}

fn gate_label(g: &TwoLevelGate) -> String {
    let axis = match g.axis {
        Axis::X => "rx",
        Axis::Y => "ry",
    };
    format!("{axis}({:.4})[{},{}]", g.angle, g.levels.0, g.levels.1)
}

fn sequence_label(seq: &GateSequence) -> String {
    if seq.is_empty() {
        "id".to_string()
    } else {
        seq.gates.iter().map(gate_label).collect::<Vec<_>>().join("*")
    }
}

/// Basis-change sequences of the two-level state tomography protocol.
fn two_level_meas_sequences(d: usize) -> Result<Vec<GateSequence>> {
    let mut out = vec![GateSequence::empty(d)];
    for (j, k) in level_pairs(d) {
        out.push(GateSequence::single(TwoLevelGate::ry(FRAC_PI_2, j, k, d)?));
    }
    for (j, k) in level_pairs(d) {
        out.push(GateSequence::single(TwoLevelGate::rx(THREE_HALVES_PI, j, k, d)?));
    }
    Ok(out)
}

/// Two-level state tomography: `1 + d(d-1)` circuits, each with at most one gate.
pub fn qst_two_level(d: usize) -> Result<TomographyProtocol> {
    check_dim(d)?;
    let circuits = two_level_meas_sequences(d)?
        .into_iter()
        .map(|meas| MeasurementCircuit::new(format!("meas:{}", sequence_label(&meas)), GateSequence::empty(d), meas))
        .collect::<Result<Vec<_>>>()?;
    TomographyProtocol::new(ProtocolKind::Qst, d, circuits)
}

/// The `d^2` input-state preparations of two-level process tomography.
///
/// For each base level `m`, the prefix `R_x(π)` on `(0, m)` (absent for
/// `m = 0`) moves `|0>` to `|m>`; then the bare state is followed by
/// `R_y(π/2)` and `R_x(3π/2)` on `(m, j)` for every `j > m`.
pub fn qpt_preparations(d: usize) -> Result<Vec<GateSequence>> {
    check_dim(d)?;
    let mut preps = Vec::with_capacity(d * d);
    for m in 0..d {
        let prefix = if m == 0 { GateSequence::empty(d) } else { GateSequence::single(TwoLevelGate::rx(PI, 0, m, d)?) };
        preps.push(prefix.clone());
        for j in (m + 1)..d {
            for g in [TwoLevelGate::ry(FRAC_PI_2, m, j, d)?, TwoLevelGate::rx(THREE_HALVES_PI, m, j, d)?] {
                let mut seq = prefix.clone();
                seq.gates.push(g);
                preps.push(seq);
            }
        }
    }
    Ok(preps)
}

/// Two-level process tomography: every preparation crossed with every
/// two-level measurement basis, `d^2 (1 + d(d-1))` circuits.
pub fn qpt_two_level(d: usize) -> Result<TomographyProtocol> {
    let preps = qpt_preparations(d)?;
    let meas = two_level_meas_sequences(d)?;
    let mut circuits = Vec::with_capacity(preps.len() * meas.len());
    for p in &preps {
        for m in &meas {
            let label = format!("prep:{}|meas:{}", sequence_label(p), sequence_label(m));
            circuits.push(MeasurementCircuit::new(label, p.clone(), m.clone())?);
        }
    }
    TomographyProtocol::new(ProtocolKind::Qpt, d, circuits)
}

pub(crate) fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// Mutually unbiased bases for prime `d` (Wootters-Fields): the computational
/// basis followed by `|v_{r,s}> = d^{-1/2} sum_j ω^{r j^2 + s j} |j>`,
/// `r = 0..d-1`. Each basis is returned with its vectors as columns.
pub fn mub_bases(d: usize) -> Result<Vec<CMatrix>> {
    if !is_prime(d) {
        return Err(Error::UnsupportedDimension(d, "MUB construction requires a prime dimension"));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let mut bases = vec![linalg::identity(d)];
    for r in 0..d {
        let basis = CMatrix::from_fn(d, d, |j, s| {
            // For d = 2 the quadratic phase uses i^{r j^2} to reach the Y basis.
            let phase = if d == 2 {
                PI * ((r * j * j) as f64 / 2.0 + (s * j) as f64)
            } else {
                2.0 * PI * ((r * j * j + s * j) % d) as f64 / d as f64
            };
            c(phase.cos(), phase.sin()) * norm
        });
        bases.push(basis);
    }
    Ok(bases)
}

/// MUB state tomography for prime `d`: `d + 1` circuits whose basis changes are
/// compiled into elementary two-level gates.
pub fn mub_protocol(d: usize) -> Result<TomographyProtocol> {
    let bases = mub_bases(d)?;
    let mut circuits = Vec::with_capacity(bases.len());
    for (idx, basis) in bases.iter().enumerate() {
        // Outcome k should project on column k, so the basis change is B^dag.
        let change = UnitaryMatrix::with_tolerance(basis.adjoint(), 1e-10)?;
        let meas = mub_gate_compile(&change)?;
        circuits.push(MeasurementCircuit::new(format!("mub:{idx}"), GateSequence::empty(d), meas)?);
    }
    TomographyProtocol::new(ProtocolKind::Qst, d, circuits)
}

/// Compiles a unitary into two-level rotations by Givens elimination.
///
/// Returns gates `G_1 .. G_n` (time order) with `V = D G_n ... G_1` for some
/// diagonal unitary `D`. `D` does not change outcome probabilities of
/// a diagonal POVM and is dropped. Each two-level factor is special unitary
/// and is written as up to three rotations `R_x(γ) R_y(β) R_x(α)`.
pub fn mub_gate_compile(v: &UnitaryMatrix) -> Result<GateSequence> {
    let d = v.dim();
    check_dim(d)?;
    if crate::qcore::state_unitarity_error(v.matrix()) > 1e-10 {
        return domain("basis change is not unitary");
    }
    // Reduce M = V^dag to diagonal form with G_n ... G_1 M = D'.
    let mut m = v.matrix().adjoint();
    let mut gates = Vec::new();
    for col in 0..d {
        for row in (col + 1)..d {
            let a = m[(col, col)];
            let b = m[(row, col)];
            if b.norm() < 1e-14 {
                continue;
            }
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let block = CMatrix::from_row_slice(2, 2, &[a.conj() / n, b.conj() / n, -b / n, a / n]);
            let angles = euler_decompose(&block)?;
            for g in angles.gates((col, row), d)? {
                circuits::apply_gate_left(&g, &mut m);
                gates.push(g);
            }
        }
    }
    GateSequence::new(d, gates)
}

/// The `d` SPAM calibration circuits: bare initialization and readout, then
/// `R_x(π)` on `(0, j)` for `j = 1..d-1`.
pub fn spam_calibration_circuits(d: usize) -> Result<Vec<MeasurementCircuit>> {
    check_dim(d)?;
    let mut out = vec![MeasurementCircuit::new("calib:id", GateSequence::empty(d), GateSequence::empty(d))?];
    for j in 1..d {
        let prep = GateSequence::single(TwoLevelGate::rx(PI, 0, j, d)?);
        out.push(MeasurementCircuit::new(format!("calib:rx(pi)[0,{j}]"), prep, GateSequence::empty(d))?);
    }
    Ok(out)
}

/// Rank of the span of effective measurement operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Completeness {
    pub rank: usize,
    pub required: usize,
    pub complete: bool,
}

/// Singular values at or above this fraction of the largest count toward rank.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Informational completeness of a protocol under the given SPAM model.
///
/// State tomography rows are `U^dag Π_k U`; process tomography rows are
/// `rho_i^T ⊗ P_ik`, both flattened to real coordinates.
pub fn completeness_check(protocol: &TomographyProtocol, spam: &SpamModel) -> Result<Completeness> {
    let d = protocol.dim;
    let povm = spam.povm(d)?;
    let rho0 = spam.initial_state(d)?;
    let mut rows = Vec::new();
    for circ in &protocol.circuits {
        let u = circ.meas_unitary()?;
        let effects: Vec<CMatrix> =
            povm.operators().iter().map(|op| u.matrix().adjoint() * op * u.matrix()).collect();
        match protocol.kind {
            ProtocolKind::Qst => rows.extend(effects.iter().map(linalg::hermitian_to_real_vec)),
            ProtocolKind::Qpt => {
                let rho = rho0.conjugate(&circ.prep_unitary()?)?;
                let rho_t = rho.matrix().transpose();
                rows.extend(effects.iter().map(|e| linalg::hermitian_to_real_vec(&linalg::kron(&rho_t, e))));
            }
        }
    }
    let required = match protocol.kind {
        ProtocolKind::Qst => d * d,
        ProtocolKind::Qpt => d * d * d * d,
    };
    let rank = linalg::numerical_rank(&rows, RANK_REL_TOL);
    Ok(Completeness { rank, required, complete: rank == required })
}

/// Whether the measurement bases of distinct circuits are pairwise mutually
/// unbiased, `|<e|f>|^2 = 1/d` within `tol`.
pub fn bases_mutually_unbiased(protocol: &TomographyProtocol, tol: f64) -> Result<bool> {
    let d = protocol.dim;
    let unitaries = protocol.circuits.iter().map(|c| c.meas_unitary()).collect::<Result<Vec<_>>>()?;
    for (i, ui) in unitaries.iter().enumerate() {
        for uj in &unitaries[i + 1..] {
            // Basis vectors are U^dag |k>, so overlaps are entries of U_i U_j^dag.
            let overlap = ui.matrix() * uj.matrix().adjoint();
            if overlap.iter().any(|z| (z.norm_sqr() - 1.0 / d as f64).abs() > tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GateDoc {
    axis: Axis,
    angle: f64,
    levels: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CircuitDoc {
    label: String,
    prep: Vec<GateDoc>,
    meas: Vec<GateDoc>,
}

/// Interchange form `{kind, dim, circuits: [{label, prep, meas}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProtocolDoc {
    kind: ProtocolKind,
    dim: usize,
    circuits: Vec<CircuitDoc>,
}

fn gates_to_doc(seq: &GateSequence) -> Vec<GateDoc> {
    seq.gates.iter().map(|g| GateDoc { axis: g.axis, angle: g.angle, levels: [g.levels.0, g.levels.1] }).collect()
}

fn gates_from_doc(dim: usize, docs: &[GateDoc]) -> Result<GateSequence> {
    let gates = docs
        .iter()
        .map(|g| TwoLevelGate::new(g.axis, g.angle, (g.levels[0], g.levels[1]), dim))
        .collect::<Result<Vec<_>>>()?;
    GateSequence::new(dim, gates)
}

impl From<&TomographyProtocol> for ProtocolDoc {
    fn from(p: &TomographyProtocol) -> Self {
        ProtocolDoc {
            kind: p.kind,
            dim: p.dim,
            circuits: p
                .circuits
                .iter()
                .map(|c| CircuitDoc { label: c.label.clone(), prep: gates_to_doc(&c.prep), meas: gates_to_doc(&c.meas) })
                .collect(),
        }
    }
}

impl TryFrom<ProtocolDoc> for TomographyProtocol {
    type Error = Error;
    fn try_from(doc: ProtocolDoc) -> Result<Self> {
        check_dim(doc.dim)?;
        let circuits = doc
            .circuits
            .iter()
            .map(|c| MeasurementCircuit::new(c.label.clone(), gates_from_doc(doc.dim, &c.prep)?, gates_from_doc(doc.dim, &c.meas)?))
            .collect::<Result<Vec<_>>>()?;
        TomographyProtocol::new(doc.kind, doc.dim, circuits)
    }
}
