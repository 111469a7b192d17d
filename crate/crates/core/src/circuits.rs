//! Elementary two-level rotations on qudits.
//!
//! A rotation acts as `exp(-i θ σ / 2)` on an ordered pair of levels `(j, k)`
//! and as the identity elsewhere, with `σ` the Pauli x or y matrix written in
//! the `(|j>, |k>)` basis.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qcore::linalg::{self, c, CMatrix};
use crate::qcore::UnitaryMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Rotation about `axis` by `angle` radians on the level pair `levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelGate {
    pub axis: Axis,
    pub angle: f64,
    pub levels: (usize, usize),
    pub dim: usize,
}

impl TwoLevelGate {
    pub fn new(axis: Axis, angle: f64, levels: (usize, usize), dim: usize) -> Result<Self> {
        let gate = Self { axis, angle, levels, dim };
        gate.validate()?;
        Ok(gate)
    }

    pub fn rx(angle: f64, j: usize, k: usize, dim: usize) -> Result<Self> {
        Self::new(Axis::X, angle, (j, k), dim)
    }

    pub fn ry(angle: f64, j: usize, k: usize, dim: usize) -> Result<Self> {
        Self::new(Axis::Y, angle, (j, k), dim)
    }

    pub fn validate(&self) -> Result<()> {
        let (j, k) = self.levels;
        if j >= k || k >= self.dim {
            return domain(format!("invalid level pair ({j}, {k}) for dimension {}", self.dim));
        }
        if !self.angle.is_finite() {
            return domain("gate angle must be finite");
        }
        Ok(())
    }

    /// The 2x2 block acting on `(|j>, |k>)`.
    pub fn block(&self) -> [[num_complex::Complex64; 2]; 2] {
        match self.axis {
            Axis::X => rx_block(self.angle),
            Axis::Y => ry_block(self.angle),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { angle: -self.angle, ..*self }
    }
}

pub fn rx_block(theta: f64) -> [[num_complex::Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

pub fn ry_block(theta: f64) -> [[num_complex::Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

fn block_matrix(b: [[num_complex::Complex64; 2]; 2]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[b[0][0], b[0][1], b[1][0], b[1][1]])
}

/// Embeds a 2x2 block on levels `(j, k)` of a `d`-dimensional identity.
pub fn embed_block(block: &CMatrix, (j, k): (usize, usize), d: usize) -> CMatrix {
    let mut m = linalg::identity(d);
    m[(j, j)] = block[(0, 0)];
    m[(j, k)] = block[(0, 1)];
    m[(k, j)] = block[(1, 0)];
    m[(k, k)] = block[(1, 1)];
    m
}

/// Full `d x d` unitary of a single gate.
pub fn gate_unitary(g: &TwoLevelGate) -> Result<UnitaryMatrix> {
    g.validate()?;
    Ok(UnitaryMatrix::from_trusted(gate_matrix(g)))
}

pub(crate) fn gate_matrix(g: &TwoLevelGate) -> CMatrix {
    embed_block(&block_matrix(g.block()), g.levels, g.dim)
}

/// `m <- G m` touching only rows `j` and `k`.
pub(crate) fn apply_gate_left(g: &TwoLevelGate, m: &mut CMatrix) {
    let b = g.block();
    let (j, k) = g.levels;
    for col in 0..m.ncols() {
        let x = m[(j, col)];
        let y = m[(k, col)];
        m[(j, col)] = b[0][0] * x + b[0][1] * y;
        m[(k, col)] = b[1][0] * x + b[1][1] * y;
    }
}

/// Gates in time order on a common dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateSequence {
    pub dim: usize,
    pub gates: Vec<TwoLevelGate>,
}

impl GateSequence {
    pub fn new(dim: usize, gates: Vec<TwoLevelGate>) -> Result<Self> {
        for g in &gates {
            g.validate()?;
            if g.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: g.dim });
            }
        }
        Ok(Self { dim, gates })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, gates: Vec::new() }
    }

    pub fn single(g: TwoLevelGate) -> Self {
        Self { dim: g.dim, gates: vec![g] }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn then(mut self, other: &GateSequence) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(self)
    }
}

/// Ordered product `G_n ... G_1` of a sequence; identity when empty.
pub fn sequence_unitary(seq: &GateSequence) -> Result<UnitaryMatrix> {
    let mut m = linalg::identity(seq.dim);
    for g in &seq.gates {
        g.validate()?;
        if g.dim != seq.dim {
            return Err(Error::DimensionMismatch { expected: seq.dim, got: g.dim });
        }
        apply_gate_left(g, &mut m);
    }
    Ok(UnitaryMatrix::from_trusted(m))
}

/// Angles of `R_x(gamma) R_y(beta) R_x(alpha)`; `alpha` acts first in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub fn matrix(&self) -> CMatrix {
        block_matrix(rx_block(self.gamma)) * block_matrix(ry_block(self.beta)) * block_matrix(rx_block(self.alpha))
    }

    /// The non-trivial factors as gates on `levels`, in time order.
    pub fn gates(&self, levels: (usize, usize), dim: usize) -> Result<Vec<TwoLevelGate>> {
        let mut out = Vec::with_capacity(3);
        for (axis, angle) in [(Axis::X, self.alpha), (Axis::Y, self.beta), (Axis::X, self.gamma)] {
            if !is_trivial_angle(angle) {
                out.push(TwoLevelGate::new(axis, angle, levels, dim)?);
            }
        }
        Ok(out)
    }
}

/// True when the rotation is exactly the identity (angle a multiple of 4π).
fn is_trivial_angle(angle: f64) -> bool {
    let r = angle.rem_euclid(4.0 * PI);
    r < 1e-13 || 4.0 * PI - r < 1e-13
}

/// Wraps an angle into `(-2π, 2π]`.
fn wrap_4pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(4.0 * PI);
    if a > 2.0 * PI {
        a -= 4.0 * PI;
    }
    a
}

const EULER_TOL: f64 = 1e-10;

/// Decomposes a 2x2 special unitary as `R_x(gamma) R_y(beta) R_x(alpha)`.
///
/// The result reproduces `u` exactly (not just up to a global sign), with
/// `beta` in `[0, π]`. When `beta` is 0 or π the free angle `gamma` is set to 0.
pub fn euler_decompose(u: &CMatrix) -> Result<EulerAngles> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return domain(format!("Euler decomposition needs a 2x2 matrix, got {}x{}", u.nrows(), u.ncols()));
    }
    let unit_err = crate::qcore::state_unitarity_error(u);
    if !(unit_err <= EULER_TOL) {
        return domain(format!("matrix is not unitary (error {unit_err:e})"));
    }
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    if (det - c(1.0, 0.0)).norm() > EULER_TOL {
        return domain(format!("matrix is not special unitary (det {det})"));
    }
    // R_x(t) = R_y(π/2) R_z(t) R_y(π/2)^dag, so conjugating by R_y(π/2)
    // turns the problem into a z-y-z decomposition.
    let w = block_matrix(ry_block(FRAC_PI_2));
    let v = w.adjoint() * u * &w;
    let (v00, v10) = (v[(0, 0)], v[(1, 0)]);
    let beta = 2.0 * v10.norm().atan2(v00.norm());
    let (mut alpha, gamma) = if v10.norm() < 1e-12 {
        (-2.0 * v00.arg(), 0.0)
    } else if v00.norm() < 1e-12 {
        (-2.0 * v10.arg(), 0.0)
    } else {
        let sum = -2.0 * v00.arg();
        let diff = 2.0 * v10.arg();
        ((sum - diff) / 2.0, (sum + diff) / 2.0)
    };
    let mut angles = EulerAngles { alpha: wrap_4pi(alpha), beta, gamma: wrap_4pi(gamma) };
    if linalg::max_abs_diff(&angles.matrix(), u) > 1e-8 {
        // The half-angle phases only fix the product up to sign.
        alpha += 2.0 * PI;
        angles.alpha = wrap_4pi(alpha);
    }
    if is_trivial_angle(angles.alpha) {
        angles.alpha = 0.0;
    }
    if is_trivial_angle(angles.gamma) {
        angles.gamma = 0.0;
    }
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{haar_random_unitary, RandomSeed};
    use proptest::prelude::*;

    fn su2_from_unitary(u: &CMatrix) -> CMatrix {
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        u * det.sqrt().inv()
    }

    #[test]
    fn ry_half_pi_block() {
        // exp(-i π Y / 4) = cos(π/4) I - i sin(π/4) Y.
        let g = TwoLevelGate::ry(FRAC_PI_2, 0, 1, 2).unwrap();
        let u = gate_unitary(&g).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pauli_y = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let series = linalg::identity(2) * c(h, 0.0) - pauli_y * c(0.0, h);
        assert!(linalg::max_abs_diff(u.matrix(), &series) < 1e-15);
        let expected = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(-h, 0.0), c(h, 0.0), c(h, 0.0)]);
        assert!(linalg::max_abs_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        for axis in [Axis::X, Axis::Y] {
            let g = TwoLevelGate::new(axis, 0.0, (0, 2), 4).unwrap();
            assert_eq!(gate_unitary(&g).unwrap().matrix(), &linalg::identity(4));
        }
    }

    #[test]
    fn rx_pi_transfers_population() {
        let g = TwoLevelGate::rx(PI, 0, 1, 2).unwrap();
        let u = gate_unitary(&g).unwrap();
        assert!((u.matrix()[(0, 0)]).norm() < 1e-15);
        assert!((u.matrix()[(1, 0)] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn malformed_gates_are_rejected() {
        assert!(TwoLevelGate::rx(1.0, 1, 1, 3).is_err());
        assert!(TwoLevelGate::rx(1.0, 2, 1, 3).is_err());
        assert!(TwoLevelGate::rx(1.0, 0, 3, 3).is_err());
        assert!(TwoLevelGate::rx(f64::NAN, 0, 1, 3).is_err());
        let bad = TwoLevelGate { axis: Axis::X, angle: 0.1, levels: (0, 5), dim: 3 };
        assert!(gate_unitary(&bad).is_err());
    }

    #[test]
    fn sequences() {
        assert_eq!(sequence_unitary(&GateSequence::empty(3)).unwrap().matrix(), &linalg::identity(3));
        let half = TwoLevelGate::rx(FRAC_PI_2, 0, 2, 3).unwrap();
        let two = GateSequence::new(3, vec![half, half]).unwrap();
        let full = gate_unitary(&TwoLevelGate::rx(PI, 0, 2, 3).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(sequence_unitary(&two).unwrap().matrix(), full.matrix()) < 1e-12);
        let g = TwoLevelGate::ry(0.37, 1, 2, 3).unwrap();
        let back = GateSequence::new(3, vec![g, g.inverse()]).unwrap();
        assert!(linalg::max_abs_diff(sequence_unitary(&back).unwrap().matrix(), &linalg::identity(3)) < 1e-12);
        let other_dim = TwoLevelGate::ry(0.37, 0, 1, 2).unwrap();
        assert!(GateSequence::new(3, vec![other_dim]).is_err());
    }

    #[test]
    fn sequence_order_is_time_order() {
        let a = TwoLevelGate::rx(0.3, 0, 1, 3).unwrap();
        let b = TwoLevelGate::ry(1.1, 1, 2, 3).unwrap();
        let seq = GateSequence::new(3, vec![a, b]).unwrap();
        let expected = gate_matrix(&b) * gate_matrix(&a);
        assert!(linalg::max_abs_diff(sequence_unitary(&seq).unwrap().matrix(), &expected) < 1e-15);
    }

    #[test]
    fn disjoint_gates_commute() {
        let a = gate_matrix(&TwoLevelGate::rx(0.7, 0, 1, 4).unwrap());
        let b = gate_matrix(&TwoLevelGate::ry(1.9, 2, 3, 4).unwrap());
        assert!(linalg::max_abs_diff(&(&a * &b), &(&b * &a)) < 1e-12);
    }

    #[test]
    fn euler_examples() {
        let id = euler_decompose(&linalg::identity(2)).unwrap();
        assert_eq!(id, EulerAngles { alpha: 0.0, beta: 0.0, gamma: 0.0 });
        let ry = euler_decompose(&block_matrix(ry_block(FRAC_PI_2))).unwrap();
        assert!(ry.alpha.abs() < 1e-12 && (ry.beta - FRAC_PI_2).abs() < 1e-12 && ry.gamma.abs() < 1e-12, "{ry:?}");
        // -I is R_x(2π): not removable.
        let minus = euler_decompose(&(linalg::identity(2) * c(-1.0, 0.0))).unwrap();
        assert!(linalg::max_abs_diff(&minus.matrix(), &(linalg::identity(2) * c(-1.0, 0.0))) < 1e-12);
    }

    #[test]
    fn euler_rejects_non_special_unitary() {
        let not_unitary = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(euler_decompose(&not_unitary).is_err());
        let phase = linalg::identity(2) * c(0.0, 1.0);
        assert!(euler_decompose(&phase).is_err());
        assert!(euler_decompose(&linalg::identity(3)).is_err());
    }

    #[test]
    fn euler_haar_roundtrip() {
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let u = su2_from_unitary(haar_random_unitary(2, RandomSeed::new(seed)).unwrap().matrix());
            let e = euler_decompose(&u).unwrap();
            assert!((0.0..=PI).contains(&e.beta));
            worst = worst.max(linalg::max_abs_diff(&e.matrix(), &u));
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn euler_degenerate_beta_pi() {
        // R_y(π) R_x(0.4): beta = π, gamma canonicalised to 0.
        let u = block_matrix(ry_block(PI)) * block_matrix(rx_block(0.4));
        let e = euler_decompose(&u).unwrap();
        assert!((e.beta - PI).abs() < 1e-12);
        assert_eq!(e.gamma, 0.0);
        assert!(linalg::max_abs_diff(&e.matrix(), &u) < 1e-10);
    }

    proptest! {
        #[test]
        fn euler_recomposes(a in -7.0f64..7.0, b in 0.0f64..PI, g in -7.0f64..7.0) {
            let u = EulerAngles { alpha: a, beta: b, gamma: g }.matrix();
            let e = euler_decompose(&u).unwrap();
            prop_assert!(linalg::max_abs_diff(&e.matrix(), &u) < 1e-10);
        }
    }
}
