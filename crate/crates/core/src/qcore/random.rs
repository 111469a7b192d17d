use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{c, CMatrix, CVector};
use super::state::UnitaryMatrix;
use crate::error::{domain, Result};

/// The generator behind every seeded stream.
pub type SeedRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of a tree of reproducible random streams.
///
/// Child streams are derived from `(seed, label, index)` by hashing, so a
/// stream depends only on its path and never on scheduling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Child seed for `(label, index)`.
    pub fn derive(self, label: &str, index: u64) -> RandomSeed {
        // FNV-1a over the label, then mixed with seed and index.
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        let mixed = splitmix64(self.0 ^ splitmix64(h) ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)));
        RandomSeed(mixed)
    }

    pub fn rng(self) -> SeedRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unit vector in `C^d`.
pub fn haar_random_state(d: usize, seed: RandomSeed) -> Result<CVector> {
    haar_random_state_with(d, &mut seed.rng())
}

pub fn haar_random_state_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CVector> {
    if d < 2 {
        return domain(format!("Haar state needs dimension >= 2, got {d}"));
    }
    loop {
        let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
        let norm = v.norm();
        if norm > 1e-300 {
            return Ok(v / c(norm, 0.0));
        }
    }
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_random_unitary(d: usize, seed: RandomSeed) -> Result<UnitaryMatrix> {
    haar_random_unitary_with(d, &mut seed.rng())
}

pub fn haar_random_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if d < 2 {
        return domain(format!("Haar unitary needs dimension >= 2, got {d}"));
    }
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::new(q)
}
