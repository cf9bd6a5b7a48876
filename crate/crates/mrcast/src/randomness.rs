//! The shared-randomness contract between encoder and decoders.
//!
//! Both sides reconstruct identical proposal sequences from a
//! [`StreamSeed`], so only selected indices ever cross the wire. The
//! generator is SplitMix64: portable, constant time per draw, and with
//! published test vectors, which makes cross-implementation agreement
//! checkable bit for bit. Streams are labelled by purpose (`"block"`,
//! `"refine/3"`, `"trial/17"`) so that changing one stage's sample count
//! never shifts another stage's draws.

use crate::dist::{JointPmf, Pmf};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output mixing function.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash, used to fold stream labels into the seed.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A (seed, label) pair that fully determines a random stream. Distinct
/// labels under one seed behave as independent streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSeed {
    pub seed: u64,
    pub label: String,
}

impl StreamSeed {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        StreamSeed {
            seed,
            label: label.into(),
        }
    }

    /// A sub-stream named `<label>/<suffix>`.
    pub fn child(&self, suffix: &str) -> StreamSeed {
        let label = if self.label.is_empty() {
            suffix.to_string()
        } else {
            format!("{}/{}", self.label, suffix)
        };
        StreamSeed {
            seed: self.seed,
            label,
        }
    }
}

/// Deterministic counter-based stream. Advancing is the only mutation; two
/// streams derived from equal seeds produce identical outputs forever.
#[derive(Debug, Clone)]
pub struct SharedStream {
    state: u64,
    position: u64,
}

impl SharedStream {
    pub fn derive(seed: &StreamSeed) -> Self {
        SharedStream {
            state: mix(seed.seed ^ fnv1a64(seed.label.as_bytes())),
            position: 0,
        }
    }

    /// Stream starting from a raw state, bypassing label derivation.
    pub fn from_raw_state(state: u64) -> Self {
        SharedStream { state, position: 0 }
    }

    /// Number of draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        self.position += 1;
        mix(self.state)
    }

    /// A uniform draw in `[0, 1)` with 53-bit resolution.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Inverse-CDF draw from `p`, consuming exactly one stream draw.
    pub fn sample_categorical(&mut self, p: &Pmf) -> usize {
        categorical_from_unit(p.mass(), self.next_unit())
    }

    /// Inverse-CDF draw over the pair alphabet in row-major order.
    pub fn sample_pair(&mut self, j: &JointPmf) -> (usize, usize) {
        let idx = categorical_from_unit(j.flat(), self.next_unit());
        (idx / j.cols(), idx % j.cols())
    }

    /// `count` pairs from the joint. Decoder `i` reconstructs exactly the
    /// coordinate-`i` projection of this sequence by running the same walk.
    pub fn sample_joint_sequence(&mut self, j: &JointPmf, count: usize) -> Vec<(usize, usize)> {
        (0..count).map(|_| self.sample_pair(j)).collect()
    }
}

/// The first index (in mass order) whose cumulative mass strictly exceeds
/// `u`; the last index is the fallback. Cumulative sums accumulate left to
/// right so every implementation of this walk agrees bit for bit.
pub fn categorical_from_unit(mass: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &m) in mass.iter().enumerate() {
        acc += m;
        if acc > u {
            return i;
        }
    }
    mass.len() - 1
}
