//! Deterministic, splittable random number streams.
//!
//! Every stochastic quantity in this crate is drawn from an explicitly named
//! [`RngStream`]. A stream is a counter-based splitmix-style generator: the
//! i-th output is `mix64(id + i * GOLDEN)`, where `id` is the stream identity
//! and `mix64` is the splitmix64 finalizer. Draws advance only the counter;
//! the identity never changes, so a stream can be re-created from
//! `(root seed, label path)` at any time.
//!
//! Sub-streams are derived, not split off positionally: [`RngStream::derive`]
//! hashes a string label (FNV-1a) into the parent identity and
//! [`RngStream::derive_index`] mixes in an integer. Derivation is a pure
//! function of the parent identity, so the order in which experiment phases
//! run — or whether they run at all — cannot shift any other stream's
//! sequence. The label constants used by the rest of the crate are collected
//! below ([`STREAM_WEIGHTS`] and friends) and are part of the reproducibility
//! contract, as is the output function itself: changing either invalidates
//! recorded seeds.
//!
//! Distribution transforms are frozen too:
//! * `uniform` maps the top 53 bits of one output to `[0, 1)`;
//! * `normal` is the Box-Muller cosine branch, consuming exactly two uniforms
//!   per call;
//! * `bernoulli` compares one uniform against the probability.

use crate::error::{Error, Result};

/// Weyl increment of the splitmix64 sequence (golden-ratio constant).
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Salt mixed into integer-indexed derivations so `derive_index(k)` differs
/// from hashing the decimal string of `k`.
const INDEX_SALT: u64 = 0xA076_1D64_78BD_642F;

/// Stream of reservoir coupling magnitudes.
pub const STREAM_WEIGHTS: &str = "weights";
/// Stream of coupling sign draws (balance parameter enters only here).
pub const STREAM_SIGNS: &str = "signs";
/// Stream of connectivity mask draws.
pub const STREAM_MASK: &str = "mask";
/// Stream of neuron bias draws.
pub const STREAM_BIASES: &str = "biases";
/// Stream of initial-state draws.
pub const STREAM_INIT: &str = "init";
/// Parent stream of everything task-related for one ensemble member.
pub const STREAM_TASK: &str = "task";
/// Stream that fixes a task's sampled structure (patch layout, prototypes).
pub const STREAM_TASK_STRUCTURE: &str = "task-structure";
/// Stream of training-set episode draws.
pub const STREAM_TASK_TRAIN: &str = "task-train";
/// Stream of test-set episode draws.
pub const STREAM_TASK_TEST: &str = "task-test";
/// Stream of episode draws inside one dataset generation call.
pub const STREAM_EPISODES: &str = "episodes";
/// Parent stream of the per-member reservoir streams in ensemble runs.
pub const STREAM_ENSEMBLE: &str = "ensemble";

/// Splitmix64 finalizer: bijective avalanche mix of a 64-bit word.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a byte string, used to fold labels into stream identities.
#[inline]
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A named, counter-based random stream.
///
/// Cheap to copy; copies share no state, so handing a copy to a function
/// and drawing from the original produces overlapping sequences. Derive a
/// fresh sub-stream instead whenever two consumers must be independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    /// Root seed this stream descends from (provenance only).
    seed: u64,
    /// Stream identity; determines the output sequence.
    id: u64,
    /// Number of 64-bit outputs drawn so far.
    pos: u64,
}

impl RngStream {
    /// Root stream for a run. All other streams derive from this one.
    pub fn new(seed: u64) -> Self {
        RngStream { seed, id: mix64(seed ^ GOLDEN), pos: 0 }
    }

    /// Reconstructs a stream from a recorded `(root seed, stream id)` pair,
    /// positioned at its first draw.
    pub fn from_parts(seed: u64, id: u64) -> Self {
        RngStream { seed, id, pos: 0 }
    }

    /// Derives the sub-stream named `label`. Pure: depends only on the parent
    /// identity and the label, never on how many draws the parent has made.
    pub fn derive(&self, label: &str) -> Self {
        RngStream { seed: self.seed, id: mix64(self.id ^ fnv1a64(label.as_bytes())), pos: 0 }
    }

    /// Derives the `index`-th sub-stream of an indexed family (ensemble
    /// members, grid rows). Pure in the same sense as [`derive`](Self::derive).
    pub fn derive_index(&self, index: u64) -> Self {
        RngStream { seed: self.seed, id: mix64(self.id ^ mix64(index ^ INDEX_SALT)), pos: 0 }
    }

    /// Root seed recorded at construction.
    pub fn root_seed(&self) -> u64 {
        self.seed
    }

    /// Stream identity; recording this alongside the root seed is enough to
    /// replay the stream.
    pub fn stream_id(&self) -> u64 {
        self.id
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.pos = self.pos.wrapping_add(1);
        mix64(self.id.wrapping_add(self.pos.wrapping_mul(GOLDEN)))
    }

    /// Next double in `[0, 1)`, from the top 53 bits of one output.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!(
                "uniform bounds must be finite with lo < hi, got [{lo}, {hi})"
            )));
        }
        let v = lo + (hi - lo) * self.next_f64();
        // Guard against round-up onto the open bound for extreme ranges.
        Ok(if v < hi { v } else { hi.next_down() })
    }

    /// Gaussian draw via the Box-Muller cosine branch (exactly two uniforms
    /// per call; the sine mate is discarded, never cached).
    pub fn normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if !(mean.is_finite() && sd.is_finite()) || sd < 0.0 {
            return Err(Error::invalid(format!(
                "normal requires finite mean and sd >= 0, got ({mean}, {sd})"
            )));
        }
        let u1 = 1.0 - self.next_f64(); // (0, 1]: keeps ln finite
        let u2 = self.next_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok(mean + sd * z)
    }

    /// Uniform index in `0..bound` (Lemire multiply-shift; the residual bias
    /// of `bound / 2^64` is far below anything observable).
    pub fn next_index(&mut self, bound: usize) -> Result<usize> {
        if bound == 0 {
            return Err(Error::invalid("next_index requires a positive bound"));
        }
        Ok(((self.next_u64() as u128 * bound as u128) >> 64) as usize)
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) -> Result<()> {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1)?;
            items.swap(i, j);
        }
        Ok(())
    }

    /// Bernoulli draw: `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("bernoulli probability must lie in [0,1], got {p}")));
        }
        Ok(self.next_f64() < p)
    }
}
