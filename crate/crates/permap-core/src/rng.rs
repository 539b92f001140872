//! Deterministic named RNG streams.
//!
//! One master seed spawns independent substreams identified by a label and an
//! index. Ablation methods that share a master seed therefore see identical
//! worlds, candidate sets, and sensor noise sequences, which is what makes
//! paired method comparisons meaningful.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream labels used by the mission loop.
pub const STREAM_WORLD: &str = "world";
pub const STREAM_CANDIDATES: &str = "candidates";
pub const STREAM_SENSOR: &str = "sensor";

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the 32-byte seed for substream `(label, index)` of `master`.
///
/// The derivation folds the label bytes and the index into a SplitMix64
/// state, so distinct labels or indices give unrelated streams and the
/// mapping is stable across platforms.
fn derive_seed(master: u64, label: &str, index: u64) -> [u8; 32] {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    for &b in label.as_bytes() {
        state = splitmix64(&mut state) ^ u64::from(b);
    }
    state = splitmix64(&mut state) ^ index;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

/// Seeded ChaCha stream for `(master, label, index)`.
///
/// Use index 0 for singleton streams (world generation, candidates) and the
/// entity id for per-entity streams (one sensor stream per target).
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_seed(master, label, index))
}
