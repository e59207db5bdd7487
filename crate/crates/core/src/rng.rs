//! Deterministic random substreams.
//!
//! Every consumer of randomness (per-particle noise, batch shuffles, initial
//! states) draws from its own ChaCha8 stream. The key is derived from the
//! master seed and a domain tag; the ChaCha stream id is the index within the
//! domain. A particle's noise is therefore a pure function of
//! `(seed, particle)` and the number of steps taken, no matter how batches are
//! drawn or how many threads run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which consumer a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Noise,
    Batch,
    InitialPosition,
    InitialVelocity,
    /// Free-form streams for tests and validation tools.
    Aux(u32),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Noise => 0x6e6f_6973_6500_0001,
            Domain::Batch => 0x6261_7463_6800_0002,
            Domain::InitialPosition => 0x696e_6974_7800_0003,
            Domain::InitialVelocity => 0x696e_6974_7600_0004,
            Domain::Aux(k) => 0x6175_7800_0000_0000 | u64::from(k),
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. the seed of replicate `k` of an experiment.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    mix64(mix64(seed) ^ k.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Open substream `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed ^ domain.tag();
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// One stream per index `0..n`.
pub fn substreams(seed: u64, domain: Domain, n: usize) -> Vec<ChaCha8Rng> {
    (0..n as u64).map(|i| substream(seed, domain, i)).collect()
}
