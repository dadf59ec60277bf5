//! Counter-based stream derivation.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream whose key
//! is a hash of `(master seed, purpose, a, b)` and whose stream id is the row
//! block. Results are therefore independent of evaluation order and of the
//! number of worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of scenario rows drawn from a single block stream.
pub const BLOCK_ROWS: usize = 1 << 14;

/// What a stream is used for. Part of the key so purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Leaf = 1,
    Copula = 2,
    Joint = 3,
    User = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies an independent family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    seed: u64,
    purpose: Purpose,
    a: u64,
    b: u64,
}

impl Stream {
    pub fn new(seed: u64, purpose: Purpose, a: u64, b: u64) -> Self {
        Stream { seed, purpose, a, b }
    }

    /// A stream for ad-hoc use (tests, the C interface) keyed by seed only.
    pub fn from_seed(seed: u64) -> Self {
        Stream::new(seed, Purpose::User, 0, 0)
    }

    /// Generator for row block `block` of this stream.
    pub fn block_rng(&self, block: u64) -> ChaCha8Rng {
        let mut h = self.seed;
        for word in [self.purpose as u64, self.a, self.b] {
            h ^= splitmix64(&mut h) ^ word;
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut h).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(block);
        rng
    }
}
