//! Deterministic, splittable random streams.
//!
//! Every stochastic component in this crate draws from a [`RandomStream`]: a
//! ChaCha8 generator addressed by a 256-bit key that is kept alongside the
//! cipher state. `split(k)` derives an independent child stream purely from
//! the parent's key and `k`, so splitting never advances the parent. Solvers
//! draw all of their samples on one logical stream before any parallel cost
//! evaluation happens, which keeps results independent of thread scheduling
//! and pool width.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(mut state: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// A seeded stream of random draws. Cheap to split, deterministic everywhere.
#[derive(Clone, Debug)]
pub struct RandomStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

/// Root stream for a run. Identical seeds give bit-identical draw sequences.
pub fn make_rng(seed: u64) -> RandomStream {
    RandomStream::from_key(expand_key(seed))
}

impl RandomStream {
    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream addressed by `k`. Does not consume or disturb the parent:
    /// the child key is a hash of (parent key, k).
    pub fn split(&self, k: u64) -> RandomStream {
        let mut h = GOLDEN;
        for chunk in self.key.chunks_exact(8) {
            let word = u64::from_le_bytes(chunk.try_into().unwrap());
            h = splitmix64(&mut { h ^ word });
        }
        let mut state = h ^ k.wrapping_mul(GOLDEN);
        let _ = splitmix64(&mut state);
        RandomStream::from_key(expand_key(state))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1), 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in the open interval (0, 1); safe to pass through log().
    pub fn open_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Standard Gumbel draw, -ln(-ln(U)) with U in (0, 1).
    pub fn gumbel(&mut self) -> f64 {
        -(-self.open_uniform().ln()).ln()
    }

    /// Uniform index in 0..n. Panics when n == 0.
    pub fn choice(&mut self, n: usize) -> usize {
        assert!(n > 0, "choice over an empty range");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
