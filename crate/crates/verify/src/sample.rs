//! Seeded input generation: uniform bits plus the corner patterns
//! all-zero, all-one, single-bit and alternating.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x10de;

pub struct Sampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&mut self, n: usize) -> Vec<bool> {
        (0..n).map(|_| self.rng.gen()).collect()
    }

    /// Uniform value below `2^bits`.
    pub fn value(&mut self, bits: usize) -> BigInt {
        from_bits(&self.bits(bits))
    }

    /// `count` values below `2^bits`: the corners first, then uniform.
    pub fn values(&mut self, bits: usize, count: usize) -> Vec<BigInt> {
        let mut out: Vec<BigInt> = corners(bits).iter().map(|c| from_bits(c)).collect();
        out.dedup();
        out.truncate(count);
        while out.len() < count {
            let v = self.value(bits);
            out.push(v);
        }
        out
    }

    /// `count` bit vectors of length `n`: the corners first, then uniform.
    pub fn vectors(&mut self, n: usize, count: usize) -> Vec<Vec<bool>> {
        let mut out = corners(n);
        out.truncate(count);
        while out.len() < count {
            let v = self.bits(n);
            out.push(v);
        }
        out
    }
}

/// All-zero, all-one, both alternating phases and every single-bit vector.
pub fn corners(n: usize) -> Vec<Vec<bool>> {
    let mut out = vec![vec![false; n], vec![true; n]];
    out.push((0..n).map(|i| i % 2 == 0).collect());
    out.push((0..n).map(|i| i % 2 == 1).collect());
    for i in 0..n {
        let mut v = vec![false; n];
        v[i] = true;
        out.push(v);
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|v| seen.insert(v.clone()));
    out
}

/// Reads bits least significant first.
pub fn from_bits(bits: &[bool]) -> BigInt {
    bits.iter().rev().fold(BigInt::zero(), |acc, b| if *b { 2 * acc + BigInt::one() } else { 2 * acc })
}

/// Every vector of `n` bits, in counting order.
pub fn all_vectors(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1 << n).map(move |v| (0..n).map(|i| (v >> i) & 1 == 1).collect())
}
