//! Labeled, seeded random streams.
//!
//! Every draw in a round comes from a stream keyed by `(seed, label, index)`,
//! so any single source of randomness can be replayed or replaced in isolation.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::field::Fq;

fn fnv1a(label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, label: &str, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(label).to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(&(label.len() as u64).to_le_bytes());
        Stream {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, n)` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn elem(&mut self, field: &Fq) -> u64 {
        self.below(field.q())
    }

    pub fn elems(&mut self, field: &Fq, len: usize) -> Vec<u64> {
        (0..len).map(|_| self.elem(field)).collect()
    }

    /// Sorted uniform `k`-subset of `0..n`.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut out = pool[..k.min(n)].to_vec();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_separate() {
        let f = Fq::new(257).unwrap();
        let a = Stream::new(7, "messages", 0).elems(&f, 16);
        assert_eq!(a, Stream::new(7, "messages", 0).elems(&f, 16));
        assert_ne!(a, Stream::new(7, "queries", 0).elems(&f, 16));
        assert_ne!(a, Stream::new(7, "messages", 1).elems(&f, 16));
        assert_ne!(a, Stream::new(8, "messages", 0).elems(&f, 16));
    }

    #[test]
    fn subsets() {
        let mut s = Stream::new(1, "sets", 0);
        for _ in 0..100 {
            let x = s.subset(9, 4);
            assert_eq!(x.len(), 4);
            assert!(x.windows(2).all(|w| w[0] < w[1]) && x[3] < 9);
        }
        assert_eq!(s.subset(3, 5), alloc::vec![0, 1, 2]);
    }

    #[test]
    fn below_covers_range() {
        let mut s = Stream::new(3, "range", 0);
        let mut seen = [0u32; 7];
        for _ in 0..7000 {
            seen[s.below(7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
