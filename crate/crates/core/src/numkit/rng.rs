use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream.
///
/// Streams for different consumers are derived with [`SeededRng::split`],
/// which keys a fresh ChaCha stream on the parent seed and the consumer name,
/// so adding draws in one consumer never shifts another consumer's values.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for the named consumer.
    pub fn split(&self, name: &str) -> SeededRng {
        let child = splitmix64(self.seed ^ fnv1a(name.as_bytes()));
        let mut inner = ChaCha8Rng::seed_from_u64(child);
        inner.set_stream(fnv1a(name.as_bytes()));
        SeededRng { seed: child, inner }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn split_is_independent_of_parent_draws() {
        let mut parent = SeededRng::new(3);
        let before: Vec<f64> = {
            let mut s = parent.split("env");
            (0..10).map(|_| s.uniform()).collect()
        };
        for _ in 0..50 {
            parent.uniform();
        }
        let mut s = parent.split("env");
        let after: Vec<f64> = (0..10).map(|_| s.uniform()).collect();
        assert_eq!(before, after);

        let mut other = parent.split("policy");
        let o: Vec<f64> = (0..10).map(|_| other.uniform()).collect();
        assert_ne!(before, o);
    }
}
