//! Deterministic, splittable random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// SplitMix64 finalizer.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// A ChaCha8 stream identified by `(seed, stream_id)`.
///
/// The same pair yields the same sequence on every platform. Child streams
/// are keyed by the parent's `(seed, stream_id)` and the child index only,
/// never by how much of the parent has been consumed.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(expand_key(seed));
        rng.set_stream(stream_id);
        RandomStream { seed, stream_id, rng }
    }

    /// Stream `0` of a master seed.
    pub fn from_seed(seed: u64) -> Self {
        RandomStream::new(seed, 0)
    }

    pub fn child(&self, id: u64) -> RandomStream {
        let derived = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0xA076_1D64_78BD_642F)));
        RandomStream::new(derived, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-1, 1]`.
    #[inline]
    pub fn symmetric_unit(&mut self) -> f64 {
        // 2·(k + ½)/2^53 − 1 for k < 2^53 covers (-1, 1) symmetrically
        2.0 * self.open01() - 1.0
    }

    /// `+1` or `-1` with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn standard_exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomStream::new(42, 7);
        let mut b = RandomStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn known_output_is_pinned() {
        // guards cross-platform and cross-version reproducibility
        let mut s = RandomStream::new(42, 0);
        let first: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        assert_eq!(first, [7296272285688312206, 10168053627441392633, 17778891774391609027]);
        assert_eq!(RandomStream::new(42, 0).child(5).next_u64(), 7109714135457389422);
        assert_ne!(first[0], RandomStream::new(42, 1).next_u64());
    }

    #[test]
    fn children_are_distinct_and_state_independent() {
        let parent = RandomStream::new(1, 0);
        let mut used = parent.clone();
        for _ in 0..10 {
            used.next_u64();
        }
        let mut c1 = parent.child(3);
        let mut c2 = used.child(3);
        assert_eq!(c1.next_u64(), c2.next_u64());

        let mut firsts: Vec<u64> = (0..64).map(|i| parent.child(i).next_u64()).collect();
        firsts.sort_unstable();
        firsts.dedup();
        assert_eq!(firsts.len(), 64);
        assert_ne!(parent.child(0).next_u64(), RandomStream::new(2, 0).child(0).next_u64());
    }

    #[test]
    fn uniform_ranges() {
        let mut s = RandomStream::from_seed(9);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
            let o = s.open01();
            assert!(o > 0.0 && o < 1.0);
            let v = s.symmetric_unit();
            assert!((-1.0..=1.0).contains(&v));
        }
    }
}
