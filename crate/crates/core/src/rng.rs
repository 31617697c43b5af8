//! Keyed random streams.
//!
//! Every random quantity in the crate is drawn from a stream identified by a
//! tuple of integers (master seed, domain tag, sample index, subset mask, …).
//! The tuple is hashed into a ChaCha8 key, so a stream's output depends only
//! on its key and never on which thread asks for it or in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

/// Domain tags keep streams for different purposes disjoint.
pub mod tag {
    pub const SUBSET_ASSEMBLY: u64 = 0x5301;
    pub const BASIS_ASSEMBLY: u64 = 0x5302;
    pub const SUBSET_SAMPLE: u64 = 0x5303;
    pub const DIAGNOSTICS: u64 = 0x5304;
    pub const Z4: u64 = 0x5305;
    pub const PAULI: u64 = 0x5306;
    pub const STANDALONE: u64 = 0x5307;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, key: &[u64]) -> Self {
        let mut lanes = [
            splitmix64(seed ^ 0x243f_6a88_85a3_08d3),
            splitmix64(seed ^ 0x1319_8a2e_0370_7344),
            splitmix64(seed ^ 0xa409_3822_299f_31d0),
            splitmix64(seed ^ 0x082e_fa98_ec4e_6c89),
        ];
        for (i, &word) in key.iter().enumerate() {
            for (l, lane) in lanes.iter_mut().enumerate() {
                *lane = splitmix64(*lane ^ splitmix64(word.wrapping_add((i as u64) << 8 | l as u64)));
            }
        }
        let mut bytes = [0u8; 32];
        for (chunk, lane) in bytes.chunks_exact_mut(8).zip(lanes) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        RngStream { inner: ChaCha8Rng::from_seed(bytes) }
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF.
    pub fn gaussian(&mut self) -> f64 {
        let u = self.uniform_open();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_open() < p
    }

    /// Uniform integer in `0..n` (`n > 0`), by Lemire-style rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.inner.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_keyed() {
        let a: Vec<u64> = (0..4).map({
            let mut s = RngStream::new(7, &[1, 2, 3]);
            move |_| s.next_u64()
        }).collect();
        let mut again = RngStream::new(7, &[1, 2, 3]);
        assert!(a.iter().all(|&x| x == again.next_u64()));
        let mut other = RngStream::new(7, &[1, 2, 4]);
        assert_ne!(a[0], other.next_u64());
        let mut swapped = RngStream::new(7, &[2, 1, 3]);
        assert_ne!(a[0], swapped.next_u64());
    }

    #[test]
    fn gaussian_moments() {
        let mut s = RngStream::new(1, &[tag::STANDALONE]);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        assert!((m4 - 3.0).abs() < 4.0 * (96.0 / n as f64).sqrt());
    }

    #[test]
    fn below_is_in_range() {
        let mut s = RngStream::new(3, &[]);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[s.below(3) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (c as i64 - 10_000).abs() < 400));
    }
}
