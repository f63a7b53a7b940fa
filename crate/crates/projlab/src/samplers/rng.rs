use num::{BigInt, BigRational, One};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A deterministic, splittable random stream. The same (seed, trial) pair
/// yields the same draws on every platform; distinct trials of one seed are
/// independent ChaCha streams, so trials can run in any order or in
/// parallel without perturbing each other.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    trial: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::child(seed, 0)
    }

    pub fn child(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        RngStream { seed, trial, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Bernoulli(t) for an exact rational t in [0,1]: compares a uniform
    /// 64-bit draw against t * 2^64 by exact cross-multiplication; no
    /// floating point enters the sampling path.
    pub fn bernoulli(&mut self, t: &BigRational) -> bool {
        let u = self.next_u64();
        u64_below(u, t)
    }

    /// Draw one of `cumulative.len() + 1` branches: branch i is taken when
    /// the uniform draw falls between cumulative thresholds i-1 and i.
    /// `cumulative` must be nondecreasing rationals in [0,1].
    pub fn pick(&mut self, cumulative: &[BigRational]) -> usize {
        let u = self.next_u64();
        for (i, threshold) in cumulative.iter().enumerate() {
            if u64_below(u, threshold) {
                return i;
            }
        }
        cumulative.len()
    }
}

/// u < t * 2^64, exactly.
pub fn u64_below(u: u64, t: &BigRational) -> bool {
    BigInt::from(u) * t.denom() < t.numer() * (BigInt::one() << 64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::r;

    #[test]
    fn reproducible_across_instances() {
        let mut a = RngStream::child(7, 3);
        let mut b = RngStream::child(7, 3);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::child(7, 4);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn bernoulli_edge_cases() {
        let mut rng = RngStream::new(1);
        for _ in 0..64 {
            assert!(rng.bernoulli(&r(1, 1)));
            assert!(!rng.bernoulli(&r(0, 1)));
        }
    }

    #[test]
    fn bernoulli_frequency_tracks_threshold() {
        let mut rng = RngStream::new(42);
        let t = r(3, 16);
        let n = 200_000;
        let hits = (0..n).filter(|_| rng.bernoulli(&t)).count() as f64;
        let p = 3.0 / 16.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 5.0 * sigma);
    }

    #[test]
    fn pick_respects_cumulative_thresholds() {
        let mut rng = RngStream::new(9);
        let cum = [r(1, 8), r(5, 8)];
        let n = 100_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[rng.pick(&cum)] += 1;
        }
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        for (freq, want) in freqs.iter().zip([0.125, 0.5, 0.375]) {
            assert!((freq - want).abs() < 0.01, "{freqs:?}");
        }
    }
}
