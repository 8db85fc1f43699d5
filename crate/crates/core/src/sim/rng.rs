//! Deterministic per-component random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha12Rng;

/// Independent stream for `(seed, tag)`. The tag selects a ChaCha stream, so
/// components drawing from different tags never perturb each other.
pub fn rng_stream(seed: u64, tag: &str) -> SimRng {
    let digest = Sha256::digest(tag.as_bytes());
    let mut stream = [0u8; 8];
    stream.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::from_le_bytes(stream));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn same_seed_and_tag_repeat() {
        let a: Vec<u64> = rng_stream(7, "bler").sample_iter(rand::distributions::Standard).take(64).collect();
        let b: Vec<u64> = rng_stream(7, "bler").sample_iter(rand::distributions::Standard).take(64).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn tags_are_uncorrelated() {
        let n = 100_000;
        let mut x = rng_stream(42, "bler");
        let mut y = rng_stream(42, "placement");
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n).map(|_| (x.gen::<f64>(), y.gen::<f64>())).unzip();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>();
        let vx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        // |r| * sqrt(n) is approximately standard normal; 2.576 is the two-sided 1% point.
        assert!(r.abs() * (n as f64).sqrt() < 2.576, "r = {r}");
    }

    #[test]
    fn neighbouring_seeds_differ() {
        let firsts: HashSet<u64> = (0..10_000u64).map(|s| rng_stream(s, "bler").gen()).collect();
        assert_eq!(firsts.len(), 10_000);
    }
}
