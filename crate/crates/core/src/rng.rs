//! Deterministic random streams.
//!
//! Every Monte Carlo replicate draws from its own ChaCha8 stream keyed by the
//! user seed and a short list of tags (experiment, replicate, role, ...), so
//! results never depend on how work is scheduled across threads.

use rand::distr::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Name of the generator family, recorded in reports.
pub const RNG_FAMILY: &str = "chacha8 (splitmix64-derived keys)";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut state = splitmix64(seed);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One draw from `Multinomial(n, probs)`; `probs` must be non-negative and sum
/// to one up to roundoff.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let p = probs.len();
    let mut counts = vec![0u64; p];
    if n == 0 || p == 0 {
        return counts;
    }
    if (n as usize) < p / 4 {
        // few draws over many cells: categorical draws by bisection on the CDF
        let mut cdf = Vec::with_capacity(p);
        let mut acc = 0.0;
        for &q in probs {
            acc += q;
            cdf.push(acc);
        }
        let last = (0..p).rev().find(|&j| probs[j] > 0.0).unwrap_or(p - 1);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let j = cdf.partition_point(|&c| c <= u).min(last);
            // skip zero-probability cells that share a CDF value
            let j = (j..p).find(|&i| probs[i] > 0.0).unwrap_or(last);
            counts[j] += 1;
        }
        return counts;
    }
    // conditional binomials
    let mut left = n;
    let mut mass = 1.0;
    for j in 0..p {
        if left == 0 {
            break;
        }
        if j == p - 1 || mass <= 0.0 {
            counts[j] = left;
            break;
        }
        let q = (probs[j] / mass).clamp(0.0, 1.0);
        let draw = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        counts[j] = draw;
        left -= draw;
        mass -= probs[j];
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = stream(1, &[]);
        let probs = vec![0.1, 0.0, 0.4, 0.5];
        for n in [0u64, 1, 5, 1000] {
            let c = multinomial(&mut rng, n, &probs);
            assert_eq!(c.iter().sum::<u64>(), n);
            assert_eq!(c[1], 0);
        }
        let wide: Vec<f64> = (0..400).map(|j| if j % 3 == 0 { 0.0 } else { 1.0 }).collect();
        let s: f64 = wide.iter().sum();
        let wide: Vec<f64> = wide.iter().map(|w| w / s).collect();
        let c = multinomial(&mut rng, 30, &wide);
        assert_eq!(c.iter().sum::<u64>(), 30);
        assert!(c.iter().step_by(3).all(|&v| v == 0));
    }

    #[test]
    fn vertex_gets_everything() {
        let mut rng = stream(3, &[]);
        assert_eq!(multinomial(&mut rng, 9, &[0.0, 1.0, 0.0]), vec![0, 9, 0]);
    }
}
