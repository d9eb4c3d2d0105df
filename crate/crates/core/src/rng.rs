//! Deterministic random streams.
//!
//! Every random draw in the engine comes from a generator identified by a
//! `(seed, stream)` pair. The generator is ChaCha8 keyed by the seed with the
//! stream id selecting an independent keystream, so the sequence is a pure
//! function of the pair on every platform and independent of the order in
//! which work items are evaluated.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rng = ChaCha8Rng;

/// Stream used by substrate `init` functions inside a rollout.
pub const STREAM_INIT: u64 = 0;
/// Stream for random genomes drawn outside an optimizer.
pub const STREAM_GENOME: u64 = 1;
/// Base stream for optimizer sampling; generation `g` uses `STREAM_SEARCH + g`.
pub const STREAM_SEARCH: u64 = 1 << 32;

pub fn make_rng(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut Rng) -> f64 {
    rng.random::<f64>()
}

/// Uniform draw in `[lo, hi)`.
#[inline]
pub fn uniform_range(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

#[inline]
pub fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform integer in `[0, n)`. `n` must be non-zero.
#[inline]
pub fn below(rng: &mut Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_draw_in_unit_interval_and_reproducible() {
        let a = uniform(&mut make_rng(0, 0));
        let b = uniform(&mut make_rng(0, 0));
        assert!((0.0..1.0).contains(&a));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn frozen_first_draws() {
        // Pinned so a dependency bump that changes the stream is caught.
        let mut rng = make_rng(0, 0);
        let draws: Vec<u64> = (0..3).map(|_| uniform(&mut rng).to_bits()).collect();
        let mut again = make_rng(0, 0);
        let again: Vec<u64> = (0..3).map(|_| uniform(&mut again).to_bits()).collect();
        assert_eq!(draws, again);
        assert_eq!(draws, FROZEN_DRAWS);
    }

    const FROZEN_DRAWS: [u64; 3] = [4604562003098661703, 4602064919497455152, 4604472542039653460];

    #[test]
    fn streams_differ() {
        let mut a = make_rng(0, 0);
        let mut b = make_rng(0, 1);
        let xs: Vec<f64> = (0..16).map(|_| uniform(&mut a)).collect();
        let ys: Vec<f64> = (0..16).map(|_| uniform(&mut b)).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn chi_square_uniform_buckets() {
        // 10^4 draws into 20 buckets; critical value chi2(19, 0.999) = 43.82.
        let mut rng = make_rng(12345, 7);
        let n = 10_000;
        let k = 20;
        let mut counts = [0usize; 20];
        for _ in 0..n {
            let u = uniform(&mut rng);
            counts[(u * k as f64) as usize] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }
}
