use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::space::{BoPoint, SearchSpace};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Point `index` (0-based) of the `dim`-dimensional Halton sequence, skipping
/// the origin. Dimensions beyond the prime table reuse it cyclically.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| radical_inverse(index + 1, PRIMES[d % PRIMES.len()]))
        .collect()
}

/// `per_candidate` randomly shifted Halton points inside each candidate's
/// box. Candidates without free dimensions contribute one point.
pub fn initial_design(space: &SearchSpace, per_candidate: usize, seed: u64) -> Vec<BoPoint> {
    let mut out = Vec::new();
    if per_candidate == 0 {
        return out;
    }
    for j in 1..=space.n_candidates() {
        let d = space.free_dims(j);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let count = if d == 0 { 1 } else { per_candidate };
        for i in 0..count {
            let u: Vec<f64> = halton(i as u64, d)
                .iter()
                .zip(&shift)
                .map(|(h, s)| {
                    let v = h + s;
                    v - crate::math::floor(v)
                })
                .collect();
            out.push(space.decode(&space.embed(j, &u)));
        }
    }
    out
}
