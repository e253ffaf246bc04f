//! Uniform law of large numbers for Bernoulli sequences.
//!
//! `G(𝔭, L, δ)`: sequences with `|p_c − #{i<ℓ : bᵢ = c}/ℓ| < L/ℓ + δ` for every
//! `ℓ` and `c`. `L(δ)` is the least `L` for which the Bernstein series
//! `2|C| Σ_ℓ exp(−6(ℓδ+L)² / (3ℓ + 4(ℓδ+L)))` is at most `δ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::symdyn::BernoulliVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlnReport {
    pub delta: f64,
    pub l: f64,
    pub series: f64,
    pub ell_max: usize,
    pub trials: usize,
    pub good_mass: f64,
}

fn summand(ell: f64, delta: f64, l: f64) -> f64 {
    let a = ell * delta + l;
    (-6.0 * a * a / (3.0 * ell + 4.0 * a)).exp()
}

/// Upper bound on the series, summed until a geometric majorant of the tail is negligible.
pub fn bernstein_series(delta: f64, l: f64, alphabet_size: usize) -> f64 {
    // every summand is at most r^ℓ with r = exp(−6δ²/(3+4δ))
    let r = (-6.0 * delta * delta / (3.0 + 4.0 * delta)).exp();
    let mut sum = 0.0;
    let mut ell = 1usize;
    loop {
        sum += summand(ell as f64, delta, l);
        let tail = r.powi(ell as i32 + 1) / (1.0 - r);
        if tail < 1e-6 * delta || ell > 50_000_000 {
            return 2.0 * alphabet_size as f64 * (sum + tail);
        }
        ell += 1;
    }
}

/// Smallest `L` (to bisection tolerance, rounded up) with series `≤ δ`.
pub fn lln_threshold(delta: f64, alphabet_size: usize) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0,1)")));
    }
    if bernstein_series(delta, 0.0, alphabet_size) <= delta {
        return Ok((0.0, bernstein_series(delta, 0.0, alphabet_size)));
    }
    let mut hi = 1.0;
    while bernstein_series(delta, hi, alphabet_size) > delta {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if bernstein_series(delta, mid, alphabet_size) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, bernstein_series(delta, hi, alphabet_size)))
}

/// Monte-Carlo mass of `G(𝔭, L, δ)` tested for `ℓ ≤ ell_max`.
pub fn lln_mass(p: &BernoulliVector, l: f64, delta: f64, ell_max: usize, trials: usize, rng: RngStream) -> f64 {
    let k = p.alphabet().size;
    let good: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.split(t as u64).rng();
            let mut counts = vec![0usize; k];
            for ell in 1..=ell_max {
                counts[p.sample_letter(&mut r)] += 1;
                let lf = ell as f64;
                let bound = l / lf + delta;
                for c in 0..k {
                    if (p.prob(c) - counts[c] as f64 / lf).abs() >= bound {
                        return 0;
                    }
                }
            }
            1
        })
        .sum();
    good as f64 / trials as f64
}

pub fn lln_check(p: &BernoulliVector, ell_max: usize, delta: f64, trials: usize, rng: RngStream) -> Result<LlnReport> {
    let (l, series) = lln_threshold(delta, p.alphabet().size)?;
    Ok(LlnReport { delta, l, series, ell_max, trials, good_mass: lln_mass(p, l, delta, ell_max, trials, rng) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_minimal() {
        let (l, s) = lln_threshold(0.1, 2).unwrap();
        assert!(s <= 0.1);
        assert!(bernstein_series(0.1, l * 0.999, 2) > 0.1);
        assert!(lln_threshold(0.0, 2).is_err());
        // larger alphabets need a larger L
        assert!(lln_threshold(0.1, 4).unwrap().0 > l);
    }

    #[test]
    fn series_truncation_is_conservative() {
        // brute-force partial sum out to where summands vanish
        let (delta, l) = (0.2, 5.0);
        let brute: f64 = (1..200_000).map(|e| summand(e as f64, delta, l)).sum::<f64>() * 4.0;
        let s = bernstein_series(delta, l, 2);
        assert!(s >= brute && s - brute < 1e-5);
    }

    #[test]
    fn examples() {
        let d = BernoulliVector::dirac(3, 1);
        assert_eq!(lln_check(&d, 200, 0.1, 100, RngStream::new(1, 0)).unwrap().good_mass, 1.0);
        let h = BernoulliVector::uniform(2);
        assert_eq!(lln_mass(&h, 0.0, 0.999_999, 100, 100, RngStream::new(1, 1)), 1.0);
        let rep = lln_check(&h, 1000, 0.1, 10_000, RngStream::new(1, 2)).unwrap();
        assert!(rep.good_mass >= 0.9, "{rep:?}");
    }
}
