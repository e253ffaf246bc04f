use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{respell, Cascade, LetterPath};
use crate::error::{Error, Result};
use crate::fbar::mean_se;
use crate::rng::RngStream;
use crate::symdyn::BernoulliVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluctuationStats {
    pub level: usize,
    pub k: usize,
    pub expected_roof: f64,
    pub expected_roof_exact: bool,
    pub expected_roof_se: f64,
    pub expected_roof_k: f64,
    pub delta_nk: Vec<f64>,
    pub delta_nn: Vec<f64>,
    /// Estimate of `D(𝔭̃ₙ, 𝔭ₙ) = E_{𝔭ₙ}[Δ_{n,n}]`.
    pub d_tilde: f64,
    pub d_tilde_se: f64,
    /// Letters violating `Δ_{n,n} ≤ Δ_{n,k}(1+4K2⁻ᵏ) + 4K2⁻ᵏ`.
    pub corollary_violations: usize,
}

impl FluctuationStats {
    /// Empirical quantile of `Δ_{n,n}`.
    pub fn delta_nn_quantile(&self, q: f64) -> f64 {
        let mut v = self.delta_nn.clone();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return 0.0;
        }
        v[((v.len() - 1) as f64 * q).round() as usize]
    }
}

fn expected_roof(c: &Cascade, p: &BernoulliVector, n: usize, samples: usize, rng: RngStream) -> Result<(f64, bool, f64)> {
    if let Some(e) = c.expected_roof_exact(n, p) {
        return Ok((e, true, 0.0));
    }
    let lens: Result<Vec<f64>> = (0..samples.max(2))
        .into_par_iter()
        .map(|i| {
            let mut r = rng.split(i as u64).rng();
            let a = c.sample_letter(p, n, &mut r);
            Ok(c.roof_len(n, &a.digits)? as f64)
        })
        .collect();
    let (m, se) = mean_se(&lens?);
    Ok((m, false, se))
}

pub fn fluctuations(c: &Cascade, p: &BernoulliVector, n: usize, k: usize, samples: usize, rng: RngStream) -> Result<FluctuationStats> {
    if k > n || n > c.depth() {
        return Err(Error::InvalidArgument(format!("need k <= n <= depth, got k={k}, n={n}")));
    }
    if p.alphabet() != c.base().source() {
        return Err(Error::AlphabetMismatch("vector vs base alphabet".into()));
    }
    let (en, exact, en_se) = expected_roof(c, p, n, samples, rng.split(1))?;
    let (ek, _, _) = expected_roof(c, p, k, samples, rng.split(2))?;
    let ratio: f64 = (k..n).map(|i| c.config().m[i] as f64).product();
    let kk = c.k_value();
    let slack = 4.0 * kk * 2f64.powi(-(k as i32));
    let rows: Result<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.split(1000 + i as u64).rng();
            let a = c.sample_letter(p, n, &mut r);
            let sum_k: u64 = respell(c, &a, k)?.iter().map(|l| c.roof_len(k, &l.digits)).sum::<Result<u64>>()?;
            let dnk = (ek - sum_k as f64 / ratio).abs() / ek;
            let dnn = (en - c.roof_len(n, &a.digits)? as f64).abs() / en;
            Ok((dnk, dnn))
        })
        .collect();
    let rows = rows?;
    let delta_nk: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let delta_nn: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let corollary_violations = rows.iter().filter(|(dnk, dnn)| *dnn > dnk * (1.0 + slack) + slack + 1e-12).count();
    let (d_tilde, d_tilde_se) = mean_se(&delta_nn);
    Ok(FluctuationStats {
        level: n,
        k,
        expected_roof: en,
        expected_roof_exact: exact,
        expected_roof_se: en_se,
        expected_roof_k: ek,
        delta_nk,
        delta_nn,
        d_tilde,
        d_tilde_se,
        corollary_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichViolation {
    pub level: usize,
    pub k: usize,
    pub roof: u64,
    pub sum_k: u64,
}

/// Checks `Σ_k ≤ |ϱₙ(a)| ≤ Σ_k (1 + 4K(2⁻ᵏ − 2⁻ⁿ))` for every `k < n` in integers.
pub fn check_tail_sandwich(c: &Cascade, letter: &LetterPath) -> Result<Vec<SandwichViolation>> {
    let n = letter.level;
    let roof = c.roof_len(n, &letter.digits)?;
    let kq = c.k();
    let mut out = Vec::new();
    for k in 0..n {
        let sum_k: u64 = respell(c, letter, k)?.iter().map(|l| c.roof_len(k, &l.digits)).sum::<Result<u64>>()?;
        let lhs = roof as u128 * (kq.den << n);
        let rhs = sum_k as u128 * ((kq.den << n) + 4 * kq.num * ((1u128 << (n - k)) - 1));
        if sum_k > roof || lhs > rhs {
            out.push(SandwichViolation { level: n, k, roof, sum_k });
        }
    }
    Ok(out)
}

/// `max/min ≤ 1 + 4K` in integers.
pub fn max_min_ratio_ok(c: &Cascade, max: u64, min: u64) -> bool {
    let kq = c.k();
    max as u128 * kq.den <= min as u128 * (kq.den + 4 * kq.num)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuEntropy {
    pub value: f64,
    /// `h(𝔭) e^{−K} / |ϱ₀|`.
    pub floor: f64,
    pub expected_roof: f64,
    pub exact: bool,
}

/// `h(σ, νₙ(𝔭)) = Pₙ h(𝔭) / Eₙ(𝔭)`.
pub fn nu_entropy(c: &Cascade, p: &BernoulliVector, n: usize, samples: usize, rng: RngStream) -> Result<NuEntropy> {
    if n > c.depth() {
        return Err(Error::InvalidArgument(format!("level {n} > depth")));
    }
    let (e, exact, _) = expected_roof(c, p, n, samples, rng)?;
    let h = p.entropy();
    Ok(NuEntropy {
        value: c.digits_at(n) as f64 * h / e,
        floor: h * (-c.k_value()).exp() / c.base_len() as f64,
        expected_roof: e,
        exact,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub k_const: f64,
    pub k: usize,
    pub l: usize,
    /// `f̄(νₙ(𝔭), ν₀(𝔭)) ≤ 6K + 8K²`.
    pub kickoff: f64,
    /// `f̄(κ_k, κ_l) ≤ 4K 2⁻ᵏ`.
    pub level_gap: f64,
    /// `½(1+4K) min(2, P_k D(𝔭, 𝔮))`.
    pub cross_vector: f64,
    pub formulas: Vec<(String, String)>,
}

pub const FORMULA_KICKOFF: &str = "kickoff";
pub const FORMULA_LEVEL_GAP: &str = "level-gap";
pub const FORMULA_CROSS: &str = "cross-vector";

pub fn level_fbar_bounds(c: &Cascade, p: &BernoulliVector, q: &BernoulliVector, k: usize, l: usize) -> Result<BoundReport> {
    if k > l || l > c.depth() {
        return Err(Error::InvalidArgument(format!("need k <= l <= depth, got {k}, {l}")));
    }
    let kk = c.k_value();
    let d = p.city(q)?;
    let lifted = (c.digits_at(k) as f64 * d).min(2.0);
    Ok(BoundReport {
        k_const: kk,
        k,
        l,
        kickoff: 6.0 * kk + 8.0 * kk * kk,
        level_gap: 4.0 * kk * 2f64.powi(-(k as i32)),
        cross_vector: 0.5 * (1.0 + 4.0 * kk) * lifted,
        formulas: vec![
            (FORMULA_KICKOFF.into(), "6K+8K^2".into()),
            (FORMULA_LEVEL_GAP.into(), "4K*2^-k".into()),
            (FORMULA_CROSS.into(), "(1+4K)/2*min(2,P_k*D(p,q))".into()),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::cascade;
    use super::super::TailKind;
    use super::*;

    #[test]
    fn zero_tails_have_no_fluctuation() {
        let c = cascade(TailKind::Zero, 0.0, vec![2, 3], 4);
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        let s = fluctuations(&c, &p, 2, 2, 200, RngStream::new(1, 0)).unwrap();
        assert!(s.delta_nn.iter().all(|&d| d == 0.0));
        assert_eq!(s.d_tilde, 0.0);
        assert!(s.expected_roof_exact);
        assert_eq!(s.expected_roof, 24.0);
    }

    #[test]
    fn corollary_and_gap_constant_tails() {
        let c = cascade(TailKind::Constant, 0.1, vec![2, 3, 2], 64);
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        for k in 0..=3 {
            let s = fluctuations(&c, &p, 3, k, 10_000, RngStream::new(2, k as u64)).unwrap();
            assert_eq!(s.corollary_violations, 0);
            assert!(s.d_tilde < 0.4);
        }
    }

    #[test]
    fn corollary_digit_weighted() {
        let c = cascade(TailKind::DigitWeighted { symbol: 0 }, 0.1, vec![2, 3, 2, 3], 64);
        let p = BernoulliVector::new(vec![0.4, 0.6]).unwrap();
        for n in 1..=4 {
            for k in 0..=n {
                let s = fluctuations(&c, &p, n, k, 2000, RngStream::new(3, (n * 10 + k) as u64)).unwrap();
                assert_eq!(s.corollary_violations, 0, "n={n} k={k}");
                assert!(s.d_tilde < 0.4 && s.d_tilde > 0.0);
                assert!(s.expected_roof >= (c.digits_at(n) * 64) as f64);
            }
        }
    }

    #[test]
    fn sandwich_and_ratio() {
        let c = cascade(TailKind::DigitWeighted { symbol: 1 }, 0.1, vec![3, 2, 3, 2], 64);
        let p = BernoulliVector::uniform(2);
        let mut r = RngStream::new(4, 0).rng();
        for n in 1..=4 {
            let mut lo = u64::MAX;
            let mut hi = 0;
            for _ in 0..200 {
                let a = c.sample_letter(&p, n, &mut r);
                assert!(check_tail_sandwich(&c, &a).unwrap().is_empty());
                let l = c.roof_len(n, &a.digits).unwrap();
                lo = lo.min(l);
                hi = hi.max(l);
            }
            assert!(max_min_ratio_ok(&c, hi, lo));
        }
    }

    #[test]
    fn entropy_examples() {
        let z = cascade(TailKind::Zero, 0.0, vec![2, 2], 4);
        let p = BernoulliVector::new(vec![0.2, 0.8]).unwrap();
        let e = nu_entropy(&z, &p, 2, 10, RngStream::new(1, 0)).unwrap();
        assert!((e.value - p.entropy() / 4.0).abs() < 1e-15);
        let d = nu_entropy(&z, &BernoulliVector::dirac(2, 0), 2, 10, RngStream::new(1, 0)).unwrap();
        assert_eq!(d.value, 0.0);
        let c = cascade(TailKind::Constant, 0.1, vec![2, 2, 2], 4);
        let h = BernoulliVector::uniform(2);
        let ln2 = 2f64.ln();
        for n in 0..=3 {
            let e = nu_entropy(&c, &h, n, 10, RngStream::new(1, 0)).unwrap();
            assert!(e.value <= ln2 / 4.0 + 1e-15 && e.value >= ln2 / (4.0 * 1.4));
            assert!(e.value >= e.floor);
        }
    }

    #[test]
    fn entropy_step_ratio() {
        let c = cascade(TailKind::DigitWeighted { symbol: 0 }, 0.1, vec![2, 3, 2, 3], 64);
        let p = BernoulliVector::new(vec![0.25, 0.75]).unwrap();
        for n in 1..=4 {
            let a = nu_entropy(&c, &p, n, 0, RngStream::new(0, 0)).unwrap().value;
            let b = nu_entropy(&c, &p, n - 1, 0, RngStream::new(0, 0)).unwrap().value;
            let lo = 1.0 / (1.0 + 4.0 * 0.1 * 2f64.powi(-(n as i32 - 1)));
            assert!(a / b <= 1.0 + 1e-12 && a / b >= lo);
        }
    }

    #[test]
    fn bound_examples() {
        let p = BernoulliVector::uniform(2);
        let q = BernoulliVector::new(vec![0.6, 0.4]).unwrap();
        let z = cascade(TailKind::Zero, 0.0, vec![2, 2, 2, 2], 4);
        let b = level_fbar_bounds(&z, &p, &q, 0, 2).unwrap();
        assert_eq!((b.kickoff, b.level_gap), (0.0, 0.0));
        assert!((b.cross_vector - 0.1).abs() < 1e-15);
        let c = cascade(TailKind::Constant, 0.05, vec![2, 2, 2, 2], 4);
        assert!((level_fbar_bounds(&c, &p, &p, 0, 4).unwrap().kickoff - 0.32).abs() < 1e-12);
        let c = cascade(TailKind::Constant, 0.1, vec![2, 2, 2, 2], 4);
        assert!((level_fbar_bounds(&c, &p, &p, 3, 4).unwrap().level_gap - 0.05).abs() < 1e-15);
        assert!(level_fbar_bounds(&c, &p, &p, 3, 2).is_err());
    }
}
