//! Repeat-and-tail substitution cascades.
//!
//! Level-n letters are never enumerated: a letter of `𝒜ₙ = (𝒜ₙ₋₁)^{mₙ}` is
//! identified with its digit word over `𝒜₀` of length `Pₙ = m₁⋯mₙ`, and
//! `ϱₙ(a) = ϱₙ₋₁(a₁)⋯ϱₙ₋₁(a_{mₙ}) tₙ(a)`.

mod lln;
mod sample;
mod stats;

pub use lln::{lln_check, lln_mass, lln_threshold, LlnReport};
pub use sample::{sample_nu_n, sample_nu_n_with_history, LevelCoupling, NuSampler};
pub use stats::{
    check_tail_sandwich, fluctuations, level_fbar_bounds, max_min_ratio_ok, nu_entropy, BoundReport, FluctuationStats,
    NuEntropy, SandwichViolation, FORMULA_CROSS, FORMULA_KICKOFF, FORMULA_LEVEL_GAP,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::substitution::SubstitutionMap;
use crate::symdyn::BernoulliVector;

/// Source of tails for the geometric mode. `body` is `ϱₙ₋₁(a₁)⋯ϱₙ₋₁(a_{mₙ})`.
pub trait TailSource: Send + Sync {
    fn tail(&self, level: usize, letter: &LetterPath, body: &[usize]) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TailKind {
    Zero,
    /// One length per level: `ℓₙ = ⌊K 2⁻ⁿ mₙ |ϱₙ₋₁|⌋`.
    Constant,
    /// `tₙ(a) = ⌊capₙ · #{digits = symbol} / Pₙ⌋` with `capₙ = ⌊K 2⁻ⁿ Pₙ |ϱ₀|⌋`.
    DigitWeighted { symbol: usize },
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub base: SubstitutionMap,
    pub m: Vec<usize>,
    pub k: f64,
    pub tails: TailKind,
}

/// `num / den` with `den = 10⁶`, used for exact budget arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u128,
    pub den: u128,
}

impl Rational {
    pub fn from_f64(x: f64) -> Self {
        Rational { num: (x * 1e6).round().max(0.0) as u128, den: 1_000_000 }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LetterPath {
    pub level: usize,
    pub digits: Vec<usize>,
}

pub struct Cascade {
    config: CascadeConfig,
    k: Rational,
    /// `P[n] = m₁⋯mₙ`, `P[0] = 1`.
    p: Vec<usize>,
    base_len: usize,
    source: Option<Arc<dyn TailSource>>,
    memo: Mutex<HashMap<LetterPath, Arc<Vec<usize>>>>,
}

impl std::fmt::Debug for Cascade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cascade").field("config", &self.config).finish()
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Cascade {
    pub fn new(config: CascadeConfig) -> Result<Self> {
        Self::build(config, None)
    }

    pub fn with_source(config: CascadeConfig, source: Arc<dyn TailSource>) -> Result<Self> {
        Self::build(config, Some(source))
    }

    fn build(config: CascadeConfig, source: Option<Arc<dyn TailSource>>) -> Result<Self> {
        let base = &config.base;
        if base.min_len() != base.max_len() {
            return Err(Error::Config("base substitution must have equal image lengths".into()));
        }
        if config.m.iter().any(|&m| m < 2) {
            return Err(Error::Config("repetition counts must be >= 2".into()));
        }
        if !(config.k >= 0.0 && config.k.is_finite()) {
            return Err(Error::Config("K must be >= 0".into()));
        }
        if let TailKind::DigitWeighted { symbol } = config.tails {
            if symbol >= base.source().size {
                return Err(Error::Config("digit-weighted symbol outside the base alphabet".into()));
            }
        }
        if config.tails == TailKind::Geometric && source.is_none() {
            return Err(Error::Config("geometric tails need a tail source".into()));
        }
        let mut p = vec![1usize];
        for &m in &config.m {
            let next = p.last().unwrap().checked_mul(m).ok_or_else(|| Error::Config("digit count overflow".into()))?;
            p.push(next);
        }
        Ok(Cascade {
            k: Rational::from_f64(config.k),
            base_len: base.min_len(),
            p,
            source,
            memo: Mutex::new(HashMap::new()),
            config,
        })
    }

    /// Non-fatal remarks on the repetition schedule.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (i, pair) in self.config.m.windows(2).enumerate() {
            if pair[1] < pair[0] {
                w.push(format!("m_{} = {} < m_{} = {}: repetition counts should not decrease", i + 2, pair[1], i + 1, pair[0]));
            }
        }
        if self.config.k > 0.0 && self.config.tails == TailKind::Constant && self.constant_tail_len(1) == 0 {
            w.push("constant tails vanish at level 1; increase |ϱ₀| or K".into());
        }
        w
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.config.m.len()
    }

    pub fn k(&self) -> Rational {
        self.k
    }

    pub fn k_value(&self) -> f64 {
        self.config.k
    }

    pub fn base(&self) -> &SubstitutionMap {
        &self.config.base
    }

    pub fn base_len(&self) -> usize {
        self.base_len
    }

    /// `m₁⋯mₙ`.
    pub fn digits_at(&self, n: usize) -> usize {
        self.p[n]
    }

    pub fn letter(&self, level: usize, digits: Vec<usize>) -> Result<LetterPath> {
        if level > self.depth() {
            return Err(Error::InvalidArgument(format!("level {level} > depth {}", self.depth())));
        }
        if digits.len() != self.p[level] {
            return Err(Error::InvalidArgument(format!("level {level} letters have {} digits", self.p[level])));
        }
        if digits.iter().any(|&d| d >= self.config.base.source().size) {
            return Err(Error::AlphabetMismatch("digit outside the base alphabet".into()));
        }
        Ok(LetterPath { level, digits })
    }

    pub fn sample_letter(&self, p: &BernoulliVector, level: usize, rng: &mut impl Rng) -> LetterPath {
        LetterPath { level, digits: (0..self.p[level]).map(|_| p.sample_letter(rng)).collect() }
    }

    fn constant_tail_len(&self, n: usize) -> usize {
        // ℓₙ = ⌊K 2⁻ⁿ mₙ Lₙ₋₁⌋ with Lₙ the constant level-n length
        let mut len = self.base_len as u128;
        let mut t = 0u128;
        for level in 1..=n {
            let m = self.config.m[level - 1] as u128;
            t = self.k.num * m * len / (self.k.den << level);
            len = m * len + t;
        }
        t as usize
    }

    fn digit_cap(&self, n: usize) -> u128 {
        self.k.num * self.p[n] as u128 * self.base_len as u128 / (self.k.den << n)
    }

    /// Tail length of a level-n letter (n ≥ 1) given its digits.
    pub fn tail_len(&self, n: usize, digits: &[usize]) -> Result<usize> {
        match self.config.tails {
            TailKind::Zero => Ok(0),
            TailKind::Constant => Ok(self.constant_tail_len(n)),
            TailKind::DigitWeighted { symbol } => {
                let c = digits.iter().filter(|&&d| d == symbol).count() as u128;
                Ok((self.digit_cap(n) * c / self.p[n] as u128) as usize)
            }
            TailKind::Geometric => Ok(self.tail(n, digits)?.len()),
        }
    }

    /// Tail content of a level-n letter.
    pub fn tail(&self, n: usize, digits: &[usize]) -> Result<Arc<Vec<usize>>> {
        if n == 0 {
            return Ok(Arc::new(Vec::new()));
        }
        let key = LetterPath { level: n, digits: digits.to_vec() };
        if let Some(t) = self.memo.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let t = match self.config.tails {
            TailKind::Geometric => {
                let mut body = Vec::new();
                for chunk in digits.chunks(self.p[n - 1]) {
                    self.image_into(n - 1, chunk, &mut body)?;
                }
                let t = self.source.as_ref().unwrap().tail(n, &key, &body)?;
                self.check_budget(n, t.len(), body.len() as u128)?;
                t
            }
            _ => {
                let len = self.tail_len(n, digits)?;
                let b = self.config.base.target().size as u64;
                let mut h = mix(n as u64);
                for &d in digits {
                    h = mix(h ^ d as u64);
                }
                (0..len).map(|j| (mix(h ^ j as u64) % b) as usize).collect()
            }
        };
        let t = Arc::new(t);
        // synthetic tails are cheap to rebuild; memoize geometric ones only
        if self.config.tails == TailKind::Geometric {
            self.memo.lock().unwrap().insert(key, t.clone());
        }
        Ok(t)
    }

    /// `|t| ≤ K 2⁻ⁿ Σ|ϱₙ₋₁(aᵢ)|` in exact arithmetic.
    pub fn check_budget(&self, n: usize, tail_len: usize, children: u128) -> Result<()> {
        if (tail_len as u128) * (self.k.den << n) > self.k.num * children {
            return Err(Error::TailBudget {
                level: n,
                len: tail_len,
                budget: format!("{}·2^-{n}·{children}", self.k.value()),
            });
        }
        Ok(())
    }

    /// `|ϱₙ(a)|`.
    pub fn roof_len(&self, n: usize, digits: &[usize]) -> Result<u64> {
        if n == 0 {
            return Ok(self.base_len as u64);
        }
        if self.config.tails == TailKind::Constant || self.config.tails == TailKind::Zero {
            return Ok(self.constant_roof(n));
        }
        let mut total = 0u64;
        for chunk in digits.chunks(self.p[n - 1]) {
            total += self.roof_len(n - 1, chunk)?;
        }
        let t = self.tail_len(n, digits)?;
        self.check_budget(n, t, total as u128)?;
        Ok(total + t as u64)
    }

    fn constant_roof(&self, n: usize) -> u64 {
        let mut len = self.base_len as u64;
        for level in 1..=n {
            len = self.config.m[level - 1] as u64 * len + self.constant_tail_len(level) as u64;
        }
        len
    }

    /// Appends `ϱₙ(a)` to `out`.
    pub fn image_into(&self, n: usize, digits: &[usize], out: &mut Vec<usize>) -> Result<()> {
        if n == 0 {
            out.extend_from_slice(self.config.base.image(digits[0]));
            return Ok(());
        }
        for chunk in digits.chunks(self.p[n - 1]) {
            self.image_into(n - 1, chunk, out)?;
        }
        out.extend_from_slice(&self.tail(n, digits)?);
        Ok(())
    }

    pub fn image(&self, letter: &LetterPath) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.image_into(letter.level, &letter.digits, &mut out)?;
        Ok(out)
    }

    /// Upper bound on every level-n roof length, from the tail budget.
    pub fn max_roof_bound(&self, n: usize) -> u64 {
        let mut b = self.base_len as u128;
        for level in 1..=n {
            let m = self.config.m[level - 1] as u128;
            b = m * b + self.k.num * m * b / (self.k.den << level);
        }
        b as u64
    }

    /// Exact `Eₙ(𝔭)` where a closed form exists.
    pub fn expected_roof_exact(&self, n: usize, p: &BernoulliVector) -> Option<f64> {
        match self.config.tails {
            TailKind::Zero | TailKind::Constant => Some(self.constant_roof(n) as f64),
            TailKind::DigitWeighted { symbol } => {
                let q = p.prob(symbol);
                let mut e = self.base_len as f64;
                for level in 1..=n {
                    let pn = self.p[level];
                    let cap = self.digit_cap(level);
                    let mean_tail: f64 = binomial_pmf(pn, q)
                        .iter()
                        .enumerate()
                        .map(|(c, w)| w * ((cap * c as u128 / pn as u128) as f64))
                        .sum();
                    e = self.config.m[level - 1] as f64 * e + mean_tail;
                }
                Some(e)
            }
            TailKind::Geometric => None,
        }
    }
}

/// Respelling `𝒮_{n,k}`: the level-k letters whose digits concatenate to `letter`.
pub fn respell(cascade: &Cascade, letter: &LetterPath, k: usize) -> Result<Vec<LetterPath>> {
    if k > letter.level {
        return Err(Error::InvalidArgument(format!("cannot respell level {} to level {k}", letter.level)));
    }
    let w = cascade.digits_at(k);
    Ok(letter.digits.chunks(w).map(|c| LetterPath { level: k, digits: c.to_vec() }).collect())
}

/// The product law `𝔭ₙ` on level-n letters.
#[derive(Debug, Clone)]
pub struct LiftedBernoulli {
    pub p: BernoulliVector,
    pub level: usize,
}

pub fn lift_bernoulli(p: &BernoulliVector, n: usize) -> LiftedBernoulli {
    LiftedBernoulli { p: p.clone(), level: n }
}

impl LiftedBernoulli {
    pub fn prob(&self, letter: &LetterPath) -> f64 {
        letter.digits.iter().map(|&d| self.p.prob(d)).product()
    }
}

fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    if q <= 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if q >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    (0..=n)
        .map(|c| (ln_fact[n] - ln_fact[c] - ln_fact[n - c] + c as f64 * q.ln() + (n - c) as f64 * (1.0 - q).ln()).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::symdyn::Alphabet;
    use proptest::prelude::*;

    pub(crate) fn base(len: usize) -> SubstitutionMap {
        SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0; len], (0..len).map(|i| i % 2).collect()]).unwrap()
    }

    pub(crate) fn cascade(tails: TailKind, k: f64, m: Vec<usize>, len: usize) -> Cascade {
        Cascade::new(CascadeConfig { base: base(len), m, k, tails }).unwrap()
    }

    #[test]
    fn validation() {
        let bad = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0], vec![1, 1]]).unwrap();
        assert!(Cascade::new(CascadeConfig { base: bad, m: vec![2], k: 0.1, tails: TailKind::Zero }).is_err());
        assert!(Cascade::new(CascadeConfig { base: base(2), m: vec![1], k: 0.1, tails: TailKind::Zero }).is_err());
        assert!(Cascade::new(CascadeConfig { base: base(2), m: vec![2], k: 0.1, tails: TailKind::Geometric }).is_err());
        let c = cascade(TailKind::Constant, 0.1, vec![3, 2], 4);
        assert!(!c.warnings().is_empty());
    }

    #[test]
    fn respell_examples() {
        let c = cascade(TailKind::Zero, 0.0, vec![2, 3, 2], 2);
        let mut r = RngStream::new(1, 0).rng();
        let a = c.sample_letter(&BernoulliVector::uniform(2), 3, &mut r);
        assert_eq!(respell(&c, &a, 3).unwrap(), vec![a.clone()]);
        let zero = respell(&c, &a, 0).unwrap();
        assert_eq!(zero.len(), 12);
        assert!(zero.iter().zip(&a.digits).all(|(l, d)| l.digits == vec![*d]));
        assert!(respell(&c, &zero[0], 1).is_err());
    }

    #[test]
    fn respell_composition() {
        let c = cascade(TailKind::Zero, 0.0, vec![2, 3, 2], 2);
        let mut r = RngStream::new(2, 0).rng();
        for _ in 0..50 {
            let a = c.sample_letter(&BernoulliVector::uniform(2), 3, &mut r);
            for k in 0..=3 {
                for j in 0..=k {
                    let via: Vec<LetterPath> = respell(&c, &a, k).unwrap().iter().flat_map(|l| respell(&c, l, j).unwrap()).collect();
                    assert_eq!(via, respell(&c, &a, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn lift_examples() {
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        let c = cascade(TailKind::Zero, 0.0, vec![3, 2], 2);
        let l0 = lift_bernoulli(&p, 0);
        assert_eq!(l0.prob(&LetterPath { level: 0, digits: vec![1] }), 0.7);
        let l2 = lift_bernoulli(&p, 2);
        assert!((l2.prob(&c.letter(2, vec![0; 6]).unwrap()) - 0.3f64.powi(6)).abs() < 1e-18);
        let c = cascade(TailKind::Zero, 0.0, vec![12], 2);
        let l1 = lift_bernoulli(&p, 1);
        let total: f64 = (0..1usize << 12)
            .map(|x| l1.prob(&c.letter(1, (0..12).map(|i| (x >> i) & 1).collect()).unwrap()))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_tails_roof() {
        let c = cascade(TailKind::Zero, 0.0, vec![2, 3, 2], 5);
        let a = c.letter(3, vec![1; 12]).unwrap();
        assert_eq!(c.roof_len(3, &a.digits).unwrap(), 60);
        assert_eq!(c.image(&a).unwrap().len(), 60);
    }

    #[test]
    fn constant_tail_lengths() {
        let c = cascade(TailKind::Constant, 0.1, vec![2, 3, 2], 64);
        // ℓ₁ = ⌊0.1/2·2·64⌋ = 6, L₁ = 134; ℓ₂ = ⌊0.1/4·3·134⌋ = 10, L₂ = 412
        assert_eq!(c.constant_tail_len(1), 6);
        assert_eq!(c.constant_roof(1), 134);
        assert_eq!(c.constant_tail_len(2), 10);
        assert_eq!(c.constant_roof(2), 412);
        let a = c.letter(2, vec![0, 1, 1, 0, 1, 0]).unwrap();
        assert_eq!(c.image(&a).unwrap().len(), 412);
    }

    #[test]
    fn digit_weighted_expectation_matches_enumeration() {
        let c = cascade(TailKind::DigitWeighted { symbol: 0 }, 0.1, vec![2, 3], 32);
        let p = BernoulliVector::new(vec![0.35, 0.65]).unwrap();
        let l2 = lift_bernoulli(&p, 2);
        let mut e = 0.0;
        for x in 0..1usize << 6 {
            let d: Vec<usize> = (0..6).map(|i| (x >> i) & 1).collect();
            e += l2.prob(&LetterPath { level: 2, digits: d.clone() }) * c.roof_len(2, &d).unwrap() as f64;
        }
        let exact = c.expected_roof_exact(2, &p).unwrap();
        assert!((e - exact).abs() < 1e-9 * exact, "{e} vs {exact}");
    }

    #[test]
    fn synthetic_tail_content_is_keyed() {
        let c = cascade(TailKind::Constant, 0.2, vec![2, 2], 32);
        let t1 = c.tail(1, &[0, 1]).unwrap();
        let t2 = c.tail(1, &[0, 1]).unwrap();
        let t3 = c.tail(1, &[1, 1]).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), t3.len());
        assert_ne!(t1, t3);
    }

    #[test]
    fn budget_is_exact() {
        let c = cascade(TailKind::Zero, 0.1, vec![2], 10);
        // 0.1 · 2⁻¹ · 20 = 1
        assert!(c.check_budget(1, 1, 20).is_ok());
        assert!(matches!(c.check_budget(1, 2, 20), Err(Error::TailBudget { .. })));
    }

    proptest! {
        #[test]
        fn roof_bound_dominates(x in any::<u64>(), k in 0.0f64..0.5) {
            let c = cascade(TailKind::DigitWeighted { symbol: 1 }, k, vec![2, 3, 2], 16);
            let d: Vec<usize> = (0..12).map(|i| ((x >> i) & 1) as usize).collect();
            let r = c.roof_len(3, &d).unwrap();
            prop_assert!(r <= c.max_roof_bound(3));
            prop_assert!(r >= 12 * 16);
        }
    }
}
