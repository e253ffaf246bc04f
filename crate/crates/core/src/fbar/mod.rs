//! Edit distance f̄ₙ and its lifts to sequences and measures.
//!
//! The edit distance counts a longest common *subsequence* (indices need not
//! be contiguous): `f̄ₙ(a, b) = 1 − LCS(a, b)/n`.

pub mod lcs;
pub mod transport;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::symdyn::{BernoulliVector, Word};

pub use lcs::{lcs_len, lcs_len_naive, PatternMasks};

pub const DEFAULT_COST_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbarEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub n: usize,
    pub samples: usize,
    pub std_error: f64,
}

/// `1 − LCS/n` for equal-length words over the same alphabet.
pub fn edit_distance_n(a: &Word, b: &Word) -> Result<f64> {
    if a.alphabet() != b.alphabet() {
        return Err(Error::AlphabetMismatch("edit distance".into()));
    }
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "edit distance needs equal positive lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(edit_distance_slices(a.symbols(), b.symbols()))
}

pub fn edit_distance_slices(a: &[usize], b: &[usize]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    1.0 - lcs_len(a, b) as f64 / n as f64
}

/// Default geometric window schedule 2^4, …, 2^16.
pub fn default_schedule() -> Vec<usize> {
    (4..=16).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceFbar {
    pub estimate: FbarEstimate,
    /// `(window, edit distance)` for every window that fit both streams.
    pub trace: Vec<(usize, f64)>,
}

/// Limsup proxy: edit distances of leading windows along `schedule`, summarized by
/// the maximum over the upper half of the windows that fit.
pub fn fbar_sequences(a: &[usize], b: &[usize], schedule: &[usize]) -> Result<SequenceFbar> {
    let mut sched: Vec<usize> = schedule.iter().copied().filter(|&n| n > 0).collect();
    sched.sort_unstable();
    let avail = a.len().min(b.len());
    let Some(&smallest) = sched.first() else {
        return Err(Error::InvalidArgument("empty window schedule".into()));
    };
    if avail < smallest {
        return Err(Error::InsufficientData(format!("streams of length {avail} < window {smallest}")));
    }
    let trace: Vec<(usize, f64)> = sched
        .iter()
        .filter(|&&n| n <= avail)
        .map(|&n| (n, edit_distance_slices(&a[..n], &b[..n])))
        .collect();
    let tail = &trace[trace.len() / 2..];
    let value = tail.iter().map(|t| t.1).fold(0.0, f64::max);
    let n = trace.last().map_or(0, |t| t.0);
    Ok(SequenceFbar {
        estimate: FbarEstimate { value, kind: EstimateKind::UpperBound, n, samples: 0, std_error: 0.0 },
        trace,
    })
}

pub type BlockDistribution = BTreeMap<Vec<usize>, f64>;

#[derive(Debug, Clone)]
pub struct JoiningProblem {
    pub left: BlockDistribution,
    pub right: BlockDistribution,
    pub n: usize,
}

impl JoiningProblem {
    pub fn new(left: BlockDistribution, right: BlockDistribution) -> Result<Self> {
        let n = left
            .keys()
            .chain(right.keys())
            .map(|w| w.len())
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty distributions".into()))?;
        if n == 0 {
            return Err(Error::InvalidArgument("block length 0".into()));
        }
        for (name, d) in [("left", &left), ("right", &right)] {
            if d.keys().any(|w| w.len() != n) {
                return Err(Error::InvalidArgument(format!("{name}: support words of mixed length")));
            }
            if d.values().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("{name}: negative mass")));
            }
            let s: f64 = d.values().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("{name}: mass {s} != 1")));
            }
        }
        Ok(JoiningProblem { left, right, n })
    }
}

/// Exact `inf` over joinings of the expected edit distance, by transportation simplex.
pub fn fbar_measures_exact(problem: &JoiningProblem, cap: usize) -> Result<FbarEstimate> {
    let left: Vec<(&Vec<usize>, f64)> = problem.left.iter().filter(|(_, p)| **p > 0.0).map(|(w, p)| (w, *p)).collect();
    let right: Vec<(&Vec<usize>, f64)> = problem.right.iter().filter(|(_, p)| **p > 0.0).map(|(w, p)| (w, *p)).collect();
    let cells = left.len() * right.len();
    if cells > cap {
        return Err(Error::UseMonteCarlo { cells, cap });
    }
    let n = problem.n;
    let cost: Vec<f64> = left
        .par_iter()
        .flat_map_iter(|(a, _)| {
            let pm = PatternMasks::new(a);
            right.iter().map(move |(b, _)| 1.0 - pm.lcs(b) as f64 / n as f64).collect::<Vec<_>>()
        })
        .collect();
    let supply: Vec<f64> = left.iter().map(|x| x.1).collect();
    let demand: Vec<f64> = right.iter().map(|x| x.1).collect();
    let sol = transport::solve(&supply, &demand, &cost)?;
    Ok(FbarEstimate { value: sol.value.clamp(0.0, 1.0), kind: EstimateKind::Exact, n, samples: 0, std_error: 0.0 })
}

/// Exact n-block marginal of a Bernoulli measure.
pub fn bernoulli_block_law(p: &BernoulliVector, n: usize) -> BlockDistribution {
    let k = p.alphabet().size;
    let mut out = BTreeMap::new();
    let mut word = vec![0usize; n];
    loop {
        let pr: f64 = word.iter().map(|&a| p.prob(a)).product();
        if pr > 0.0 {
            out.insert(word.clone(), pr);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            word[i] += 1;
            if word[i] < k {
                break;
            }
            word[i] = 0;
        }
    }
}

/// Draws of a pair of n-words under an explicit joining.
pub trait JointSampler: Sync {
    fn sample_pair(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>);
}

/// Draws of single n-words.
pub trait BlockSampler: Sync {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize>;
}

impl BlockSampler for BernoulliVector {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..n).map(|_| self.sample_letter(rng)).collect()
    }
}

/// Product joining of two samplers.
pub struct Independent<'a, A: BlockSampler, B: BlockSampler>(pub &'a A, pub &'a B);

impl<A: BlockSampler, B: BlockSampler> JointSampler for Independent<'_, A, B> {
    fn sample_pair(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        (self.0.sample(n, rng), self.1.sample(n, rng))
    }
}

/// Coordinatewise quantile coupling of two Bernoulli measures.
pub struct MonotoneBernoulli<'a>(pub &'a BernoulliVector, pub &'a BernoulliVector);

impl JointSampler for MonotoneBernoulli<'_> {
    fn sample_pair(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            a.push(self.0.quantile(u));
            b.push(self.1.quantile(u));
        }
        (a, b)
    }
}

/// Mean edit distance under an explicit joining: an upper bound for f̄ₙ.
pub fn fbar_coupling_upper(joint: &impl JointSampler, n: usize, trials: usize, rng: RngStream) -> Result<FbarEstimate> {
    if trials == 0 || n == 0 {
        return Err(Error::InvalidArgument("trials and n must be >= 1".into()));
    }
    let d: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.split(t as u64).rng();
            let (a, b) = joint.sample_pair(n, &mut r);
            edit_distance_slices(&a, &b)
        })
        .collect();
    let (mean, se) = mean_se(&d);
    Ok(FbarEstimate { value: mean, kind: EstimateKind::UpperBound, n, samples: trials, std_error: se })
}

pub(crate) fn mean_se(x: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mean = x.iter().sum::<f64>() / k;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// f̄ between Bernoulli measures: half the city metric.
pub fn bernoulli_fbar(p: &BernoulliVector, q: &BernoulliVector) -> Result<f64> {
    Ok(0.5 * p.city(q)?)
}

pub const FORMULA_ENTROPY_DRIFT: &str = "entropy-drift";

/// Entropy change bound for measures at f̄-distance below `eps` (natural log).
pub fn entropy_drift_bound(eps: f64, alphabet_size: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} outside (0,1)")));
    }
    let h = -eps * eps.ln() - (1.0 - eps) * (1.0 - eps).ln();
    Ok(2.0 * h + eps * (alphabet_size as f64).ln())
}

/// Fraction of independently drawn word pairs closer than `eps`. Heuristic only.
pub fn lb_diagnostic(sampler: &impl BlockSampler, n: usize, eps: f64, trials: usize, rng: RngStream) -> Result<f64> {
    if trials < 2 {
        return Err(Error::InvalidArgument("lb_diagnostic needs >= 2 trials".into()));
    }
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.split(t as u64).rng();
            let a = sampler.sample(n, &mut r);
            let b = sampler.sample(n, &mut r);
            usize::from(edit_distance_slices(&a, &b) < eps)
        })
        .sum();
    Ok(hits as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symdyn::Alphabet;
    use proptest::prelude::*;

    fn w(s: &[usize]) -> Word {
        Word::new(Alphabet { size: 2 }, s.to_vec()).unwrap()
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance_n(&w(&[0, 1, 0]), &w(&[0, 1, 0])).unwrap(), 0.0);
        assert_eq!(edit_distance_n(&w(&[0, 1]), &w(&[1, 0])).unwrap(), 0.5);
        assert_eq!(edit_distance_n(&w(&[0, 0, 0, 0]), &w(&[1, 1, 1, 1])).unwrap(), 1.0);
        assert!(edit_distance_n(&w(&[0]), &w(&[0, 1])).is_err());
        let other = Word::new(Alphabet { size: 3 }, vec![0]).unwrap();
        assert!(edit_distance_n(&w(&[0]), &other).is_err());
    }

    #[test]
    fn pseudometric_exhaustive_n_le_5() {
        for n in 1..=5usize {
            let words: Vec<Vec<usize>> = (0..1usize << n).map(|x| (0..n).map(|i| (x >> i) & 1).collect()).collect();
            let d: Vec<Vec<f64>> = words.iter().map(|a| words.iter().map(|b| edit_distance_slices(a, b)).collect()).collect();
            for i in 0..words.len() {
                assert_eq!(d[i][i], 0.0);
                for j in 0..words.len() {
                    assert_eq!(d[i][j], d[j][i]);
                    for k in 0..words.len() {
                        assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sequences_examples() {
        let a: Vec<usize> = (0..1 << 12).map(|i| i % 2).collect();
        let b: Vec<usize> = (0..1 << 12).map(|i| (i + 1) % 2).collect();
        let s = fbar_sequences(&a, &a, &default_schedule()).unwrap();
        assert!(s.trace.iter().all(|t| t.1 == 0.0));
        let s = fbar_sequences(&a, &b, &default_schedule()).unwrap();
        for &(n, v) in &s.trace {
            assert!((v - 1.0 / n as f64).abs() < 1e-12);
        }
        assert!(s.estimate.value <= 1.0 / 256.0);
        let c = vec![0usize; 64];
        let d = vec![1usize; 64];
        let s = fbar_sequences(&c, &d, &default_schedule()).unwrap();
        assert!(s.trace.iter().all(|t| t.1 == 1.0));
        assert!(fbar_sequences(&c[..8], &d[..8], &default_schedule()).is_err());
    }

    #[test]
    fn exact_examples() {
        let p = BernoulliVector::uniform(2);
        let q = BernoulliVector::new(vec![0.75, 0.25]).unwrap();
        let same = JoiningProblem::new(bernoulli_block_law(&p, 3), bernoulli_block_law(&p, 3)).unwrap();
        assert!(fbar_measures_exact(&same, DEFAULT_COST_CAP).unwrap().value.abs() < 1e-12);
        let d0 = JoiningProblem::new(BTreeMap::from([(vec![0], 1.0)]), BTreeMap::from([(vec![1], 1.0)])).unwrap();
        assert_eq!(fbar_measures_exact(&d0, DEFAULT_COST_CAP).unwrap().value, 1.0);
        let one = JoiningProblem::new(bernoulli_block_law(&p, 1), bernoulli_block_law(&q, 1)).unwrap();
        let e = fbar_measures_exact(&one, DEFAULT_COST_CAP).unwrap();
        assert!((e.value - 0.25).abs() < 1e-12);
        assert_eq!(e.kind, EstimateKind::Exact);
        let big = JoiningProblem::new(bernoulli_block_law(&p, 6), bernoulli_block_law(&q, 6)).unwrap();
        assert!(matches!(fbar_measures_exact(&big, 100), Err(Error::UseMonteCarlo { .. })));
    }

    #[test]
    fn exact_below_coupling() {
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        let q = BernoulliVector::new(vec![0.6, 0.4]).unwrap();
        for n in [2usize, 4, 6] {
            let prob = JoiningProblem::new(bernoulli_block_law(&p, n), bernoulli_block_law(&q, n)).unwrap();
            let ex = fbar_measures_exact(&prob, DEFAULT_COST_CAP).unwrap();
            for (i, up) in [
                fbar_coupling_upper(&MonotoneBernoulli(&p, &q), n, 2000, RngStream::new(9, n as u64)).unwrap(),
                fbar_coupling_upper(&Independent(&p, &q), n, 2000, RngStream::new(10, n as u64)).unwrap(),
            ]
            .into_iter()
            .enumerate()
            {
                assert!(ex.value <= up.value + 3.0 * up.std_error, "n={n} coupling {i}: {} > {}", ex.value, up.value);
            }
        }
    }

    #[test]
    fn coupling_examples() {
        let p = BernoulliVector::uniform(2);
        let q = BernoulliVector::new(vec![0.75, 0.25]).unwrap();
        let e = fbar_coupling_upper(&MonotoneBernoulli(&p, &q), 512, 1000, RngStream::new(1, 0)).unwrap();
        assert!(e.value + 3.0 * e.std_error >= 0.25 && e.value <= 0.33, "{e:?}");
        let d0 = BernoulliVector::dirac(2, 0);
        let d1 = BernoulliVector::dirac(2, 1);
        let e = fbar_coupling_upper(&Independent(&d0, &d1), 17, 10, RngStream::new(1, 0)).unwrap();
        assert_eq!(e.value, 1.0);
        let e = fbar_coupling_upper(&MonotoneBernoulli(&d0, &d0), 17, 10, RngStream::new(1, 0)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn closed_forms() {
        let p = BernoulliVector::uniform(2);
        let q = BernoulliVector::new(vec![0.75, 0.25]).unwrap();
        assert_eq!(bernoulli_fbar(&p, &p).unwrap(), 0.0);
        assert_eq!(bernoulli_fbar(&BernoulliVector::dirac(2, 0), &BernoulliVector::dirac(2, 1)).unwrap(), 1.0);
        assert!((bernoulli_fbar(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        let ln2 = 2f64.ln();
        assert!((entropy_drift_bound(0.5, 2).unwrap() - 2.5 * ln2).abs() < 1e-12);
        let e = entropy_drift_bound(0.1, 4).unwrap();
        let want = 2.0 * (-0.1 * 0.1f64.ln() - 0.9 * 0.9f64.ln()) + 0.1 * 4f64.ln();
        assert!((e - want).abs() < 1e-12 && (e - 0.78878).abs() < 1e-4);
        assert!(entropy_drift_bound(0.0, 2).is_err());
        assert!(entropy_drift_bound(1.0, 2).is_err());
        let mut prev = 0.0;
        for k in 1..=50 {
            let v = entropy_drift_bound(k as f64 / 100.0, 3).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(entropy_drift_bound(1e-12, 3).unwrap() < 1e-9);
    }

    #[test]
    fn lb_examples() {
        let d0 = BernoulliVector::dirac(2, 0);
        assert_eq!(lb_diagnostic(&d0, 50, 1e-6, 20, RngStream::new(3, 0)).unwrap(), 1.0);
        let fair = BernoulliVector::uniform(2);
        // at n = 10 only equal words are closer than 0.01: probability 2^-10
        let words: Vec<Vec<usize>> = (0..1usize << 10).map(|x| (0..10).map(|i| (x >> i) & 1).collect()).collect();
        let close = words.iter().flat_map(|a| words.iter().map(move |b| edit_distance_slices(a, b))).filter(|d| *d < 0.01).count();
        assert_eq!(close, 1 << 10);
        let f = lb_diagnostic(&fair, 100, 0.01, 200, RngStream::new(3, 1)).unwrap();
        assert!(f < 0.02, "{f}");
        assert!(lb_diagnostic(&fair, 10, 0.5, 1, RngStream::new(3, 1)).is_err());
    }

    proptest! {
        #[test]
        fn coupled_distance_bounded_by_hamming(seed in any::<u64>(), n in 1usize..80) {
            let p = BernoulliVector::new(vec![0.2, 0.5, 0.3]).unwrap();
            let q = BernoulliVector::new(vec![0.4, 0.4, 0.2]).unwrap();
            let mut r = RngStream::new(seed, 0).rng();
            let (a, b) = MonotoneBernoulli(&p, &q).sample_pair(n, &mut r);
            let ham = a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64 / n as f64;
            prop_assert!(edit_distance_slices(&a, &b) <= ham + 1e-12);
        }
    }
}
