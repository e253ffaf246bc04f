//! Substitution maps and Bernoulli-coded measures.
//!
//! The shift-invariant coded measure of `(ϱ, 𝔭)` is realized as the stationary
//! renewal process: the letter covering coordinate 0 is drawn length-biased,
//! `∝ |ϱ(a)| p_a`, at a uniform phase inside its image; every other letter is
//! i.i.d. `𝔭`. For equal image lengths this is the plain phase average.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbar::{BlockSampler, JointSampler};
use crate::rng::RngStream;
use crate::symdyn::{Alphabet, BernoulliVector, CylinderSpec, Word};

pub const DEFAULT_DEPTH_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubstitutionJson", into = "SubstitutionJson")]
pub struct SubstitutionMap {
    source: Alphabet,
    target: Alphabet,
    images: Vec<Vec<usize>>,
    min_len: usize,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct SubstitutionJson {
    source_size: usize,
    target_size: usize,
    images: Vec<Vec<usize>>,
}

impl TryFrom<SubstitutionJson> for SubstitutionMap {
    type Error = Error;
    fn try_from(j: SubstitutionJson) -> Result<Self> {
        if j.images.len() != j.source_size {
            return Err(Error::InvalidArgument("images count != source_size".into()));
        }
        SubstitutionMap::new(Alphabet::new(j.target_size)?, j.images)
    }
}

impl From<SubstitutionMap> for SubstitutionJson {
    fn from(s: SubstitutionMap) -> Self {
        SubstitutionJson { source_size: s.source.size, target_size: s.target.size, images: s.images }
    }
}

impl SubstitutionMap {
    pub fn new(target: Alphabet, images: Vec<Vec<usize>>) -> Result<Self> {
        let source = Alphabet::new(images.len())?;
        for (a, img) in images.iter().enumerate() {
            if img.is_empty() {
                return Err(Error::InvalidArgument(format!("empty image for letter {a}")));
            }
            if img.iter().any(|&s| s >= target.size) {
                return Err(Error::AlphabetMismatch(format!("image of {a} leaves the target alphabet")));
            }
        }
        let min_len = images.iter().map(Vec::len).min().unwrap();
        let max_len = images.iter().map(Vec::len).max().unwrap();
        Ok(SubstitutionMap { source, target, images, min_len, max_len })
    }

    pub fn identity(size: usize) -> Self {
        Self::new(Alphabet { size }, (0..size).map(|a| vec![a]).collect()).expect("identity")
    }

    pub fn source(&self) -> Alphabet {
        self.source
    }

    pub fn target(&self) -> Alphabet {
        self.target
    }

    pub fn image(&self, a: usize) -> &[usize] {
        &self.images[a]
    }

    pub fn images(&self) -> &[Vec<usize>] {
        &self.images
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.images.iter().map(Vec::len).collect()
    }

    /// Expected image length under `p`.
    pub fn mean_len(&self, p: &BernoulliVector) -> f64 {
        self.images.iter().zip(p.probs()).map(|(img, q)| img.len() as f64 * q).sum()
    }
}

pub fn apply_substitution(rho: &SubstitutionMap, w: &Word) -> Result<Word> {
    if w.alphabet() != rho.source {
        return Err(Error::AlphabetMismatch("word vs substitution source".into()));
    }
    let out = w.symbols().iter().flat_map(|&a| rho.images[a].iter().copied()).collect();
    Word::new(rho.target, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodedVariant {
    Plain,
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedMeasureSpec {
    pub substitution: SubstitutionMap,
    pub base: BernoulliVector,
    pub variant: CodedVariant,
}

impl CodedMeasureSpec {
    pub fn new(substitution: SubstitutionMap, base: BernoulliVector, variant: CodedVariant) -> Result<Self> {
        if base.alphabet() != substitution.source {
            return Err(Error::AlphabetMismatch("base vector vs substitution source".into()));
        }
        Ok(CodedMeasureSpec { substitution, base, variant })
    }
}

/// Probability that the plain coded stream starts with `t`.
fn plain_prefix_prob(rho: &SubstitutionMap, p: &BernoulliVector, t: &[usize], memo: &mut HashMap<usize, f64>) -> f64 {
    fn go(rho: &SubstitutionMap, p: &BernoulliVector, t: &[usize], off: usize, memo: &mut HashMap<usize, f64>) -> f64 {
        if off >= t.len() {
            return 1.0;
        }
        if let Some(&v) = memo.get(&off) {
            return v;
        }
        let rest = &t[off..];
        let mut total = 0.0;
        for (a, img) in rho.images.iter().enumerate() {
            let pa = p.prob(a);
            if pa == 0.0 {
                continue;
            }
            if img.len() >= rest.len() {
                if img[..rest.len()] == *rest {
                    total += pa;
                }
            } else if rest[..img.len()] == **img {
                total += pa * go(rho, p, t, off + img.len(), memo);
            }
        }
        memo.insert(off, total);
        total
    }
    go(rho, p, t, 0, memo)
}

/// Exact cylinder probability at coordinate 0.
pub fn kappa_cylinder(spec: &CodedMeasureSpec, c: &CylinderSpec, depth_cap: usize) -> Result<f64> {
    if c.word.alphabet() != spec.substitution.target {
        return Err(Error::AlphabetMismatch("cylinder vs target alphabet".into()));
    }
    let t = c.word.symbols();
    if t.len() > depth_cap {
        return Err(Error::UseSampler { len: t.len(), cap: depth_cap });
    }
    let rho = &spec.substitution;
    let p = &spec.base;
    match spec.variant {
        CodedVariant::Plain => Ok(plain_prefix_prob(rho, p, t, &mut HashMap::new())),
        CodedVariant::Invariant => {
            let e = rho.mean_len(p);
            let mut total = 0.0;
            let mut memos: HashMap<usize, HashMap<usize, f64>> = HashMap::new();
            for (a, img) in rho.images.iter().enumerate() {
                let pa = p.prob(a);
                if pa == 0.0 {
                    continue;
                }
                for j in 0..img.len() {
                    let tail = &img[j..];
                    let k = tail.len().min(t.len());
                    if tail[..k] != t[..k] {
                        continue;
                    }
                    let rest = if k < t.len() {
                        let memo = memos.entry(k).or_default();
                        plain_prefix_prob(rho, p, &t[k..], memo)
                    } else {
                        1.0
                    };
                    total += pa * rest;
                }
            }
            Ok(total / e)
        }
    }
}

/// Length-biased letter draw by acceptance–rejection against `max_len`.
pub(crate) fn length_biased_letter(rho: &SubstitutionMap, p: &BernoulliVector, rng: &mut impl Rng) -> usize {
    loop {
        let a = p.sample_letter(rng);
        if rng.gen_range(0..rho.max_len) < rho.images[a].len() {
            return a;
        }
    }
}

fn coded_symbols(spec: &CodedMeasureSpec, length: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let rho = &spec.substitution;
    let mut out = Vec::with_capacity(length + rho.max_len);
    if spec.variant == CodedVariant::Invariant && length > 0 {
        let a = length_biased_letter(rho, &spec.base, rng);
        let s = rng.gen_range(0..rho.images[a].len());
        out.extend_from_slice(&rho.images[a][s..]);
    }
    while out.len() < length {
        let a = spec.base.sample_letter(rng);
        out.extend_from_slice(&rho.images[a]);
    }
    out.truncate(length);
    out
}

pub fn sample_coded(spec: &CodedMeasureSpec, length: usize, rng: RngStream) -> Result<Word> {
    if length == 0 {
        return Err(Error::InvalidArgument("length must be >= 1".into()));
    }
    Word::new(spec.substitution.target, coded_symbols(spec, length, &mut rng.rng()))
}

impl BlockSampler for CodedMeasureSpec {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        coded_symbols(self, n, rng)
    }
}

/// Joins the plain and invariant coded streams of one spec by sharing letters:
/// the invariant stream is the plain one preceded by a partial first image.
pub struct PhaseShiftCoupling<'a>(pub &'a SubstitutionMap, pub &'a BernoulliVector);

impl JointSampler for PhaseShiftCoupling<'_> {
    fn sample_pair(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        let rho = self.0;
        let a0 = length_biased_letter(rho, self.1, rng);
        let s = rng.gen_range(0..rho.images[a0].len());
        let mut inv: Vec<usize> = rho.images[a0][s..].to_vec();
        let mut plain = Vec::with_capacity(n + rho.max_len);
        while plain.len() < n || inv.len() < n {
            let a = self.1.sample_letter(rng);
            plain.extend_from_slice(&rho.images[a]);
            inv.extend_from_slice(&rho.images[a]);
        }
        plain.truncate(n);
        inv.truncate(n);
        (plain, inv)
    }
}

/// `p̃_a ∝ |ϱ(a)| p_a`.
pub fn tilde_vector(rho: &SubstitutionMap, p: &BernoulliVector) -> Result<BernoulliVector> {
    if p.alphabet() != rho.source {
        return Err(Error::AlphabetMismatch("vector vs substitution source".into()));
    }
    let w: Vec<f64> = rho.images.iter().zip(p.probs()).map(|(img, q)| img.len() as f64 * q).collect();
    BernoulliVector::from_weights(&w)
}

pub fn is_subsequence(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// `max_a (1 − |ϱ′(a)|/|ϱ(a)|)` when every `ϱ′(a)` is a subsequence of `ϱ(a)`.
pub fn substitution_perturbation_bound(rho: &SubstitutionMap, rho_prime: &SubstitutionMap) -> Result<f64> {
    if rho.source != rho_prime.source || rho.target != rho_prime.target {
        return Err(Error::AlphabetMismatch("substitutions over different alphabets".into()));
    }
    let mut c: f64 = 0.0;
    for a in 0..rho.source.size {
        if !is_subsequence(&rho_prime.images[a], &rho.images[a]) {
            return Err(Error::NotSubsequence(a));
        }
        c = c.max(1.0 - rho_prime.images[a].len() as f64 / rho.images[a].len() as f64);
    }
    Ok(c)
}

/// `½ (max_len/min_len) D(p, q)`.
pub fn vector_perturbation_bound(rho: &SubstitutionMap, p: &BernoulliVector, q: &BernoulliVector) -> Result<f64> {
    if p.alphabet() != rho.source || q.alphabet() != rho.source {
        return Err(Error::AlphabetMismatch("vectors vs substitution source".into()));
    }
    Ok(0.5 * rho.max_len as f64 / rho.min_len as f64 * p.city(q)?)
}

/// Regroups `r` consecutive source letters into one letter of `source^r`
/// (first letter most significant).
pub fn regroup_power(rho: &SubstitutionMap, p: &BernoulliVector, r: usize, cap: usize) -> Result<(SubstitutionMap, BernoulliVector)> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be >= 1".into()));
    }
    let k = rho.source.size;
    let size = (0..r).try_fold(1usize, |acc, _| acc.checked_mul(k)).filter(|s| *s <= cap);
    let Some(size) = size else {
        return Err(Error::InvalidArgument(format!("source^{r} exceeds cap {cap}")));
    };
    let mut images = Vec::with_capacity(size);
    let mut probs = Vec::with_capacity(size);
    for idx in 0..size {
        let mut digits = vec![0usize; r];
        let mut x = idx;
        for d in digits.iter_mut().rev() {
            *d = x % k;
            x /= k;
        }
        images.push(digits.iter().flat_map(|&a| rho.images[a].iter().copied()).collect());
        probs.push(digits.iter().map(|&a| p.prob(a)).product::<f64>());
    }
    Ok((SubstitutionMap::new(rho.target, images)?, BernoulliVector::from_weights(&probs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbar::{edit_distance_slices, fbar_coupling_upper, lcs_len};
    use crate::symdyn::block_distribution;
    use proptest::prelude::*;
    use rand::Rng;

    fn xy() -> SubstitutionMap {
        SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    fn cyl(size: usize, s: &[usize]) -> CylinderSpec {
        CylinderSpec::new(Word::new(Alphabet { size }, s.to_vec()).unwrap())
    }

    #[test]
    fn apply_examples() {
        let id = SubstitutionMap::identity(3);
        let w = Word::new(Alphabet { size: 3 }, vec![2, 0, 1]).unwrap();
        assert_eq!(apply_substitution(&id, &w).unwrap(), w);
        let w = Word::new(Alphabet { size: 2 }, vec![0, 1]).unwrap();
        assert_eq!(apply_substitution(&xy(), &w).unwrap().symbols(), &[0, 1, 1, 0]);
        let e = Word::empty(Alphabet { size: 2 });
        assert!(apply_substitution(&xy(), &e).unwrap().is_empty());
        assert!(SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![]]).is_err());
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&xy()).unwrap();
        assert_eq!(s, r#"{"source_size":2,"target_size":2,"images":[[0,1],[1,0]]}"#);
        let back: SubstitutionMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xy());
    }

    #[test]
    fn kappa_examples() {
        let h = BernoulliVector::uniform(2);
        let plain = CodedMeasureSpec::new(xy(), h.clone(), CodedVariant::Plain).unwrap();
        let inv = CodedMeasureSpec::new(xy(), h.clone(), CodedVariant::Invariant).unwrap();
        assert_eq!(kappa_cylinder(&plain, &cyl(2, &[0]), 16).unwrap(), 0.5);
        assert_eq!(kappa_cylinder(&inv, &cyl(2, &[0]), 16).unwrap(), 0.5);
        let q = BernoulliVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let id = CodedMeasureSpec::new(SubstitutionMap::identity(3), q.clone(), CodedVariant::Invariant).unwrap();
        let c = cyl(3, &[2, 0, 1]);
        assert!((kappa_cylinder(&id, &c, 16).unwrap() - 0.5 * 0.2 * 0.3).abs() < 1e-15);
        assert!(matches!(kappa_cylinder(&plain, &cyl(2, &[0; 17]), 16), Err(Error::UseSampler { .. })));
    }

    #[test]
    fn invariant_cylinders_shift_invariant() {
        // unequal lengths: stationarity means P[w] = Σ_c P[wc]
        let rho = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0], vec![1, 1, 0]]).unwrap();
        let p = BernoulliVector::new(vec![0.4, 0.6]).unwrap();
        let spec = CodedMeasureSpec::new(rho, p, CodedVariant::Invariant).unwrap();
        for w in [vec![0usize], vec![1], vec![0, 1], vec![1, 1, 0]] {
            let pw = kappa_cylinder(&spec, &cyl(2, &w), 16).unwrap();
            let mut left = 0.0;
            let mut right = 0.0;
            for c in 0..2 {
                let mut cw = vec![c];
                cw.extend(&w);
                let mut wc = w.clone();
                wc.push(c);
                left += kappa_cylinder(&spec, &cyl(2, &cw), 16).unwrap();
                right += kappa_cylinder(&spec, &cyl(2, &wc), 16).unwrap();
            }
            assert!((pw - left).abs() < 1e-12 && (pw - right).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn sample_examples() {
        let h = BernoulliVector::uniform(2);
        let inv = CodedMeasureSpec::new(xy(), h.clone(), CodedVariant::Invariant).unwrap();
        let w = sample_coded(&inv, 100_000, RngStream::new(2, 0)).unwrap();
        let f = w.symbols().iter().filter(|&&s| s == 0).count() as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.01);
        let d = BernoulliVector::dirac(2, 0);
        let per = CodedMeasureSpec::new(xy(), d, CodedVariant::Invariant).unwrap();
        let w = sample_coded(&per, 50, RngStream::new(2, 1)).unwrap();
        let s = w.symbols();
        assert!(s.windows(2).all(|x| x[0] != x[1]));
        let id = CodedMeasureSpec::new(SubstitutionMap::identity(2), h, CodedVariant::Plain).unwrap();
        assert_eq!(sample_coded(&id, 7, RngStream::new(2, 2)).unwrap().len(), 7);
        assert!(sample_coded(&id, 0, RngStream::new(2, 2)).is_err());
    }

    #[test]
    fn sampler_matches_cylinders() {
        let specs = [
            SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0], vec![1, 1, 0]]).unwrap(),
            SubstitutionMap::new(Alphabet { size: 3 }, vec![vec![0, 2], vec![1], vec![2, 2, 1]]).unwrap(),
        ];
        let bases = [BernoulliVector::new(vec![0.4, 0.6]).unwrap(), BernoulliVector::new(vec![0.5, 0.2, 0.3]).unwrap()];
        for (si, (rho, p)) in specs.iter().zip(&bases).enumerate() {
            for variant in [CodedVariant::Plain, CodedVariant::Invariant] {
                let spec = CodedMeasureSpec::new(rho.clone(), p.clone(), variant).unwrap();
                let trials = 40_000;
                let depth = 3;
                let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
                let mut r = RngStream::new(77, si as u64).rng();
                for _ in 0..trials {
                    *counts.entry(coded_symbols(&spec, depth, &mut r)).or_default() += 1;
                }
                for (w, c) in counts {
                    let f = c as f64 / trials as f64;
                    let exact = kappa_cylinder(&spec, &cyl(rho.target().size, &w), 16).unwrap();
                    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
                    assert!((f - exact).abs() <= 4.0 * se + 1e-12, "{variant:?} {w:?}: {f} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn plain_and_invariant_streams_close() {
        let rho = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0], vec![1, 1, 0]]).unwrap();
        let p = BernoulliVector::new(vec![0.4, 0.6]).unwrap();
        let e = fbar_coupling_upper(&PhaseShiftCoupling(&rho, &p), 1 << 14, 50, RngStream::new(4, 0)).unwrap();
        assert!(e.value < 0.05, "{e:?}");
    }

    #[test]
    fn tilde_examples() {
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(tilde_vector(&xy(), &p).unwrap().probs(), p.probs());
        let r13 = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0], vec![1, 1, 1]]).unwrap();
        let t = tilde_vector(&r13, &BernoulliVector::uniform(2)).unwrap();
        assert!((t.prob(0) - 0.25).abs() < 1e-15 && (t.prob(1) - 0.75).abs() < 1e-15);
        assert_eq!(tilde_vector(&r13, &BernoulliVector::dirac(2, 0)).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn perturbation_examples() {
        assert_eq!(substitution_perturbation_bound(&xy(), &xy()).unwrap(), 0.0);
        let long = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0; 10], vec![1; 10]]).unwrap();
        let short = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0; 9], vec![1; 9]]).unwrap();
        assert!((substitution_perturbation_bound(&long, &short).unwrap() - 0.1).abs() < 1e-15);
        let bad = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![1], vec![1; 9]]).unwrap();
        assert_eq!(substitution_perturbation_bound(&long, &bad), Err(Error::NotSubsequence(0)));

        let p = BernoulliVector::uniform(2);
        assert_eq!(vector_perturbation_bound(&xy(), &p, &p).unwrap(), 0.0);
        let d0 = BernoulliVector::dirac(2, 0);
        let d1 = BernoulliVector::dirac(2, 1);
        assert_eq!(vector_perturbation_bound(&xy(), &d0, &d1).unwrap(), 1.0);
        let r24 = SubstitutionMap::new(Alphabet { size: 2 }, vec![vec![0, 0], vec![1, 1, 1, 1]]).unwrap();
        let q = BernoulliVector::new(vec![0.6, 0.4]).unwrap();
        assert!((vector_perturbation_bound(&r24, &p, &q).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn regroup_examples() {
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        let (r1, p1) = regroup_power(&xy(), &p, 1, 1 << 20).unwrap();
        assert_eq!(r1, xy());
        assert_eq!(p1.probs(), p.probs());
        let (r2, p2) = regroup_power(&xy(), &p, 2, 1 << 20).unwrap();
        assert_eq!(r2.source().size, 4);
        assert_eq!(r2.image(1), &[0, 1, 1, 0]);
        assert!((p2.prob(1) - 0.21).abs() < 1e-15);
        let id = SubstitutionMap::identity(2);
        let h = BernoulliVector::uniform(2);
        let (ri, pi) = regroup_power(&id, &h, 2, 16).unwrap();
        let c = cyl(2, &[0, 1]);
        let a = kappa_cylinder(&CodedMeasureSpec::new(id, h, CodedVariant::Plain).unwrap(), &c, 16).unwrap();
        let b = kappa_cylinder(&CodedMeasureSpec::new(ri, pi, CodedVariant::Plain).unwrap(), &c, 16).unwrap();
        assert_eq!(a, 0.25);
        assert_eq!(b, 0.25);
        assert!(regroup_power(&xy(), &p, 30, 1 << 20).is_err());
    }

    fn arb_subst() -> impl Strategy<Value = (SubstitutionMap, Vec<f64>)> {
        (2usize..4, 2usize..4).prop_flat_map(|(k, t)| {
            (
                prop::collection::vec(prop::collection::vec(0..t, 1..4), k),
                prop::collection::vec(0.05f64..1.0, k),
                Just(t),
            )
                .prop_map(|(imgs, w, t)| (SubstitutionMap::new(Alphabet { size: t }, imgs).unwrap(), w))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn regroup_preserves_cylinders((rho, w) in arb_subst(), word in prop::collection::vec(0usize..4, 1..5)) {
            let t = rho.target().size;
            prop_assume!(word.iter().all(|&s| s < t));
            let p = BernoulliVector::from_weights(&w).unwrap();
            let (r2, p2) = regroup_power(&rho, &p, 2, 1 << 12).unwrap();
            let c = cyl(t, &word);
            let a = kappa_cylinder(&CodedMeasureSpec::new(rho, p, CodedVariant::Plain).unwrap(), &c, 16).unwrap();
            let b = kappa_cylinder(&CodedMeasureSpec::new(r2, p2, CodedVariant::Plain).unwrap(), &c, 16).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn lipschitz_transport((rho, _w) in arb_subst(), seed in any::<u64>(), n in 4usize..60) {
            let k = rho.source().size;
            let mut r = RngStream::new(seed, 0).rng();
            let a: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
            let mut b = a.clone();
            for _ in 0..r.gen_range(0..n) {
                let i = r.gen_range(0..n);
                b[i] = r.gen_range(0..k);
            }
            let ia: Vec<usize> = a.iter().flat_map(|&x| rho.image(x).to_vec()).collect();
            let ib: Vec<usize> = b.iter().flat_map(|&x| rho.image(x).to_vec()).collect();
            let d_img = 1.0 - lcs_len(&ia, &ib) as f64 / ia.len().max(ib.len()) as f64;
            let ratio = rho.max_len() as f64 / rho.min_len() as f64;
            prop_assert!(d_img <= ratio * edit_distance_slices(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn block_distribution_of_identity_stream() {
        let h = BernoulliVector::uniform(2);
        let spec = CodedMeasureSpec::new(SubstitutionMap::identity(2), h, CodedVariant::Invariant).unwrap();
        let w = sample_coded(&spec, 20_000, RngStream::new(5, 0)).unwrap();
        let d = block_distribution(&w, 2).unwrap();
        for v in d.values() {
            assert!((v - 0.25).abs() < 0.02);
        }
    }
}
