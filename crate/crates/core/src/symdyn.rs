//! Alphabets, words, cylinders, Bernoulli vectors and empirical block statistics.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alphabet {
    pub size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("alphabet size must be >= 1".into()));
        }
        Ok(Alphabet { size })
    }
}

/// A finite word. Serializes as a plain JSON integer array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    alphabet: Alphabet,
    symbols: Vec<usize>,
}

impl Word {
    pub fn new(alphabet: Alphabet, symbols: Vec<usize>) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s >= alphabet.size) {
            return Err(Error::AlphabetMismatch(format!(
                "symbol {s} outside alphabet of size {}",
                alphabet.size
            )));
        }
        Ok(Word { alphabet, symbols })
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        Word { alphabet, symbols: Vec::new() }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<usize> {
        self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch("concatenation".into()));
        }
        let mut s = self.symbols.clone();
        s.extend_from_slice(&other.symbols);
        Ok(Word { alphabet: self.alphabet, symbols: s })
    }

    pub fn from_json(text: &str, alphabet: Alphabet) -> Result<Word> {
        let symbols: Vec<usize> = serde_json::from_str(text)?;
        Word::new(alphabet, symbols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.symbols).expect("integer array")
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.symbols.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderSpec {
    pub word: Word,
}

impl CylinderSpec {
    pub fn new(word: Word) -> Self {
        CylinderSpec { word }
    }

    pub fn contains(&self, seq: &[usize]) -> bool {
        seq.len() >= self.word.len() && seq[..self.word.len()] == *self.word.symbols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliVector {
    alphabet: Alphabet,
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

pub const PROB_TOL: f64 = 1e-12;

impl BernoulliVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument("negative or non-finite probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {s}")));
        }
        Ok(Self::build(probs))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if w.is_empty() || !(s > 0.0) || w.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidArgument("weights must be nonnegative with positive sum".into()));
        }
        Ok(Self::build(w.iter().map(|x| x / s).collect()))
    }

    pub fn uniform(size: usize) -> Self {
        Self::build(vec![1.0 / size as f64; size])
    }

    pub fn dirac(size: usize, a: usize) -> Self {
        let mut p = vec![0.0; size];
        p[a] = 1.0;
        Self::build(p)
    }

    /// Draws a vector uniformly from the simplex.
    pub fn random(size: usize, rng: &mut impl Rng) -> Self {
        let w: Vec<f64> = (0..size).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        Self::from_weights(&w).expect("positive weights")
    }

    fn build(probs: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        BernoulliVector { alphabet: Alphabet { size: probs.len() }, probs, cdf }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, a: usize) -> f64 {
        self.probs[a]
    }

    /// Letter whose CDF interval contains `u` in [0,1).
    pub fn quantile(&self, u: f64) -> usize {
        let i = self.cdf.partition_point(|&c| c <= u);
        let mut i = i.min(self.probs.len() - 1);
        while self.probs[i] == 0.0 && i > 0 {
            i -= 1;
        }
        while self.probs[i] == 0.0 {
            i += 1;
        }
        i
    }

    pub fn sample_letter(&self, rng: &mut impl Rng) -> usize {
        self.quantile(rng.gen::<f64>())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// City metric: sum of absolute differences.
    pub fn city(&self, other: &Self) -> Result<f64> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch("city metric".into()));
        }
        Ok(self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum())
    }

    pub fn is_degenerate(&self) -> bool {
        self.probs.contains(&1.0)
    }
}

pub fn sample_word(p: &BernoulliVector, n: usize, rng: RngStream) -> Word {
    let mut r = rng.rng();
    let symbols = (0..n).map(|_| p.sample_letter(&mut r)).collect();
    Word { alphabet: p.alphabet(), symbols }
}

pub fn block_distribution(w: &Word, k: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("block length must be >= 1".into()));
    }
    if w.len() < k {
        return Err(Error::InsufficientData(format!("word of length {} < block length {k}", w.len())));
    }
    let windows = w.len() - k + 1;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for win in w.symbols().windows(k) {
        *counts.entry(win.to_vec()).or_default() += 1;
    }
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / windows as f64)).collect())
}

pub fn cylinder_prob_bernoulli(p: &BernoulliVector, c: &CylinderSpec) -> Result<f64> {
    if c.word.alphabet() != p.alphabet() {
        return Err(Error::AlphabetMismatch("cylinder word vs vector".into()));
    }
    Ok(c.word.symbols().iter().map(|&a| p.prob(a)).product())
}
