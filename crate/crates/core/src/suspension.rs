//! Discrete-time suspensions over a Bernoulli shift with integer roof.
//!
//! `Lambda(p)`: base letter at time 0 drawn `∝ R(a) p_a`, uniform offset,
//! later letters i.i.d. `p`. `LambdaTilde(p)` is the invariant measure whose
//! projection `(a, s) ↦ a` is `p`; it equals `Lambda(p̂)` with `p̂_a ∝ p_a / R(a)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::substitution::SubstitutionMap;
use crate::symdyn::{Alphabet, BernoulliVector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoofFunction {
    heights: Vec<usize>,
}

impl RoofFunction {
    pub fn new(heights: Vec<usize>) -> Result<Self> {
        if heights.is_empty() || heights.contains(&0) {
            return Err(Error::InvalidArgument("roof heights must be >= 1".into()));
        }
        Ok(RoofFunction { heights })
    }

    pub fn constant(size: usize, c: usize) -> Result<Self> {
        Self::new(vec![c; size])
    }

    pub fn of_substitution(rho: &SubstitutionMap) -> Self {
        RoofFunction { heights: rho.lengths() }
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet { size: self.heights.len() }
    }

    pub fn height(&self, a: usize) -> usize {
        self.heights[a]
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn max(&self) -> usize {
        *self.heights.iter().max().unwrap()
    }

    pub fn mean(&self, p: &BernoulliVector) -> f64 {
        self.heights.iter().zip(p.probs()).map(|(r, q)| *r as f64 * q).sum()
    }
}

/// Canonical point `(a̲, s)`; `base[origin]` is the letter `a₀`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuspensionPoint {
    pub base: Vec<usize>,
    pub origin: usize,
    pub s: usize,
}

impl SuspensionPoint {
    pub fn letter(&self) -> usize {
        self.base[self.origin]
    }
}

pub fn suspension_step(pt: &SuspensionPoint, roof: &RoofFunction) -> Result<SuspensionPoint> {
    let a0 = pt.letter();
    if pt.s + 1 < roof.height(a0) {
        return Ok(SuspensionPoint { base: pt.base.clone(), origin: pt.origin, s: pt.s + 1 });
    }
    if pt.origin + 1 >= pt.base.len() {
        return Err(Error::WindowExhausted);
    }
    Ok(SuspensionPoint { base: pt.base.clone(), origin: pt.origin + 1, s: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuspensionVariant {
    Lambda,
    LambdaTilde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionMeasureSpec {
    pub base: BernoulliVector,
    pub roof: RoofFunction,
    pub variant: SuspensionVariant,
}

impl SuspensionMeasureSpec {
    pub fn new(base: BernoulliVector, roof: RoofFunction, variant: SuspensionVariant) -> Result<Self> {
        if base.alphabet() != roof.alphabet() {
            return Err(Error::AlphabetMismatch("base vector vs roof".into()));
        }
        Ok(SuspensionMeasureSpec { base, roof, variant })
    }

    /// Law of the i.i.d. base letters after the first.
    pub fn driving_law(&self) -> BernoulliVector {
        match self.variant {
            SuspensionVariant::Lambda => self.base.clone(),
            SuspensionVariant::LambdaTilde => {
                let w: Vec<f64> = self.base.probs().iter().zip(self.roof.heights()).map(|(p, r)| p / *r as f64).collect();
                BernoulliVector::from_weights(&w).expect("positive mass")
            }
        }
    }
}

/// A sampled orbit segment: one base window and the `(origin, s)` states visited.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub base: Vec<usize>,
    pub states: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn point(&self, i: usize) -> SuspensionPoint {
        let (origin, s) = self.states[i];
        SuspensionPoint { base: self.base.clone(), origin, s }
    }

    pub fn letter(&self, i: usize) -> usize {
        self.base[self.states[i].0]
    }
}

pub fn sample_suspension(spec: &SuspensionMeasureSpec, steps: usize, rng: RngStream) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    let mut r = rng.rng();
    let law = spec.driving_law();
    let rmax = spec.roof.max();
    // length-biased first letter, uniform offset
    let a0 = loop {
        let a = law.sample_letter(&mut r);
        if r.gen_range(0..rmax) < spec.roof.height(a) {
            break a;
        }
    };
    let s0 = r.gen_range(0..spec.roof.height(a0));
    let mut base = vec![a0];
    let mut states = Vec::with_capacity(steps);
    let (mut origin, mut s) = (0usize, s0);
    for _ in 0..steps {
        states.push((origin, s));
        if s + 1 < spec.roof.height(base[origin]) {
            s += 1;
        } else {
            origin += 1;
            s = 0;
            if origin == base.len() {
                base.push(law.sample_letter(&mut r));
            }
        }
    }
    Ok(Trajectory { base, states })
}

/// `h(σ, p) / Σ R(a) p_a`.
pub fn abramov_entropy(p: &BernoulliVector, roof: &RoofFunction) -> Result<f64> {
    if p.alphabet() != roof.alphabet() {
        return Err(Error::AlphabetMismatch("vector vs roof".into()));
    }
    Ok(p.entropy() / roof.mean(p))
}

/// First `len` target symbols of `σ^s(ϱ(a₀)ϱ(a₁)…)`.
pub fn project_suspension(rho: &SubstitutionMap, roof: &RoofFunction, pt: &SuspensionPoint, len: usize) -> Result<Vec<usize>> {
    if roof.heights() != rho.lengths() {
        return Err(Error::InvalidArgument("roof must equal the image lengths".into()));
    }
    let mut out = Vec::with_capacity(len);
    let mut i = pt.origin;
    let mut off = pt.s;
    while out.len() < len {
        let Some(&a) = pt.base.get(i) else {
            return Err(Error::WindowExhausted);
        };
        let img = rho.image(a);
        let take = (img.len() - off).min(len - out.len());
        out.extend_from_slice(&img[off..off + take]);
        i += 1;
        off = 0;
    }
    Ok(out)
}

/// CSV rows `step,letter,offset,projected`.
pub fn trajectory_csv(traj: &Trajectory, rho: &SubstitutionMap) -> String {
    let mut out = String::from("step,letter,offset,projected\n");
    for (i, &(o, s)) in traj.states.iter().enumerate() {
        let a = traj.base[o];
        out.push_str(&format!("{i},{a},{s},{}\n", rho.image(a)[s]));
    }
    out
}
