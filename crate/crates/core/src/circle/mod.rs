//! Step skew products with projective circle fibers.
//!
//! The fiber is `ℙ¹ ≅ ℝ/πℤ`, a line being stored by its angle `θ ∈ [0,π)`.
//! For `A ∈ SL(2,ℝ)` and unit `v̂ = (cos θ, sin θ)`, `log f_A′(θ) = −log ‖A v̂‖²`.

mod blending;
mod cifs;
mod measure;

pub use blending::{check_blending, AxiomEvidence, BlendingReport, CecFit};
pub use cifs::{
    attractor_point, geometric_cascade, CifsCollection, search_cifs, search_tail, verify_cifs, CifsCertificate,
    CifsSearch, GeometricTails, Margins, Quantifiers, TailSearchParams,
};
pub use measure::{
    birkhoff_diagnostic, fiber_exponent, sample_mu_n, wasserstein_estimate, DeviationReport, LogDerivative, MuOrbit,
    BirkhoffParams, Observable, OrbitSummary, WassersteinEstimate,
};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symdyn::Word;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Sl2Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TryFrom<[f64; 4]> for Sl2Matrix {
    type Error = Error;
    fn try_from(e: [f64; 4]) -> Result<Self> {
        Sl2Matrix::new(e[0], e[1], e[2], e[3])
    }
}

impl From<Sl2Matrix> for [f64; 4] {
    fn from(m: Sl2Matrix) -> Self {
        [m.a, m.b, m.c, m.d]
    }
}

impl Sl2Matrix {
    /// Rescales by `det^{-1/2}` when the determinant is off by more than 1e−9.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) || ![a, b, c, d].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(format!("matrix [[{a},{b}],[{c},{d}]] has determinant {det}")));
        }
        if (det - 1.0).abs() < 1e-9 {
            return Ok(Sl2Matrix { a, b, c, d });
        }
        let s = det.sqrt().recip();
        Ok(Sl2Matrix { a: a * s, b: b * s, c: c * s, d: d * s })
    }

    pub fn identity() -> Self {
        Sl2Matrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Rotation by `t`. Angles within `1e-12` of a quarter turn give exact
    /// entries; a residual `cos(π/2) ≈ 6e-17` would otherwise break the
    /// invariant axis pair of reducible families.
    pub fn rotation(t: f64) -> Self {
        let q = t / FRAC_PI_2;
        let (s, c) = if (q - q.round()).abs() < 1e-12 {
            match (q.round() as i64).rem_euclid(4) {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            }
        } else {
            t.sin_cos()
        };
        Sl2Matrix { a: c, b: -s, c: s, d: c }
    }

    pub fn diag(l: f64) -> Self {
        Sl2Matrix { a: l, b: 0.0, c: 0.0, d: l.recip() }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul(&self, o: &Sl2Matrix) -> Sl2Matrix {
        Sl2Matrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Sl2Matrix {
        Sl2Matrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// `P A P⁻¹`.
    pub fn conjugate(&self, p: &Sl2Matrix) -> Sl2Matrix {
        p.mul(self).mul(&p.inverse())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    /// Operator norm `σ_max`.
    pub fn norm(&self) -> f64 {
        let f = self.frobenius_sq();
        ((f + (f * f - 4.0).max(0.0).sqrt()) / 2.0).sqrt()
    }

    /// Lipschitz constant of `θ ↦ log f_A′(θ)`: `(σ_max² − σ_min²)·σ_max²`.
    pub fn log_derivative_lipschitz(&self) -> f64 {
        let s2 = self.norm().powi(2);
        (s2 - s2.recip()) * s2
    }

    pub(crate) fn act(&self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        let x = self.a * c + self.b * s;
        let y = self.c * c + self.d * s;
        (normalize(y.atan2(x)), -(x * x + y * y).ln())
    }

    /// Line of the eigenvector with the larger `|eigenvalue|`, for hyperbolic matrices.
    pub fn attracting_direction(&self) -> Option<f64> {
        let t = self.trace();
        if t.abs() <= 2.0 {
            return None;
        }
        let disc = (t * t - 4.0).sqrt();
        let l = if t > 0.0 { (t + disc) / 2.0 } else { (t - disc) / 2.0 };
        // (A − l) v = 0
        let v = if self.b.abs() + (self.a - l).abs() > self.c.abs() + (self.d - l).abs() {
            (self.b, l - self.a)
        } else {
            (l - self.d, self.c)
        };
        Some(normalize(v.1.atan2(v.0)))
    }
}

/// `θ mod π` in `[0, π)`.
pub fn normalize(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Distance on `ℝ/πℤ`.
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ProjectivePoint(f64);

impl ProjectivePoint {
    pub fn new(theta: f64) -> Self {
        ProjectivePoint(normalize(theta))
    }

    pub fn angle(&self) -> f64 {
        self.0
    }
}

/// Image line and `log|f_A′(v)|`.
pub fn projective_map(a: &Sl2Matrix, v: ProjectivePoint) -> (ProjectivePoint, f64) {
    let (t, l) = a.act(v.0);
    (ProjectivePoint(t), l)
}

/// Positively oriented arc `[start, start + len]` of `ℝ/πℤ`, `0 ≤ len < π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub len: f64,
}

impl Interval {
    pub fn new(start: f64, len: f64) -> Result<Self> {
        if !(len > 0.0 && len < PI) {
            return Err(Error::InvalidArgument(format!("arc length {len} outside (0, π)")));
        }
        Ok(Interval { start: normalize(start), len })
    }

    pub fn centered(mid: f64, half: f64) -> Result<Self> {
        Self::new(mid - half, 2.0 * half)
    }

    pub fn end(&self) -> f64 {
        normalize(self.start + self.len)
    }

    pub fn mid(&self) -> f64 {
        normalize(self.start + self.len / 2.0)
    }

    /// Position of `x` measured from `start` in `[0, π)`.
    pub fn offset(&self, x: f64) -> f64 {
        (x - self.start).rem_euclid(PI)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.offset(x) <= self.len
    }

    /// `k ≥ 2` equally spaced points including both endpoints.
    pub fn grid(&self, k: usize) -> Vec<f64> {
        (0..k).map(|i| normalize(self.start + self.len * i as f64 / (k - 1) as f64)).collect()
    }

    pub fn widen(&self, delta: f64) -> Result<Interval> {
        Interval::new(self.start - delta, self.len + 2.0 * delta)
    }

    /// Image under an orientation-preserving circle map known at the endpoints.
    pub fn image(&self, f: impl Fn(f64) -> f64) -> Interval {
        let s = f(self.start);
        let e = f(self.start + self.len);
        Interval { start: s, len: (e - s).rem_euclid(PI) }
    }

    /// `other ⊂ self`; returns the smaller distance from `other` to the ends of `self`, negative if not contained.
    pub fn inner_margin(&self, other: &Interval) -> f64 {
        let a = self.offset(other.start);
        if a > self.len {
            return -circle_dist(other.start, self.start).min(circle_dist(other.start, self.end()));
        }
        let b = a + other.len;
        if b > self.len {
            return -(b - self.len);
        }
        a.min(self.len - b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewSystem {
    pub matrices: Vec<Sl2Matrix>,
}

/// Composed image with prefix sums `sums[k] = log (f_w^k)′(x)`, `sums[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordOrbit {
    pub image: ProjectivePoint,
    pub sums: Vec<f64>,
}

impl SkewSystem {
    pub fn new(matrices: Vec<Sl2Matrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidArgument("a skew system needs at least one matrix".into()));
        }
        Ok(SkewSystem { matrices })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: SkewSystem = serde_json::from_str(s)?;
        Self::new(sys.matrices)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    pub fn size(&self) -> usize {
        self.matrices.len()
    }

    pub fn inverse(&self) -> SkewSystem {
        SkewSystem { matrices: self.matrices.iter().map(Sl2Matrix::inverse).collect() }
    }

    pub fn step(&self, i: usize, x: f64) -> (f64, f64) {
        self.matrices[i].act(x)
    }

    /// `f_w(x)` only.
    pub fn apply(&self, w: &[usize], mut x: f64) -> f64 {
        for &i in w {
            x = self.matrices[i].act(x).0;
        }
        x
    }

    /// `(f_w(x), log f_w′(x))`.
    pub fn apply_with_log(&self, w: &[usize], mut x: f64) -> (f64, f64) {
        let mut s = 0.0;
        for &i in w {
            let (y, l) = self.matrices[i].act(x);
            x = y;
            s += l;
        }
        (x, s)
    }

    /// Product matrix of a word, first letter acting first.
    pub fn product(&self, w: &[usize]) -> Sl2Matrix {
        w.iter().fold(Sl2Matrix::identity(), |acc, &i| self.matrices[i].mul(&acc))
    }

    fn check_word(&self, w: &[usize]) -> Result<()> {
        match w.iter().find(|&&i| i >= self.size()) {
            Some(i) => Err(Error::AlphabetMismatch(format!("generator {i} in a system of {}", self.size()))),
            None => Ok(()),
        }
    }
}

pub fn word_map(sys: &SkewSystem, w: &Word, x: ProjectivePoint) -> Result<WordOrbit> {
    if w.alphabet().size != sys.size() {
        return Err(Error::AlphabetMismatch(format!("word over {} letters, system has {}", w.alphabet().size, sys.size())));
    }
    let mut sums = Vec::with_capacity(w.len() + 1);
    sums.push(0.0);
    let mut t = x.0;
    let mut s = 0.0;
    for &i in w.symbols() {
        let (y, l) = sys.matrices[i].act(t);
        t = y;
        s += l;
        sums.push(s);
    }
    Ok(WordOrbit { image: ProjectivePoint(t), sums })
}
