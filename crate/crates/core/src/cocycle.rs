//! Random products of `SL(2,ℝ)` matrices: top Lyapunov exponents, trace
//! classification, elliptic search and the fiber-exponent bridge `χ = −2λ₁`.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{Sl2Matrix, SkewSystem};
use crate::error::{Error, Result};
use crate::fbar::mean_se;
use crate::rng::RngStream;
use crate::symdyn::BernoulliVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleFamily {
    pub matrices: Vec<Sl2Matrix>,
}

impl CocycleFamily {
    pub fn new(matrices: Vec<Sl2Matrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidArgument("a cocycle family needs at least one matrix".into()));
        }
        Ok(CocycleFamily { matrices })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CocycleFamily = serde_json::from_str(s)?;
        Self::new(f.matrices)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    pub fn size(&self) -> usize {
        self.matrices.len()
    }

    pub fn skew_system(&self) -> SkewSystem {
        SkewSystem { matrices: self.matrices.clone() }
    }

    fn check(&self, p: &BernoulliVector) -> Result<()> {
        if p.alphabet().size != self.size() {
            return Err(Error::AlphabetMismatch(format!("vector over {} letters, {} matrices", p.alphabet().size, self.size())));
        }
        Ok(())
    }
}

/// The three families of the introduction: two rotations, a diagonal matrix
/// with the quarter rotation, and two hyperbolic matrices with transverse axes.
pub fn furstenberg_families() -> Vec<(&'static str, CocycleFamily)> {
    let a = Sl2Matrix::diag(2.0);
    vec![
        ("two-rotations", CocycleFamily { matrices: vec![Sl2Matrix::rotation(1.0), Sl2Matrix::rotation(PI * (2f64.sqrt() - 1.0))] }),
        ("diagonal-and-quarter-rotation", CocycleFamily { matrices: vec![a, Sl2Matrix::rotation(PI / 2.0)] }),
        ("transverse-hyperbolic", CocycleFamily { matrices: vec![a, a.conjugate(&Sl2Matrix::rotation(PI / 4.0))] }),
    ]
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub steps: usize,
    pub trials: usize,
    pub std_error: f64,
    /// Vector-tracking estimate of the same exponent.
    pub cross_check: f64,
    /// Set when the two estimators differ by more than 5 standard errors.
    pub flagged: bool,
}

impl LyapunovEstimate {
    pub const CSV_HEADER: &'static str = "value,std_error,steps,trials,cross_check,flagged";

    pub fn csv_row(&self) -> String {
        format!("{:.12e},{:.12e},{},{},{:.12e},{}", self.value, self.std_error, self.steps, self.trials, self.cross_check, self.flagged)
    }
}

const RENORM: usize = 32;

/// `((1/n) log ‖Aₙ⋯A₁‖, (1/n) log ‖Aₙ⋯A₁v‖)` along one random word.
fn one_trial(f: &CocycleFamily, p: &BernoulliVector, steps: usize, rng: RngStream) -> (f64, f64) {
    let mut r = rng.rng();
    let t: f64 = r.gen_range(0.0..PI);
    let (mut vx, mut vy) = (t.cos(), t.sin());
    let mut m = Sl2Matrix::identity();
    let (mut acc, mut vacc) = (Neumaier::default(), Neumaier::default());
    for i in 1..=steps {
        let a = &f.matrices[p.sample_letter(&mut r)];
        m = a.mul(&m);
        let (x, y) = (a.a * vx + a.b * vy, a.c * vx + a.d * vy);
        let n = x.hypot(y);
        vacc.add(n.ln());
        vx = x / n;
        vy = y / n;
        if i % RENORM == 0 {
            let s = m.frobenius_sq().sqrt();
            acc.add(s.ln());
            m = Sl2Matrix { a: m.a / s, b: m.b / s, c: m.c / s, d: m.d / s };
        }
    }
    // m now has determinant s⁻²; its operator norm is still the right factor
    let f2 = m.frobenius_sq();
    let det = m.det();
    let top = ((f2 + (f2 * f2 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt();
    acc.add(top.ln());
    (acc.value() / steps as f64, vacc.value() / steps as f64)
}

/// Mean of `(1/n) log ‖product‖` over independent trials, the norm factored
/// out every 32 steps.
pub fn top_lyapunov(f: &CocycleFamily, p: &BernoulliVector, steps: usize, trials: usize, rng: RngStream) -> Result<LyapunovEstimate> {
    f.check(p)?;
    if steps == 0 || trials == 0 {
        return Err(Error::InvalidArgument("steps and trials must be >= 1".into()));
    }
    let runs: Vec<(f64, f64)> = (0..trials).into_par_iter().map(|t| one_trial(f, p, steps, rng.split(t as u64))).collect();
    let norms: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let vecs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (value, se) = mean_or_single(&norms);
    let (cross, cse) = mean_or_single(&vecs);
    let flagged = (value - cross).abs() > 5.0 * (se + cse) + 1e-9;
    Ok(LyapunovEstimate { value, steps, trials, std_error: se, cross_check: cross, flagged })
}

fn mean_or_single(v: &[f64]) -> (f64, f64) {
    if v.len() < 2 {
        return (v[0], 0.0);
    }
    mean_se(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

pub const CLASSIFY_TOL: f64 = 1e-9;

pub fn classify(a: &Sl2Matrix) -> MatrixClass {
    let t = a.trace().abs();
    if t < 2.0 - CLASSIFY_TOL {
        MatrixClass::Elliptic
    } else if t > 2.0 + CLASSIFY_TOL {
        MatrixClass::Hyperbolic
    } else {
        MatrixClass::Parabolic
    }
}

fn product_key(m: &Sl2Matrix) -> [i64; 4] {
    let q = |x: f64| (x * 1e9).round() as i64;
    [q(m.a), q(m.b), q(m.c), q(m.d)]
}

/// Shortest word (length-lexicographic) whose product has class `class`.
/// Words with an already-seen product are not extended.
fn find_class(f: &CocycleFamily, depth: usize, class: MatrixClass) -> Option<Vec<usize>> {
    let sys = f.skew_system();
    let mut seen = HashSet::new();
    let mut queue: VecDeque<Vec<usize>> = VecDeque::from([Vec::new()]);
    while let Some(w) = queue.pop_front() {
        if w.len() == depth {
            continue;
        }
        for g in 0..f.size() {
            let mut v = w.clone();
            v.push(g);
            let m = sys.product(&v);
            if classify(&m) == class {
                return Some(v);
            }
            if seen.insert(product_key(&m)) {
                queue.push_back(v);
            }
        }
    }
    None
}

/// Breadth-first search for an elliptic product of length ≤ `depth`.
pub fn find_elliptic(f: &CocycleFamily, depth: usize) -> Option<Vec<usize>> {
    find_class(f, depth, MatrixClass::Elliptic)
}

pub fn find_hyperbolic(f: &CocycleFamily, depth: usize) -> Option<Vec<usize>> {
    find_class(f, depth, MatrixClass::Hyperbolic)
}

/// Grid check of "transitions in finite time" for the hyperbolic product `h`:
/// the largest, over grid lines `v`, of the shortest words sending `v` into
/// `B⁺ = {|f_h′| > 1}` and into `B⁻ = {|f_h′| < 1}`. `None` if some line
/// needs more than `max_len` letters.
pub fn transition_time(f: &CocycleFamily, h: &[usize], grid: usize, max_len: usize) -> Option<usize> {
    let sys = f.skew_system();
    let hm = sys.product(h);
    let side = |x: f64| hm.act(x).1;
    let mut worst = 0;
    for i in 0..grid {
        let v = PI * i as f64 / grid as f64;
        let mut need = [None, None];
        let mut layer = vec![v];
        for len in 0..=max_len {
            for &x in &layer {
                let l = side(x);
                if l > 0.0 && need[0].is_none() {
                    need[0] = Some(len);
                }
                if l < 0.0 && need[1].is_none() {
                    need[1] = Some(len);
                }
            }
            if need.iter().all(Option::is_some) || len == max_len {
                break;
            }
            layer = layer.iter().flat_map(|&x| (0..f.size()).map(move |g| (g, x))).map(|(g, x)| sys.step(g, x).0).collect();
            // lines closer than 1e−12 are merged
            layer.sort_by(f64::total_cmp);
            layer.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        }
        worst = worst.max(need[0]?.max(need[1]?));
    }
    Some(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub lambda: LyapunovEstimate,
    /// Fiber exponent along a random forward orbit.
    pub chi: f64,
    pub chi_std_error: f64,
    /// `||χ̂| − 2λ̂₁|`.
    pub residual: f64,
    /// `3(se_χ + 2 se_λ)`.
    pub tolerance: f64,
}

impl BridgeReport {
    pub fn pass(&self, floor: f64) -> bool {
        self.residual <= self.tolerance.max(floor)
    }
}

pub const BRIDGE_TRIALS: usize = 8;

/// Estimates `λ₁` from matrix products and `χ` from fiber orbits on
/// independent streams. The first `min(1000, steps/10)` fiber steps are
/// discarded so the orbit has settled on the attracting section.
pub fn bridge_check(f: &CocycleFamily, p: &BernoulliVector, steps: usize, rng: RngStream) -> Result<BridgeReport> {
    f.check(p)?;
    if steps < 10 {
        return Err(Error::InvalidArgument("steps must be >= 10".into()));
    }
    let lambda = top_lyapunov(f, p, steps, BRIDGE_TRIALS, rng.split(0))?;
    let sys = f.skew_system();
    let burn = (steps / 10).min(1000);
    let chis: Vec<f64> = (0..BRIDGE_TRIALS)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.split(1).split(t as u64).rng();
            let mut x: f64 = r.gen_range(0.0..PI);
            let mut acc = Neumaier::default();
            for i in 0..steps + burn {
                let (y, l) = sys.step(p.sample_letter(&mut r), x);
                if i >= burn {
                    acc.add(l);
                }
                x = y;
            }
            acc.value() / steps as f64
        })
        .collect();
    let (chi, chi_se) = mean_se(&chis);
    Ok(BridgeReport {
        residual: (chi.abs() - 2.0 * lambda.value).abs(),
        tolerance: 3.0 * (chi_se + 2.0 * lambda.std_error),
        lambda,
        chi,
        chi_std_error: chi_se,
    })
}
