//! Orbits of `μₙ(𝔭)`, fiber exponents, Birkhoff deviations and Wasserstein
//! lower bounds.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{circle_dist, ProjectivePoint, SkewSystem};
use crate::cascade::{sample_nu_n_with_history, Cascade};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::symdyn::BernoulliVector;

/// Observable on `Σ_N × 𝕊¹`, seen through a forward symbol window.
pub trait Observable: Sync {
    fn eval(&self, sys: &SkewSystem, window: &[usize], x: f64) -> f64;
}

impl<F: Fn(&[usize], f64) -> f64 + Sync> Observable for F {
    fn eval(&self, _sys: &SkewSystem, window: &[usize], x: f64) -> f64 {
        self(window, x)
    }
}

/// `(ξ, x) ↦ log f_{ξ₀}′(x)`.
pub struct LogDerivative;

impl Observable for LogDerivative {
    fn eval(&self, sys: &SkewSystem, window: &[usize], x: f64) -> f64 {
        sys.step(window[0], x).1
    }
}

/// `(1/n) Σ_{i<n} log f_{ξᵢ}′(xᵢ)`.
pub fn fiber_exponent(sys: &SkewSystem, symbols: &[usize], x0: ProjectivePoint, n: usize) -> Result<f64> {
    if n == 0 || n > symbols.len() {
        return Err(Error::InvalidArgument(format!("n = {n} with {} symbols", symbols.len())));
    }
    sys.check_word(&symbols[..n])?;
    Ok(sys.apply_with_log(&symbols[..n], x0.angle()).1 / n as f64)
}

fn batch_se(values: &[f64]) -> f64 {
    const BATCHES: usize = 32;
    let b = values.len() / BATCHES;
    if b == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = values.chunks_exact(b).take(BATCHES).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    let m = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (var / BATCHES as f64).sqrt()
}

/// Symbols carry `LOOKAHEAD` extra entries so every step has a full window.
const LOOKAHEAD: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuOrbit {
    pub level: usize,
    pub symbols: Vec<usize>,
    pub xs: Vec<f64>,
    pub logs: Vec<f64>,
    pub burn_in: usize,
    pub exponent: f64,
    /// Batch-means standard error of the exponent.
    pub std_error: f64,
}

impl MuOrbit {
    pub fn steps(&self) -> usize {
        self.xs.len()
    }

    pub fn birkhoff(&self, sys: &SkewSystem, obs: &impl Observable) -> f64 {
        let w = self.window_len();
        (0..self.steps()).map(|i| obs.eval(sys, &self.symbols[i..i + w], self.xs[i])).sum::<f64>() / self.steps() as f64
    }

    fn window_len(&self) -> usize {
        self.symbols.len() - self.xs.len()
    }

    pub fn summary(&self, window: usize, count: usize) -> OrbitSummary {
        OrbitSummary::new(&self.symbols, &self.xs, window.min(self.window_len()), 0, count.min(self.steps()))
    }

    /// `step,symbol,theta,log_derivative`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,symbol,theta,log_derivative\n");
        for i in 0..self.steps() {
            let _ = writeln!(s, "{i},{},{:.12},{:.12}", self.symbols[i], self.xs[i], self.logs[i]);
        }
        s
    }
}

/// An orbit of `μₙ(𝔭)`: a `νₙ(𝔭)` symbol stream with the fiber coordinate
/// started anywhere in `J` at a letter boundary and run through a burn-in of
/// `10⌈log(10⁻¹²)/α₀⌉` symbols, which shadows the attractor.
pub fn sample_mu_n(sys: &SkewSystem, cascade: &Cascade, p: &BernoulliVector, n: usize, steps: usize, alpha0: f64, rng: RngStream) -> Result<MuOrbit> {
    if cascade.base().target().size != sys.size() {
        return Err(Error::AlphabetMismatch(format!(
            "cascade over {} generators, system has {}",
            cascade.base().target().size,
            sys.size()
        )));
    }
    if steps < 1 || !(alpha0 < 0.0) {
        return Err(Error::InvalidArgument("steps >= 1 and alpha0 < 0 required".into()));
    }
    let burn = 10 * ((1e-12f64).ln() / alpha0).ceil() as usize;
    let mut r = rng.rng();
    let (stream, offset) = sample_nu_n_with_history(cascade, p, n, burn, steps + LOOKAHEAD, &mut r)?;
    // any start works; the letter images map J into itself
    let mut x = sys.apply(&stream[..offset], 0.0);
    let mut xs = Vec::with_capacity(steps);
    let mut logs = Vec::with_capacity(steps);
    for &s in &stream[offset..offset + steps] {
        let (y, l) = sys.step(s, x);
        xs.push(x);
        logs.push(l);
        x = y;
    }
    let exponent = logs.iter().sum::<f64>() / steps as f64;
    Ok(MuOrbit {
        level: n,
        symbols: stream[offset..offset + steps + LOOKAHEAD].to_vec(),
        xs,
        std_error: batch_se(&logs),
        logs,
        burn_in: offset,
        exponent,
    })
}

/// Points `(ξᵢ…ξᵢ₊ᵣ₋₁, xᵢ)` of an orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub windows: Vec<Vec<usize>>,
    pub xs: Vec<f64>,
}

impl OrbitSummary {
    pub fn new(symbols: &[usize], xs: &[f64], window: usize, start: usize, count: usize) -> Self {
        let end = (start + count).min(xs.len()).min(symbols.len().saturating_sub(window) + 1);
        OrbitSummary {
            windows: (start..end).map(|i| symbols[i..i + window].to_vec()).collect(),
            xs: xs[start..end].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `window,theta` rows, the window written as dash-joined symbols.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("window,theta\n");
        for (w, x) in self.windows.iter().zip(&self.xs) {
            let joined: Vec<String> = w.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(s, "{},{x:.12}", joined.join("-"));
        }
        s
    }
}

/// `2^{−k}` at the first disagreement `k < len`, else 0. Distance to the
/// cylinder of `c[..len]` in the ultrametric `2^{−min{k: ξₖ≠ηₖ}}`.
fn sym_dist(a: &[usize], c: &[usize], len: usize) -> f64 {
    a.iter().zip(c).take(len).position(|(x, y)| x != y).map_or(0.0, |k| 0.5f64.powi(k as i32))
}

enum TestFunction {
    Point(Vec<usize>, f64),
    Fiber(f64),
    Cylinder(Vec<usize>),
}

impl TestFunction {
    fn eval(&self, w: &[usize], x: f64) -> f64 {
        match self {
            TestFunction::Point(c, y) => sym_dist(w, c, c.len()).max(circle_dist(x, *y)),
            TestFunction::Fiber(y) => circle_dist(x, *y),
            TestFunction::Cylinder(c) => sym_dist(w, c, c.len()),
        }
    }

    fn describe(&self) -> String {
        match self {
            TestFunction::Point(c, y) => format!("distance to ({c:?}, {y:.6})"),
            TestFunction::Fiber(y) => format!("fiber distance to {y:.6}"),
            TestFunction::Cylinder(c) => format!("distance to cylinder {c:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEstimate {
    /// `max_φ |∫φ dA − ∫φ dB|` over the dictionary; a lower bound on `W`.
    pub value: f64,
    pub std_error: f64,
    pub witness: String,
    pub dictionary: usize,
}

/// Lower bound on the Wasserstein distance for the metric
/// `max(d_Σ, d_𝕊¹)` using non-negative 1-Lipschitz test functions.
pub fn wasserstein_estimate(a: &OrbitSummary, b: &OrbitSummary, dictionary: usize, rng: RngStream) -> WassersteinEstimate {
    let mut r = rng.rng();
    let mut dict = Vec::with_capacity(dictionary);
    let pick = |r: &mut rand_chacha::ChaCha8Rng, from_a: bool| {
        let s = if from_a || b.is_empty() { a } else { b };
        let i = r.gen_range(0..s.len());
        (s.windows[i].clone(), s.xs[i])
    };
    if !a.is_empty() {
        for k in 0..dictionary {
            let (w, x) = pick(&mut r, k % 2 == 0);
            dict.push(match k % 3 {
                0 => TestFunction::Point(w, x),
                1 => TestFunction::Fiber(x),
                _ => {
                    let len = r.gen_range(1..=w.len().clamp(1, 6));
                    TestFunction::Cylinder(w[..len.min(w.len())].to_vec())
                }
            });
        }
    }
    let stats = |s: &OrbitSummary, f: &TestFunction| {
        let n = s.len() as f64;
        let v: Vec<f64> = s.windows.iter().zip(&s.xs).map(|(w, &x)| f.eval(w, x)).collect();
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (m, var / n)
    };
    let mut best = WassersteinEstimate { value: 0.0, std_error: 0.0, witness: "none".into(), dictionary: dict.len() };
    if a.is_empty() || b.is_empty() {
        return best;
    }
    for f in &dict {
        let (ma, va) = stats(a, f);
        let (mb, vb) = stats(b, f);
        let d = (ma - mb).abs();
        if d > best.value {
            best.value = d;
            best.std_error = (va + vb).sqrt();
            best.witness = f.describe();
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub level: usize,
    pub ell: usize,
    /// Window length `max |ϱ_ℓ|`.
    pub window: usize,
    pub segments: usize,
    pub long_run_mean: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub eps: f64,
    /// Fraction of windows whose average is within `eps` of the long-run mean.
    pub mass_within: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffParams {
    pub ell: usize,
    pub n: usize,
    pub eps: f64,
    pub segments: usize,
    pub steps: usize,
    pub alpha0: f64,
}

/// Deviation of window Birkhoff averages from the long-run mean along a
/// `μₙ` orbit, windows of length `max |ϱ_ℓ|`.
pub fn birkhoff_diagnostic(
    sys: &SkewSystem,
    cascade: &Cascade,
    p: &BernoulliVector,
    obs: &impl Observable,
    params: BirkhoffParams,
    rng: RngStream,
) -> Result<DeviationReport> {
    if params.n < params.ell + 1 || params.n > cascade.depth() {
        return Err(Error::InvalidArgument(format!("need ell < n <= depth, got ell = {}, n = {}", params.ell, params.n)));
    }
    let window = cascade.max_roof_bound(params.ell) as usize;
    if params.steps < 2 * window || params.segments == 0 {
        return Err(Error::InsufficientData(format!("{} steps for windows of {window}", params.steps)));
    }
    let orbit = sample_mu_n(sys, cascade, p, params.n, params.steps, params.alpha0, rng.split(0))?;
    let w = orbit.window_len();
    let vals: Vec<f64> = (0..orbit.steps()).map(|i| obs.eval(sys, &orbit.symbols[i..i + w], orbit.xs[i])).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let mut prefix = vec![0.0];
    for v in &vals {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut r = rng.split(1).rng();
    let mut devs: Vec<f64> = (0..params.segments)
        .map(|_| {
            let s = r.gen_range(0..=vals.len() - window);
            ((prefix[s + window] - prefix[s]) / window as f64 - mean).abs()
        })
        .collect();
    devs.sort_by(f64::total_cmp);
    let q = |f: f64| devs[((devs.len() - 1) as f64 * f).round() as usize];
    Ok(DeviationReport {
        level: params.n,
        ell: params.ell,
        window,
        segments: params.segments,
        long_run_mean: mean,
        median: q(0.5),
        q90: q(0.9),
        max: *devs.last().unwrap(),
        eps: params.eps,
        mass_within: devs.iter().filter(|&&d| d <= params.eps).count() as f64 / devs.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::super::cifs::tests::{halving_cert, halving_system};
    use super::super::{geometric_cascade, Sl2Matrix};
    use super::*;

    #[test]
    fn exponent_examples() {
        let rot = SkewSystem::new(vec![Sl2Matrix::rotation(0.4), Sl2Matrix::rotation(1.3)]).unwrap();
        let syms: Vec<usize> = (0..500).map(|i| (i * 7 / 3) % 2).collect();
        for n in [1, 10, 500] {
            assert!(fiber_exponent(&rot, &syms, ProjectivePoint::new(0.2), n).unwrap().abs() < 1e-13);
        }
        let hyp = SkewSystem::new(vec![Sl2Matrix::diag(2.0)]).unwrap();
        let e = fiber_exponent(&hyp, &[0; 100], ProjectivePoint::new(0.0), 100).unwrap();
        assert!((e + 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(fiber_exponent(&hyp, &[0; 3], ProjectivePoint::new(0.0), 0).is_err());
        assert!(fiber_exponent(&hyp, &[0; 3], ProjectivePoint::new(0.0), 4).is_err());
    }

    #[test]
    fn mu_zero_in_certified_band() {
        let sys = halving_system();
        let cert = halving_cert();
        let c = geometric_cascade(&sys, &cert, vec![2], 0.6).unwrap();
        let p = BernoulliVector::uniform(11);
        let o = sample_mu_n(&sys, &c, &p, 0, 20_000, cert.quantifiers.alpha0, RngStream::new(1, 0)).unwrap();
        assert!(o.exponent > -1.2 && o.exponent < -0.8, "{}", o.exponent);
        assert!(o.std_error < 0.01);
        let d = BernoulliVector::dirac(11, 0);
        let o = sample_mu_n(&sys, &c, &d, 0, 5000, cert.quantifiers.alpha0, RngStream::new(1, 1)).unwrap();
        assert!(o.xs.iter().all(|x| circle_dist(*x, 0.0) < 1e-9));
        assert!((o.exponent + 1.0).abs() < 1e-6);
        let other = SkewSystem::new(vec![Sl2Matrix::diag(2.0)]).unwrap();
        assert!(sample_mu_n(&other, &c, &p, 0, 10, -0.8, RngStream::new(1, 2)).is_err());
    }

    #[test]
    fn orbit_csv_and_birkhoff() {
        let sys = halving_system();
        let cert = halving_cert();
        let c = geometric_cascade(&sys, &cert, vec![2], 0.6).unwrap();
        let o = sample_mu_n(&sys, &c, &BernoulliVector::uniform(11), 0, 1000, -0.8, RngStream::new(2, 0)).unwrap();
        assert!((o.birkhoff(&sys, &LogDerivative) - o.exponent).abs() < 1e-12);
        let csv = o.to_csv();
        assert_eq!(csv.lines().count(), 1001);
        assert!(csv.starts_with("step,symbol,theta,log_derivative\n0,"));
        assert_eq!(o.summary(8, 100).to_csv().lines().count(), 101);
    }

    #[test]
    fn wasserstein_examples() {
        let syms: Vec<usize> = (0..400).map(|i| (i * i) % 3 % 2).collect();
        let xs: Vec<f64> = (0..400).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let a = OrbitSummary::new(&syms, &xs, 8, 0, 300);
        let w = wasserstein_estimate(&a, &a, 30, RngStream::new(3, 0));
        assert_eq!(w.value, 0.0);
        let d = 0.3;
        let p = OrbitSummary { windows: vec![vec![0, 1, 0]; 50], xs: vec![0.2; 50] };
        let q = OrbitSummary { windows: vec![vec![0, 1, 0]; 50], xs: vec![0.2 + d; 50] };
        let w = wasserstein_estimate(&p, &q, 6, RngStream::new(3, 1));
        assert!(w.value >= d - 1e-12, "{w:?}");
        assert!(w.value <= d + 1e-12);
    }

    #[test]
    fn test_functions_are_one_lipschitz() {
        let mut r = RngStream::new(5, 0).rng();
        let words: Vec<Vec<usize>> = (0..40).map(|_| (0..6).map(|_| r.gen_range(0..2)).collect()).collect();
        let dist = |a: &[usize], x: f64, b: &[usize], y: f64| {
            let k = a.iter().zip(b).position(|(s, t)| s != t);
            k.map_or(0.0, |k| 0.5f64.powi(k as i32)).max(circle_dist(x, y))
        };
        for _ in 0..200 {
            let c = &words[r.gen_range(0..40)];
            let len = r.gen_range(1..=6);
            let fs = [
                TestFunction::Point(c.clone(), r.gen_range(0.0..3.0)),
                TestFunction::Fiber(r.gen_range(0.0..3.0)),
                TestFunction::Cylinder(c[..len].to_vec()),
            ];
            let (a, b) = (&words[r.gen_range(0..40)], &words[r.gen_range(0..40)]);
            let (x, y) = (r.gen_range(0.0..3.1), r.gen_range(0.0..3.1));
            for f in &fs {
                assert!((f.eval(a, x) - f.eval(b, y)).abs() <= dist(a, x, b, y) + 1e-12);
            }
        }
    }

    #[test]
    fn birkhoff_examples() {
        let sys = halving_system();
        let cert = halving_cert();
        let c = geometric_cascade(&sys, &cert, vec![2], 0.6).unwrap();
        let p = BernoulliVector::uniform(11);
        let params = BirkhoffParams { ell: 0, n: 1, eps: 0.05, segments: 200, steps: 5000, alpha0: -0.4 };
        let r = birkhoff_diagnostic(&sys, &c, &p, &|_: &[usize], _: f64| 2.5, params, RngStream::new(6, 0)).unwrap();
        assert_eq!(r.max, 0.0);
        assert_eq!(r.mass_within, 1.0);
        let r = birkhoff_diagnostic(&sys, &c, &p, &LogDerivative, params, RngStream::new(6, 1)).unwrap();
        assert!(r.long_run_mean > -0.6 && r.long_run_mean < -0.4);
        assert!(birkhoff_diagnostic(&sys, &c, &p, &LogDerivative, BirkhoffParams { n: 0, ..params }, RngStream::new(6, 2)).is_err());
    }
}
