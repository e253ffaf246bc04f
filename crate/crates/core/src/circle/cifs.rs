//! Contracting iterated function systems on an arc: verification, search,
//! attractors, and tailing maps for the geometric cascade.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{wasserstein_estimate, OrbitSummary, WassersteinEstimate};
use super::{Interval, ProjectivePoint, SkewSystem};
use crate::cascade::{Cascade, CascadeConfig, LetterPath, Rational, TailKind, TailSource};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::substitution::SubstitutionMap;
use crate::symdyn::Alphabet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantifiers {
    pub k: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Quantifiers {
    fn validate(&self) -> Result<()> {
        let ok = self.k > 1.0 && self.alpha0 < 0.0 && self.alpha < 0.0 && self.eps > 0.0 && self.eps < -self.alpha;
        if !ok {
            return Err(Error::InvalidArgument(format!("quantifiers out of range: {self:?}")));
        }
        Ok(())
    }

    /// Quantifiers after `n` halvings: `α/2ⁿ`, `ε/2ⁿ`, `α₀ = (α+ε)/2ⁿ`.
    pub fn halved(&self, n: usize) -> Quantifiers {
        if n == 0 {
            return *self;
        }
        let s = 0.5f64.powi(n as i32);
        Quantifiers { k: self.k, alpha0: (self.alpha + self.eps) * s, alpha: self.alpha * s, eps: self.eps * s }
    }
}

/// Worst margins over the collection; all non-negative on a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Distance from `f_w(J)` to `∂J`.
    pub invariance: f64,
    /// `log K + kα₀ − log (f_w^k)′` over prefixes.
    pub prefix: f64,
    /// `|w|α₀ − log f_w′`.
    pub contraction: f64,
    /// Distance of the exponent spectrum to `∂(α−ε, α+ε)`.
    pub spectrum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CifsCertificate {
    pub words: Vec<Vec<usize>>,
    pub interval: Interval,
    pub quantifiers: Quantifiers,
    pub grid: usize,
    pub margins: Margins,
    /// Enclosure of `{(1/|w|) log f_w′(x)}` including the Lipschitz margin.
    pub spectrum: (f64, f64),
    /// `max_w (max_J − min_J) log f_w′ / |w|`.
    pub distortion: f64,
    /// `max_w (1/|w|) Σ_k diam f_w^k(J)`.
    pub closeness: f64,
}

impl CifsCertificate {
    pub fn word_len(&self) -> Option<usize> {
        let l = self.words.first()?.len();
        self.words.iter().all(|w| w.len() == l).then_some(l)
    }

    /// `(1/‖𝒲‖) log |𝒲|`, `‖𝒲‖` the maximal word length.
    pub fn entropy_proxy(&self) -> f64 {
        let l = self.words.iter().map(Vec::len).max().unwrap_or(1);
        (self.words.len() as f64).ln() / l as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Forward arc length from `a` to `b`; rounding noise around 0 is clamped.
fn fwd(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(PI);
    if d > PI / 2.0 && (a - b).rem_euclid(PI) < 1e-9 {
        0.0
    } else {
        d
    }
}

/// A grid on `J` pushed through a word, with per-cell Lipschitz margins so
/// that grid values bound `log (f^k)′` on the whole arc.
#[derive(Debug, Clone)]
struct GridFlow {
    pts: Vec<f64>,
    sums: Vec<f64>,
    margins: Vec<f64>,
    steps: usize,
    alpha0: f64,
    worst_prefix: f64,
    worst_prefix_x: f64,
    diam_sum: f64,
}

impl GridFlow {
    fn new(j: &Interval, grid: usize, alpha0: f64) -> Self {
        let pts = j.grid(grid);
        GridFlow {
            sums: vec![0.0; grid],
            margins: vec![0.0; grid - 1],
            pts,
            steps: 0,
            alpha0,
            worst_prefix: f64::NEG_INFINITY,
            worst_prefix_x: j.start,
            diam_sum: 0.0,
        }
    }

    fn push(&mut self, sys: &SkewSystem, lips: &[f64], g: usize) {
        let lip = lips[g];
        for j in 0..self.margins.len() {
            self.margins[j] += lip * fwd(self.pts[j], self.pts[j + 1]);
        }
        let m = &sys.matrices[g];
        for (p, s) in self.pts.iter_mut().zip(self.sums.iter_mut()) {
            let (y, l) = m.act(*p);
            *p = y;
            *s += l;
        }
        self.steps += 1;
        let (u, at) = self.upper();
        let excess = u - self.steps as f64 * self.alpha0;
        if excess > self.worst_prefix {
            self.worst_prefix = excess;
            self.worst_prefix_x = at;
        }
        self.diam_sum += self.image().len;
    }

    fn push_word(&mut self, sys: &SkewSystem, lips: &[f64], w: &[usize]) {
        for &g in w {
            self.push(sys, lips, g);
        }
    }

    /// Upper bound of `log (f^k)′` on `J` and the grid point attaining it.
    fn upper(&self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0);
        for j in 0..self.margins.len() {
            let v = self.sums[j].min(self.sums[j + 1]) + self.margins[j];
            if v > best.0 {
                best = (v, j);
            }
        }
        let j = best.1;
        let x = if self.sums[j] >= self.sums[j + 1] { j } else { j + 1 };
        (best.0, x as f64)
    }

    fn lower(&self) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.margins.len() {
            let v = self.sums[j].max(self.sums[j + 1]) - self.margins[j];
            if v < best.0 {
                best = (v, j);
            }
        }
        let j = best.1;
        let x = if self.sums[j] <= self.sums[j + 1] { j } else { j + 1 };
        (best.0, x as f64)
    }

    fn image(&self) -> Interval {
        Interval { start: self.pts[0], len: fwd(self.pts[0], self.pts[self.pts.len() - 1]) }
    }
}

fn lipschitz_constants(sys: &SkewSystem) -> Vec<f64> {
    sys.matrices.iter().map(|m| m.log_derivative_lipschitz()).collect()
}

/// In lexicographic order every extension of `a` follows `a` directly.
fn check_disjoint(words: &[Vec<usize>]) -> Result<()> {
    let mut sorted: Vec<&Vec<usize>> = words.iter().collect();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].starts_with(pair[0]) {
            return Err(Error::NotDisjoint(pair[0].clone(), pair[1].clone()));
        }
    }
    Ok(())
}

struct WordReport {
    invariance: f64,
    prefix: f64,
    contraction: f64,
    spectrum: (f64, f64),
    distortion: f64,
    closeness: f64,
}

fn check_word(sys: &SkewSystem, lips: &[f64], w: &[usize], j: &Interval, q: &Quantifiers, grid: usize) -> Result<WordReport> {
    let n = w.len() as f64;
    let mut flow = GridFlow::new(j, grid, q.alpha0);
    flow.push_word(sys, lips, w);
    let pts = j.grid(grid);
    let at = |i: f64| pts[i as usize];
    let fail = |condition: &str, x: f64, value: f64, bound: f64| Error::CifsCondition {
        condition: condition.into(),
        word: w.to_vec(),
        x,
        value,
        bound,
    };
    let invariance = j.inner_margin(&flow.image());
    if invariance < 0.0 {
        return Err(fail("a", j.start, invariance, 0.0));
    }
    let log_k = q.k.ln();
    if flow.worst_prefix > log_k {
        return Err(fail("b", flow.worst_prefix_x, flow.worst_prefix, log_k));
    }
    let (u, ux) = flow.upper();
    let (l, lx) = flow.lower();
    if u > n * q.alpha0 {
        return Err(fail("b", at(ux), u / n, q.alpha0));
    }
    if u / n >= q.alpha + q.eps {
        return Err(fail("c", at(ux), u / n, q.alpha + q.eps));
    }
    if l / n <= q.alpha - q.eps {
        return Err(fail("c", at(lx), l / n, q.alpha - q.eps));
    }
    Ok(WordReport {
        invariance,
        prefix: log_k - flow.worst_prefix,
        contraction: n * q.alpha0 - u,
        spectrum: (l / n, u / n),
        distortion: (u - l) / n,
        closeness: flow.diam_sum / n,
    })
}

/// Checks conditions (a), (b), (c) on every word. Condition (b) for arbitrary
/// concatenations follows from the prefix bound `log K + kα₀` inside each word
/// together with the full-word bound `|w|α₀` and (a).
pub fn verify_cifs(sys: &SkewSystem, words: &[Vec<usize>], j: Interval, q: Quantifiers, grid: usize) -> Result<CifsCertificate> {
    if grid < 64 {
        return Err(Error::InvalidArgument("grid must have at least 64 points".into()));
    }
    q.validate()?;
    if words.is_empty() || words.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("the collection must be nonempty with nonempty words".into()));
    }
    for w in words {
        sys.check_word(w)?;
    }
    check_disjoint(words)?;
    let lips = lipschitz_constants(sys);
    let mut margins = Margins { invariance: f64::INFINITY, prefix: f64::INFINITY, contraction: f64::INFINITY, spectrum: f64::INFINITY };
    let mut spectrum = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut distortion, mut closeness) = (0.0f64, 0.0f64);
    let reports: Vec<WordReport> = words.par_iter().map(|w| check_word(sys, &lips, w, &j, &q, grid)).collect::<Result<_>>()?;
    for r in reports {
        margins.invariance = margins.invariance.min(r.invariance);
        margins.prefix = margins.prefix.min(r.prefix);
        margins.contraction = margins.contraction.min(r.contraction);
        spectrum = (spectrum.0.min(r.spectrum.0), spectrum.1.max(r.spectrum.1));
        distortion = distortion.max(r.distortion);
        closeness = closeness.max(r.closeness);
    }
    margins.spectrum = (q.alpha + q.eps - spectrum.1).min(spectrum.0 - (q.alpha - q.eps));
    Ok(CifsCertificate { words: words.to_vec(), interval: j, quantifiers: q, grid, margins, spectrum, distortion, closeness })
}

/// On-disk form of a candidate collection: words, the arc `J`, the
/// quantifiers and the grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CifsCollection {
    pub words: Vec<Vec<usize>>,
    pub interval: Interval,
    pub quantifiers: Quantifiers,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    256
}

impl CifsCollection {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn verify(&self, sys: &SkewSystem) -> Result<CifsCertificate> {
        let j = Interval::new(self.interval.start, self.interval.len)?;
        verify_cifs(sys, &self.words, j, self.quantifiers, self.grid)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CifsSearch {
    pub certificate: CifsCertificate,
    /// Periodic word whose attracting fixed point centers `J`.
    pub seed_word: Vec<usize>,
    pub seed_exponent: f64,
    pub entropy_proxy: f64,
    pub eps_h: f64,
    /// Lower bound on the distance between the seed periodic measure and a
    /// Bernoulli measure on the horseshoe.
    pub wasserstein_to_seed: WassersteinEstimate,
    pub eps_w: f64,
    pub nodes: usize,
}

const SEARCH_LOG_K: f64 = 3.0;
const SEARCH_NODES: usize = 4_000_000;
const SEED_DEPTH: usize = 8;
const HALF_WIDTHS: [f64; 7] = [0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.02];

fn seeds(sys: &SkewSystem, depth: usize) -> Vec<(Vec<usize>, f64, f64)> {
    let n = sys.size();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..depth.min(SEED_DEPTH) {
        let mut next = Vec::with_capacity(layer.len() * n);
        for w in &layer {
            for g in 0..n {
                let mut v = w.clone();
                v.push(g);
                let m = sys.product(&v);
                if let Some(t) = m.attracting_direction() {
                    let rate = m.act(t).1 / v.len() as f64;
                    out.push((v.clone(), t, rate));
                }
                next.push(v);
            }
        }
        layer = next;
    }
    out
}

/// Equal-length words of length ≤ `depth` surviving a coarse grid test.
fn collect_candidates(sys: &SkewSystem, lips: &[f64], j: &Interval, q: &Quantifiers, depth: usize, nodes: &mut usize) -> Vec<Vec<Vec<usize>>> {
    let mut by_len = vec![Vec::new(); depth + 1];
    let mut stack: Vec<(Vec<usize>, GridFlow)> = vec![(Vec::new(), GridFlow::new(j, 16, q.alpha0))];
    while let Some((w, flow)) = stack.pop() {
        if *nodes >= SEARCH_NODES {
            break;
        }
        for g in (0..sys.size()).rev() {
            *nodes += 1;
            let mut f = flow.clone();
            f.push(sys, lips, g);
            let k = f.steps as f64;
            let top = f.sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if top - k * q.alpha0 > SEARCH_LOG_K {
                continue;
            }
            let mut v = w.clone();
            v.push(g);
            let bot = f.sums.iter().cloned().fold(f64::INFINITY, f64::min);
            if j.inner_margin(&f.image()) >= 0.0 && top / k < q.alpha + q.eps && bot / k > q.alpha - q.eps && top <= k * q.alpha0 {
                by_len[v.len()].push(v.clone());
            }
            if v.len() < depth {
                stack.push((v, f));
            }
        }
    }
    by_len
}

/// Searches for an equal-length collection maximizing `(1/‖𝒲‖) log |𝒲|`
/// around the attracting point of the periodic word whose exponent is closest
/// to `alpha`.
pub fn search_cifs(sys: &SkewSystem, alpha: f64, eps_e: f64, eps_h: f64, eps_w: f64, equal_lengths: bool, depth: usize) -> Result<CifsSearch> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    // collections are always equal-length; the flag is accepted for interface symmetry
    let _ = equal_lengths;
    let mut cands = seeds(sys, depth);
    if cands.is_empty() {
        return Err(Error::BudgetExhausted("no hyperbolic word up to the seed depth: no contracting region".into()));
    }
    cands.sort_by(|a, b| (a.2 - alpha).abs().total_cmp(&(b.2 - alpha).abs()).then(a.0.len().cmp(&b.0.len())));
    let (seed, theta, rate) = cands.swap_remove(0);
    let lips = lipschitz_constants(sys);
    let mut nodes = 0usize;
    let mut best: Option<(f64, CifsCertificate)> = None;
    for h in HALF_WIDTHS {
        let j = Interval::centered(theta, h)?;
        let q0 = Quantifiers { k: SEARCH_LOG_K.exp(), alpha0: alpha + eps_e, alpha, eps: eps_e };
        let by_len = collect_candidates(sys, &lips, &j, &q0, depth, &mut nodes);
        // highest coarse ceiling first, so later lengths are pruned early
        let mut order: Vec<(f64, usize)> = by_len
            .iter()
            .enumerate()
            .filter(|(_, ws)| !ws.is_empty())
            .map(|(len, ws)| ((ws.len() as f64).ln() / len as f64, len))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        // ties go to the shorter word length
        let beaten = |best: &Option<(f64, CifsCertificate)>, score: f64, len: usize| {
            best.as_ref().is_some_and(|(s, c)| *s > score + 1e-12 || (*s > score - 1e-12 && c.word_len() <= Some(len)))
        };
        for (ceiling, len) in order {
            if beaten(&best, ceiling, len) {
                continue;
            }
            let words = &by_len[len];
            let kept: Vec<Vec<usize>> = words.par_iter().filter(|w| check_word(sys, &lips, w, &j, &q0, 64).is_ok()).cloned().collect();
            if kept.is_empty() {
                continue;
            }
            if beaten(&best, (kept.len() as f64).ln() / len as f64, len) {
                continue;
            }
            let fine: Vec<(Vec<usize>, f64)> = kept
                .into_par_iter()
                .filter_map(|w| check_word(sys, &lips, &w, &j, &q0, 256).ok().map(|r| (w, SEARCH_LOG_K - r.prefix)))
                .collect();
            if fine.is_empty() {
                continue;
            }
            let score = (fine.len() as f64).ln() / len as f64;
            if beaten(&best, score, len) {
                continue;
            }
            let need = fine.iter().map(|x| x.1).fold(0.0f64, f64::max);
            let q = Quantifiers { k: (need + 0.01).exp(), ..q0 };
            let ws: Vec<Vec<usize>> = fine.into_iter().map(|x| x.0).collect();
            if let Ok(cert) = verify_cifs(sys, &ws, j, q, 256) {
                best = Some((score, cert));
            }
        }
        if nodes >= SEARCH_NODES {
            break;
        }
    }
    let Some((_, certificate)) = best else {
        return Err(Error::BudgetExhausted(format!("no certified collection up to length {depth} ({nodes} nodes)")));
    };
    let wasserstein_to_seed = seed_distance(sys, &certificate, &seed, theta)?;
    Ok(CifsSearch {
        entropy_proxy: certificate.entropy_proxy(),
        certificate,
        seed_word: seed,
        seed_exponent: rate,
        eps_h,
        wasserstein_to_seed,
        eps_w,
        nodes,
    })
}

fn seed_distance(sys: &SkewSystem, cert: &CifsCertificate, seed: &[usize], theta: f64) -> Result<WassersteinEstimate> {
    const STEPS: usize = 20_000;
    let periodic: Vec<usize> = seed.iter().cycle().take(STEPS + 64).cloned().collect();
    let mut rng = RngStream::new(0, 0).rng();
    let mut coded = Vec::with_capacity(STEPS + 64);
    let burn = 200 * cert.words[0].len();
    while coded.len() < STEPS + 64 + burn {
        let w = &cert.words[rand::Rng::gen_range(&mut rng, 0..cert.words.len())];
        coded.extend_from_slice(w);
    }
    let orbit = |syms: &[usize], mut x: f64| {
        let mut xs = Vec::with_capacity(syms.len());
        for &s in syms {
            xs.push(x);
            x = sys.step(s, x).0;
        }
        xs
    };
    let xa = orbit(&periodic, theta);
    let xb = orbit(&coded, cert.interval.mid());
    let a = OrbitSummary::new(&periodic, &xa, 16, 0, STEPS);
    let b = OrbitSummary::new(&coded, &xb, 16, burn, STEPS);
    Ok(wasserstein_estimate(&a, &b, 64, RngStream::new(0, 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSearchParams {
    /// Budget constant: `|𝔱| ≤ L₁|α| |v|`.
    pub l1: f64,
    /// Hard cap on the tail length.
    pub max_len: usize,
    /// Target spectrum center and radius, normally `(α/2, ε/2)`.
    pub target: (f64, f64),
    pub beam: usize,
    /// Smallest admissible repetition count.
    pub n2: usize,
}

impl TailSearchParams {
    pub fn halved(cert: &CifsCertificate, l1: f64) -> Self {
        let q = cert.quantifiers;
        TailSearchParams { l1, max_len: 4096, target: (q.alpha / 2.0, q.eps / 2.0), beam: 48, n2: 1 }
    }
}

struct TailState {
    tail: Vec<usize>,
    flow: GridFlow,
    score: f64,
    ok: bool,
}

/// Finds `𝔱` with `v𝔱` a one-word CIFS on `J` for the target quantifiers
/// `α′ = target.0`, `ε′ = target.1`, `α₀′ = α′ + ε′`, same `K`. Beam search over
/// generator words ordered by distance of the exponent enclosure to `α′`;
/// the shortest accepted tail wins and is re-verified.
pub fn search_tail(sys: &SkewSystem, cert: &CifsCertificate, m: usize, v: &[usize], params: &TailSearchParams) -> Result<Vec<usize>> {
    if m < params.n2 {
        return Err(Error::InvalidArgument(format!("m = {m} below the configured N₂ = {}", params.n2)));
    }
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty body".into()));
    }
    sys.check_word(v)?;
    let (a1, e1) = params.target;
    let q = Quantifiers { k: cert.quantifiers.k, alpha0: a1 + e1, alpha: a1, eps: e1 };
    q.validate()?;
    let j = cert.interval;
    let lips = lipschitz_constants(sys);
    let budget = ((params.l1 * cert.quantifiers.alpha.abs() * v.len() as f64 + 1e-9).floor() as usize).min(params.max_len);
    let log_k = q.k.ln();
    let assess = |tail: Vec<usize>, flow: GridFlow| {
        let n = flow.steps as f64;
        let (u, _) = flow.upper();
        let (l, _) = flow.lower();
        let margin = j.inner_margin(&flow.image());
        let ok = margin >= 0.0 && u / n < a1 + e1 && l / n > a1 - e1 && u <= n * q.alpha0 && flow.worst_prefix <= log_k;
        let score = (u / n - a1).abs().max((l / n - a1).abs()) + 10.0 * (-margin).max(0.0);
        TailState { tail, flow, score, ok }
    };
    let mut base = GridFlow::new(&j, cert.grid, q.alpha0);
    base.push_word(sys, &lips, v);
    let mut beam = vec![assess(Vec::new(), base)];
    let mut best = (f64::INFINITY, Vec::new());
    for t in 0..=budget {
        if let Some(s) = beam.iter().filter(|s| s.ok).min_by(|a, b| a.score.total_cmp(&b.score)) {
            let word = [v, &s.tail[..]].concat();
            verify_cifs(sys, &[word], j, q, cert.grid)?;
            return Ok(s.tail.clone());
        }
        for s in &beam {
            if s.score < best.0 {
                best = (s.score, s.tail.clone());
            }
        }
        if t == budget {
            break;
        }
        let mut next = Vec::with_capacity(beam.len() * sys.size());
        for s in &beam {
            for g in 0..sys.size() {
                let mut f = s.flow.clone();
                f.push(sys, &lips, g);
                if f.worst_prefix > log_k {
                    continue;
                }
                let mut tail = s.tail.clone();
                tail.push(g);
                next.push(assess(tail, f));
            }
        }
        next.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.tail.cmp(&b.tail)));
        next.truncate(params.beam.max(1));
        if next.is_empty() {
            break;
        }
        beam = next;
    }
    Err(Error::TailNotFound { reason: format!("no tail of length <= {budget} reaches the band {a1} ± {e1}"), best: best.1 })
}

/// `Π_𝒲`: the limit of `f_[w₋₁]∘⋯∘f_[w₋ₙ](x₀)`; `past[i]` indexes `w₋₍ᵢ₊₁₎`.
/// Stops once the image of `J` has diameter below `tol`.
pub fn attractor_point(sys: &SkewSystem, cert: &CifsCertificate, past: &[usize], x0: ProjectivePoint, tol: f64) -> Result<ProjectivePoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let j = cert.interval;
    if !j.contains(x0.angle()) {
        return Err(Error::InvalidArgument("x0 outside J".into()));
    }
    if let Some(&i) = past.iter().find(|&&i| i >= cert.words.len()) {
        return Err(Error::InvalidArgument(format!("word index {i} outside the collection")));
    }
    for n in 1..=past.len() {
        let mut arc = j;
        let mut x = x0.angle();
        for &i in past[..n].iter().rev() {
            let w = &cert.words[i];
            arc = arc.image(|t| sys.apply(w, t));
            x = sys.apply(w, x);
        }
        if arc.len < tol {
            return Ok(ProjectivePoint::new(x));
        }
    }
    Err(Error::WindowExhausted)
}

/// Tailing maps for the geometric cascade: level-n tails are searched for the
/// quantifiers halved n times, with the cascade's exact budget.
pub struct GeometricTails {
    sys: SkewSystem,
    cert: CifsCertificate,
    k: Rational,
    l1: f64,
    m: Vec<usize>,
    pub beam: usize,
    pub n2: usize,
}

impl GeometricTails {
    pub fn new(sys: SkewSystem, cert: CifsCertificate, m: Vec<usize>, l1: f64) -> Self {
        let k = Rational::from_f64(2.0 * l1 * cert.quantifiers.alpha.abs());
        GeometricTails { sys, cert, k, l1, m, beam: 48, n2: 1 }
    }

    /// Level-n quantifiers.
    pub fn level_quantifiers(&self, n: usize) -> Quantifiers {
        self.cert.quantifiers.halved(n)
    }
}

impl TailSource for GeometricTails {
    fn tail(&self, level: usize, _letter: &LetterPath, body: &[usize]) -> Result<Vec<usize>> {
        let prev = self.level_quantifiers(level - 1);
        let next = self.level_quantifiers(level);
        let cert = CifsCertificate { quantifiers: prev, words: Vec::new(), ..self.cert.clone() };
        let max_len = (self.k.num * body.len() as u128 / (self.k.den << level)) as usize;
        let params = TailSearchParams { l1: self.l1, max_len, target: (next.alpha, next.eps), beam: self.beam, n2: self.n2 };
        search_tail(&self.sys, &cert, self.m[level - 1], body, &params)
    }
}

/// Cascade over a certified equal-length collection with `K = 2L₁|α|`.
pub fn geometric_cascade(sys: &SkewSystem, cert: &CifsCertificate, m: Vec<usize>, l1: f64) -> Result<Cascade> {
    if cert.word_len().is_none() {
        return Err(Error::Config("geometric cascades need an equal-length collection".into()));
    }
    let base = SubstitutionMap::new(Alphabet { size: sys.size() }, cert.words.clone())?;
    let config = CascadeConfig { base, m: m.clone(), k: 2.0 * l1 * cert.quantifiers.alpha.abs(), tails: TailKind::Geometric };
    Cascade::with_source(config, Arc::new(GeometricTails::new(sys.clone(), cert.clone(), m, l1)))
}
