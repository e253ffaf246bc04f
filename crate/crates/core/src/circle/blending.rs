//! Finite-resolution evidence for the axioms T, ACC(J) and CEC±(J).
//! Nothing here is a proof: every verdict is stamped with its resolution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Interval, SkewSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomEvidence {
    pub pass: bool,
    /// Fraction of the `resolution` cells of `ℝ/πℤ` reached.
    pub covered: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CecWitness {
    pub start: f64,
    pub len: f64,
    pub word: Vec<usize>,
    /// `min_I log (f_η)′ / ℓ` on a grid of `I`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CecFit {
    pub pass: bool,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub tested: usize,
    pub witnesses: Vec<CecWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendingReport {
    pub interval: Interval,
    pub resolution: usize,
    pub transitivity: AxiomEvidence,
    pub acc_forward: AxiomEvidence,
    pub acc_backward: AxiomEvidence,
    pub cec_plus: CecFit,
    pub cec_minus: CecFit,
    pub note: String,
}

impl BlendingReport {
    pub fn acc(&self) -> bool {
        self.acc_forward.pass && self.acc_backward.pass
    }
}

fn cell(x: f64, res: usize) -> usize {
    ((x.rem_euclid(PI) / PI * res as f64) as usize).min(res - 1)
}

/// Marks the cells met by `arc`, returning how many were new.
fn mark(seen: &mut [bool], arc: &Interval) -> usize {
    let res = seen.len();
    let first = cell(arc.start, res);
    let span = if arc.len >= PI { res } else { ((arc.start.rem_euclid(PI) + arc.len) / PI * res as f64) as usize - first + 1 };
    let mut new = 0;
    for k in 0..span.min(res) {
        let c = (first + k) % res;
        new += usize::from(!seen[c]);
        seen[c] = true;
    }
    new
}

/// Cells met by images of `seed` under generator words. An image is dropped
/// after `STALE` consecutive generations without reaching a new cell.
fn cover(sys: &SkewSystem, seed: Interval, res: usize) -> AxiomEvidence {
    const STALE: u32 = 8;
    let mut seen = vec![false; res];
    let mut left = res - mark(&mut seen, &seed);
    let mut frontier = vec![(seed, 0u32)];
    let mut iterations = 0;
    while left > 0 && !frontier.is_empty() && iterations < 64 * res {
        iterations += 1;
        let mut next = Vec::new();
        for (arc, stale) in &frontier {
            for g in 0..sys.size() {
                let img = arc.image(|x| sys.step(g, x).0);
                let new = mark(&mut seen, &img);
                left -= new;
                let stale = if new > 0 { 0 } else { stale + 1 };
                if stale <= STALE && next.len() < 16 * res {
                    next.push((img, stale));
                }
            }
        }
        frontier = next;
    }
    let covered = seen.iter().filter(|&&s| s).count() as f64 / res as f64;
    AxiomEvidence { pass: left == 0, covered, iterations }
}

const TEST_GRID: usize = 17;
const BEAM: usize = 64;
const SCALES: usize = 8;

struct Cand {
    word: Vec<usize>,
    pts: Vec<f64>,
    sums: Vec<f64>,
}

impl Cand {
    fn image(&self) -> Interval {
        Interval { start: self.pts[0], len: (self.pts[TEST_GRID - 1] - self.pts[0]).rem_euclid(PI) }
    }
}

/// Length of `target` not covered by `img`.
fn uncovered(img: &Interval, target: &Interval) -> f64 {
    let steps = 64;
    let miss = (0..=steps).filter(|&i| !img.contains(target.start + target.len * i as f64 / steps as f64)).count();
    target.len * miss as f64 / (steps + 1) as f64
}

fn cec_witness(sys: &SkewSystem, i: &Interval, target: &Interval, max_len: usize) -> Option<CecWitness> {
    let mut beam = vec![Cand { word: Vec::new(), pts: i.grid(TEST_GRID), sums: vec![0.0; TEST_GRID] }];
    for ell in 1..=max_len {
        let mut next = Vec::with_capacity(beam.len() * sys.size());
        for c in &beam {
            for g in 0..sys.size() {
                let mut pts = c.pts.clone();
                let mut sums = c.sums.clone();
                for (p, s) in pts.iter_mut().zip(sums.iter_mut()) {
                    let (y, l) = sys.step(g, *p);
                    *p = y;
                    *s += l;
                }
                let mut word = c.word.clone();
                word.push(g);
                next.push(Cand { word, pts, sums });
            }
        }
        for c in &next {
            let rate = c.sums.iter().cloned().fold(f64::INFINITY, f64::min) / ell as f64;
            if rate > 0.0 && c.image().inner_margin(target) >= 0.0 {
                return Some(CecWitness { start: i.start, len: i.len, word: c.word.clone(), rate });
            }
        }
        let score = |c: &Cand| -uncovered(&c.image(), target) + 0.01 * c.image().len.max(1e-300).ln();
        let mut scored: Vec<(f64, Cand)> = next.into_iter().map(|c| (score(&c), c)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.word.cmp(&b.1.word)));
        scored.truncate(BEAM);
        beam = scored.into_iter().map(|x| x.1).collect();
    }
    None
}

fn cec(sys: &SkewSystem, j: &Interval) -> CecFit {
    let k1 = j.len / 2.0;
    let k4 = (j.len / 4.0).min(0.05);
    let target = Interval { start: j.start - k4, len: j.len + 2.0 * k4 };
    let mut witnesses = Vec::new();
    let mut tested = 0;
    for s in 0..SCALES {
        let len = k1 * 0.5f64.powi(s as i32);
        let max_len = (8.0 * len.ln().abs()) as usize + 24;
        for pos in 0..5 {
            tested += 1;
            let c = j.start + j.len * pos as f64 / 4.0;
            let i = Interval { start: c - len / 2.0, len };
            if let Some(w) = cec_witness(sys, &i, &target, max_len) {
                witnesses.push(w);
            }
        }
    }
    let pass = witnesses.len() == tested;
    let xs: Vec<f64> = witnesses.iter().map(|w| w.len.ln().abs()).collect();
    let ls: Vec<f64> = witnesses.iter().map(|w| w.word.len() as f64).collect();
    let n = xs.len() as f64;
    let (mx, ml) = (xs.iter().sum::<f64>() / n.max(1.0), ls.iter().sum::<f64>() / n.max(1.0));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxl: f64 = xs.iter().zip(&ls).map(|(x, l)| (x - mx) * (l - ml)).sum();
    let k2 = if sxx > 0.0 { (sxl / sxx).max(1e-3) } else { 1e-3 };
    let k3 = xs.iter().zip(&ls).map(|(x, l)| l - k2 * x).fold(1e-3, f64::max);
    let k5 = witnesses.iter().map(|w| w.rate).fold(f64::INFINITY, f64::min);
    CecFit { pass, k1, k2, k3, k4, k5: if k5.is_finite() { k5 } else { 0.0 }, tested, witnesses }
}

/// Evidence for T, ACC(J) and CEC±(J) at the given cell resolution.
pub fn check_blending(sys: &SkewSystem, j: Interval, resolution: usize) -> BlendingReport {
    let res = resolution.max(64);
    let inner = Interval { start: j.start + j.len * 1e-6, len: j.len * (1.0 - 2e-6) };
    let point = Interval { start: j.mid(), len: 1e-9 };
    let inv = sys.inverse();
    let fwd_t = cover(sys, point, res);
    let bwd_t = cover(&inv, point, res);
    let transitivity = AxiomEvidence {
        pass: fwd_t.pass && bwd_t.pass,
        covered: fwd_t.covered.min(bwd_t.covered),
        iterations: fwd_t.iterations.max(bwd_t.iterations),
    };
    BlendingReport {
        interval: j,
        resolution: res,
        transitivity,
        acc_forward: cover(sys, inner, res),
        acc_backward: cover(&inv, inner, res),
        cec_plus: cec(sys, &j),
        cec_minus: cec(&inv, &j),
        note: format!("finite-resolution evidence at {res} cells, not a proof"),
    }
}
