//! Config-driven experiments. A run validates its TOML config, executes a
//! sequence of stages, writes CSV and JSON outputs and a `manifest.json`
//! holding the resolved config and per-file SHA-256 checksums.
//!
//! Config schema:
//!
//! ```toml
//! seed = 7
//! output_dir = "out"          # optional, relative to the config file
//!
//! [experiment]
//! kind = "furstenberg"        # zero-exponent-path | cauchy-table | furstenberg | lln
//! steps = 1000000             # remaining keys depend on `kind`
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{level_fbar_bounds, lln_check, nu_entropy, Cascade, CascadeConfig, LevelCoupling, TailKind, FORMULA_KICKOFF, FORMULA_LEVEL_GAP};
use crate::circle::{geometric_cascade, sample_mu_n, CifsCertificate, CifsCollection, SkewSystem};
use crate::cocycle::{find_elliptic, furstenberg_families, top_lyapunov};
use crate::error::{Error, Result};
use crate::fbar::{entropy_drift_bound, fbar_coupling_upper, FORMULA_ENTROPY_DRIFT};
use crate::rng::RngStream;
use crate::substitution::SubstitutionMap;
use crate::symdyn::{Alphabet, BernoulliVector};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";

pub const FORMULA_ENTROPY_FLOOR: &str = "entropy-floor";
pub const FORMULA_HALVED_BAND: &str = "halved-spectrum";
pub const FORMULA_LLN: &str = "bernstein-series";
pub const FORMULA_ZERO_EXPONENT: &str = "furstenberg-zero";
pub const FORMULA_POSITIVE_EXPONENT: &str = "furstenberg-positive";

/// A value given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    fn resolve(&self, dir: &Path) -> Result<T> {
        match self {
            Source::Inline(t) => Ok(t.clone()),
            Source::Path(p) => {
                let p = dir.join(p);
                let text = fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroPathConfig {
    pub system: Source<SkewSystem>,
    pub collection: Source<CifsCollection>,
    pub m: Vec<usize>,
    pub l1: f64,
    /// Segment endpoints, one weight per collection word.
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(default = "d_points")]
    pub points: usize,
    /// Levels `0..=levels` are reported.
    #[serde(default = "d_levels")]
    pub levels: usize,
    #[serde(default = "d_orbit_steps")]
    pub steps: usize,
    #[serde(default = "d_entropy_samples")]
    pub entropy_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauchyConfig {
    pub images: Vec<Vec<usize>>,
    pub target_size: usize,
    pub m: Vec<usize>,
    pub k: f64,
    pub tails: TailKind,
    pub p: Vec<f64>,
    #[serde(default = "d_window")]
    pub window: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FurstenbergConfig {
    #[serde(default = "d_lyap_steps")]
    pub steps: usize,
    #[serde(default = "d_lyap_trials")]
    pub trials: usize,
    #[serde(default = "d_half")]
    pub p: Vec<f64>,
    /// Acceptance threshold for the zero-exponent families.
    #[serde(default = "d_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "d_elliptic_depth")]
    pub elliptic_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlnConfig {
    #[serde(default = "d_vectors")]
    pub vectors: usize,
    #[serde(default = "d_alphabet")]
    pub alphabet: usize,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_ell_max")]
    pub ell_max: usize,
    #[serde(default = "d_lln_trials")]
    pub trials: usize,
}

fn d_points() -> usize {
    5
}
fn d_levels() -> usize {
    1
}
fn d_orbit_steps() -> usize {
    20_000
}
fn d_entropy_samples() -> usize {
    2000
}
fn d_window() -> usize {
    1 << 14
}
fn d_trials() -> usize {
    20
}
fn d_lyap_steps() -> usize {
    1_000_000
}
fn d_lyap_trials() -> usize {
    8
}
fn d_half() -> Vec<f64> {
    vec![0.5, 0.5]
}
fn d_zero_tol() -> f64 {
    0.02
}
fn d_elliptic_depth() -> usize {
    4
}
fn d_vectors() -> usize {
    20
}
fn d_alphabet() -> usize {
    2
}
fn d_delta() -> f64 {
    0.1
}
fn d_ell_max() -> usize {
    1000
}
fn d_lln_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    ZeroExponentPath(ZeroPathConfig),
    CauchyTable(CauchyConfig),
    Furstenberg(FurstenbergConfig),
    Lln(LlnConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ZeroExponentPath(_) => "zero-exponent-path",
            Experiment::CauchyTable(_) => "cauchy-table",
            Experiment::Furstenberg(_) => "furstenberg",
            Experiment::Lln(_) => "lln",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Inlines file sources (relative to `dir`) and checks every parameter.
    pub fn resolve(mut self, dir: &Path) -> Result<Self> {
        if let Experiment::ZeroExponentPath(z) = &mut self.experiment {
            z.system = Source::Inline(z.system.resolve(dir)?);
            z.collection = Source::Inline(z.collection.resolve(dir)?);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match &self.experiment {
            Experiment::ZeroExponentPath(z) => {
                let (sys, col) = zero_inputs(z)?;
                if sys.matrices.is_empty() || col.words.is_empty() {
                    return bad("system and collection must be non-empty".into());
                }
                if col.words.iter().flatten().any(|&s| s >= sys.size()) {
                    return bad("collection uses a generator the system does not have".into());
                }
                if z.from.len() != col.words.len() || z.to.len() != col.words.len() {
                    return bad(format!("endpoints need {} weights", col.words.len()));
                }
                BernoulliVector::new(z.from.clone()).map_err(cfg)?;
                BernoulliVector::new(z.to.clone()).map_err(cfg)?;
                if z.points < 2 || z.levels > z.m.len() || z.steps == 0 || z.entropy_samples < 2 || !(z.l1 > 0.0) {
                    return bad("need points >= 2, levels <= len(m), steps >= 1, entropy_samples >= 2, l1 > 0".into());
                }
            }
            Experiment::CauchyTable(c) => {
                cauchy_cascade(c)?;
                let p = BernoulliVector::new(c.p.clone()).map_err(cfg)?;
                if p.alphabet().size != c.images.len() {
                    return bad(format!("p needs {} weights", c.images.len()));
                }
                if c.window == 0 || c.trials < 2 {
                    return bad("need window >= 1 and trials >= 2".into());
                }
            }
            Experiment::Furstenberg(f) => {
                BernoulliVector::new(f.p.clone()).map_err(cfg)?;
                if f.p.len() != 2 || f.steps < 100 || f.trials < 2 || f.elliptic_depth == 0 || !(f.zero_tol > 0.0) {
                    return bad("need |p| = 2, steps >= 100, trials >= 2, elliptic_depth >= 1, zero_tol > 0".into());
                }
            }
            Experiment::Lln(l) => {
                if !(l.delta > 0.0 && l.delta < 1.0) || l.alphabet < 2 || l.vectors == 0 || l.trials == 0 || l.ell_max == 0 {
                    return bad("need 0 < delta < 1, alphabet >= 2 and positive counts".into());
                }
            }
        }
        Ok(())
    }
}

fn cfg(e: Error) -> Error {
    Error::Config(e.to_string())
}

fn zero_inputs(z: &ZeroPathConfig) -> Result<(SkewSystem, CifsCollection)> {
    match (&z.system, &z.collection) {
        (Source::Inline(s), Source::Inline(c)) => Ok((s.clone(), c.clone())),
        _ => Err(Error::Config("unresolved file source".into())),
    }
}

fn cauchy_cascade(c: &CauchyConfig) -> Result<Cascade> {
    let base = SubstitutionMap::new(Alphabet::new(c.target_size).map_err(cfg)?, c.images.clone()).map_err(cfg)?;
    Cascade::new(CascadeConfig { base, m: c.m.clone(), k: c.k, tails: c.tails.clone() }).map_err(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: Status,
    pub error: Option<String>,
    /// SHA-256 over the stage's output files in order.
    pub checksum: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the manifest's directory.
    pub path: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: RunConfig,
    pub seed: u64,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub status: Status,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn csv_outputs(&self) -> impl Iterator<Item = &OutputRecord> {
        self.outputs.iter().filter(|o| o.path.ends_with(".csv"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn sha_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

type Files = Vec<(String, String)>;

struct Runner {
    dir: PathBuf,
    stages: Vec<StageRecord>,
    outputs: Vec<OutputRecord>,
    failed: bool,
}

impl Runner {
    fn stage(&mut self, name: &str, body: impl FnOnce() -> Result<Files>) -> Result<()> {
        if self.failed {
            self.stages.push(StageRecord { name: name.into(), status: Status::Skipped, error: None, checksum: None });
            return Ok(());
        }
        match body() {
            Ok(files) => {
                let mut h = Sha256::new();
                for (file, text) in &files {
                    fs::write(self.dir.join(file), text)?;
                    h.update(text.as_bytes());
                    self.outputs.push(OutputRecord { path: file.clone(), stage: name.into(), sha256: sha_hex(text.as_bytes()) });
                }
                self.stages.push(StageRecord { name: name.into(), status: Status::Ok, error: None, checksum: Some(format!("{:x}", h.finalize())) });
            }
            Err(e) => {
                self.failed = true;
                self.stages.push(StageRecord { name: name.into(), status: Status::Failed, error: Some(e.to_string()), checksum: None });
            }
        }
        Ok(())
    }
}

/// Loads, validates and runs a config file. Validation problems are returned
/// as errors before anything is written; stage failures are recorded in the
/// returned manifest with the outputs of earlier stages kept.
pub fn run_experiment(config_path: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let text = fs::read_to_string(config_path).map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let mut config = RunConfig::from_toml(&text)?.resolve(dir)?;
    let out = match (&overrides.output_dir, &config.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => dir.join(o),
        (None, None) => dir.join("out").join(config.experiment.name()),
    };
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    run_config(config, &out)
}

/// Runs an already resolved config into `out`.
pub fn run_config(config: RunConfig, out: &Path) -> Result<RunManifest> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let started = now();
    let mut runner = Runner { dir: out.to_path_buf(), stages: Vec::new(), outputs: Vec::new(), failed: false };
    let seed = config.seed;
    match &config.experiment {
        Experiment::ZeroExponentPath(z) => zero_path(&mut runner, z, seed)?,
        Experiment::CauchyTable(c) => cauchy_table(&mut runner, c, seed)?,
        Experiment::Furstenberg(f) => furstenberg(&mut runner, f, seed)?,
        Experiment::Lln(l) => lln(&mut runner, l, seed)?,
    }
    let manifest = RunManifest {
        experiment: config.experiment.name().into(),
        seed,
        config,
        code_version: CODE_VERSION.into(),
        started_unix: started,
        finished_unix: now(),
        status: if runner.failed { Status::Failed } else { Status::Ok },
        stages: runner.stages,
        outputs: runner.outputs,
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest).expect("plain data"))?;
    Ok(manifest)
}

/// Re-runs the config stored in a manifest into `out`.
pub fn replay(manifest: &RunManifest, out: &Path) -> Result<RunManifest> {
    run_config(manifest.config.clone(), out)
}

/// CSV files whose checksums differ between two runs (or exist in only one).
pub fn csv_differences(a: &RunManifest, b: &RunManifest) -> Vec<String> {
    let mut diff = Vec::new();
    for o in a.csv_outputs() {
        if !b.csv_outputs().any(|p| p.path == o.path && p.sha256 == o.sha256) {
            diff.push(o.path.clone());
        }
    }
    for o in b.csv_outputs() {
        if !a.csv_outputs().any(|p| p.path == o.path) {
            diff.push(o.path.clone());
        }
    }
    diff
}

fn f(x: f64) -> String {
    format!("{x:.10e}")
}

fn json_rows<T: Serialize>(rows: &T) -> String {
    serde_json::to_string_pretty(rows).expect("plain data")
}

#[derive(Serialize)]
struct PathRow {
    level: usize,
    t: f64,
    entropy: f64,
    entropy_floor: f64,
    exponent: f64,
    exponent_se: f64,
    band: (f64, f64),
    in_band: bool,
    drift_bound: Option<f64>,
    drift_measured: Option<f64>,
    ok: bool,
}

fn zero_path(run: &mut Runner, z: &ZeroPathConfig, seed: u64) -> Result<()> {
    let (sys, col) = zero_inputs(z)?;
    let mut built: Option<(CifsCertificate, Cascade)> = None;
    run.stage("certificate", || {
        let cert = col.verify(&sys)?;
        let cascade = geometric_cascade(&sys, &cert, z.m.clone(), z.l1)?;
        let text = cert.to_json();
        built = Some((cert, cascade));
        Ok(vec![("certificate.json".into(), text)])
    })?;
    let endpoints = (BernoulliVector::new(z.from.clone())?, BernoulliVector::new(z.to.clone())?);
    let vectors: Result<Vec<(f64, BernoulliVector)>> = (0..z.points)
        .map(|i| {
            let t = i as f64 / (z.points - 1) as f64;
            let w: Vec<f64> = endpoints.0.probs().iter().zip(endpoints.1.probs()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            Ok((t, BernoulliVector::from_weights(&w)?))
        })
        .collect();
    let vectors = vectors?;
    let generators = sys.size().max(2) as f64;
    for n in 0..=z.levels {
        run.stage(&format!("level-{n}"), || {
            let (cert, cascade) = built.as_ref().expect("certificate stage succeeded");
            let q = cert.quantifiers.halved(n);
            let band = (q.alpha - q.eps, q.alpha + q.eps);
            let stream = RngStream::new(seed, 1 + n as u64);
            let mut rows: Vec<PathRow> = Vec::new();
            for (i, (t, p)) in vectors.iter().enumerate() {
                let h = nu_entropy(cascade, p, n, z.entropy_samples, stream.split(2 * i as u64))?;
                let orbit = sample_mu_n(&sys, cascade, p, n, z.steps, q.alpha0, stream.split(2 * i as u64 + 1))?;
                let in_band = orbit.exponent > band.0 - 3.0 * orbit.std_error && orbit.exponent < band.1 + 3.0 * orbit.std_error;
                let drift = match rows.last() {
                    Some(prev) => {
                        let cross = level_fbar_bounds(cascade, &vectors[i - 1].1, p, n, n)?.cross_vector;
                        let bound = if cross < 1.0 { entropy_drift_bound(cross, sys.size().max(2))?.min(generators.ln()) } else { generators.ln() };
                        Some((bound, (h.value - prev.entropy).abs()))
                    }
                    None => None,
                };
                let ok = in_band && drift.is_none_or(|(b, m)| m <= b);
                rows.push(PathRow {
                    level: n,
                    t: *t,
                    entropy: h.value,
                    entropy_floor: h.floor,
                    exponent: orbit.exponent,
                    exponent_se: orbit.std_error,
                    band,
                    in_band,
                    drift_bound: drift.map(|d| d.0),
                    drift_measured: drift.map(|d| d.1),
                    ok,
                });
            }
            let mut csv = String::from("level,t,entropy,entropy_floor_formula,entropy_floor,exponent,exponent_se,band_formula,band_lo,band_hi,in_band,formula,bound,measured,ok\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{:.6},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.level,
                    r.t,
                    f(r.entropy),
                    FORMULA_ENTROPY_FLOOR,
                    f(r.entropy_floor),
                    f(r.exponent),
                    f(r.exponent_se),
                    FORMULA_HALVED_BAND,
                    f(r.band.0),
                    f(r.band.1),
                    r.in_band,
                    FORMULA_ENTROPY_DRIFT,
                    r.drift_bound.map_or("".into(), f),
                    r.drift_measured.map_or("".into(), f),
                    r.ok
                );
            }
            Ok(vec![(format!("path_level{n}.csv"), csv), (format!("path_level{n}.json"), json_rows(&rows))])
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CauchyRow {
    k: usize,
    l: usize,
    formula: &'static str,
    bound: f64,
    measured: f64,
    std_error: f64,
    ok: bool,
}

fn cauchy_table(run: &mut Runner, c: &CauchyConfig, seed: u64) -> Result<()> {
    let cascade = cauchy_cascade(c)?;
    let p = BernoulliVector::new(c.p.clone())?;
    run.stage("coupling", || {
        let depth = cascade.depth();
        let mut rows = Vec::new();
        let mut idx = 0u64;
        for k in 0..depth {
            for l in k + 1..=depth {
                let b = level_fbar_bounds(&cascade, &p, &p, k, l)?;
                let e = fbar_coupling_upper(&LevelCoupling { cascade: &cascade, p: &p, k, l }, c.window, c.trials, RngStream::new(seed, idx))?;
                idx += 1;
                let mut push = |formula, bound: f64| {
                    rows.push(CauchyRow { k, l, formula, bound, measured: e.value, std_error: e.std_error, ok: e.value <= bound + 3.0 * e.std_error });
                };
                if k == 0 {
                    push(FORMULA_KICKOFF, b.kickoff);
                }
                push(FORMULA_LEVEL_GAP, b.level_gap);
            }
        }
        let mut csv = String::from("k,l,formula,bound,measured,std_error,ok\n");
        for r in &rows {
            let _ = writeln!(csv, "{},{},{},{},{},{},{}", r.k, r.l, r.formula, f(r.bound), f(r.measured), f(r.std_error), r.ok);
        }
        Ok(vec![("cauchy.csv".into(), csv), ("cauchy.json".into(), json_rows(&rows))])
    })
}

#[derive(Serialize)]
struct FurstenbergRow {
    family: String,
    formula: &'static str,
    values: [f64; 3],
    steps: [usize; 3],
    std_error: f64,
    cross_check: f64,
    flagged: bool,
    decreasing: bool,
    elliptic_witness: Option<Vec<usize>>,
    ok: bool,
}

fn furstenberg(run: &mut Runner, cfg: &FurstenbergConfig, seed: u64) -> Result<()> {
    let p = BernoulliVector::new(cfg.p.clone())?;
    run.stage("exponents", || {
        let steps = [(cfg.steps / 100).max(1), (cfg.steps / 10).max(1), cfg.steps];
        let mut rows = Vec::new();
        for (i, (name, fam)) in furstenberg_families().into_iter().enumerate() {
            let stream = RngStream::new(seed, i as u64);
            let mut est = Vec::new();
            for (j, &s) in steps.iter().enumerate() {
                est.push(top_lyapunov(&fam, &p, s, cfg.trials, stream.split(j as u64))?);
            }
            let last = est[2].clone();
            let values = [est[0].value, est[1].value, last.value];
            let decreasing = values[0] >= values[1] && values[1] >= values[2];
            let zero = name != "transverse-hyperbolic";
            let ok = if zero { last.value <= cfg.zero_tol } else { last.value > 5.0 * last.std_error };
            rows.push(FurstenbergRow {
                family: name.into(),
                formula: if zero { FORMULA_ZERO_EXPONENT } else { FORMULA_POSITIVE_EXPONENT },
                values,
                steps,
                std_error: last.std_error,
                cross_check: last.cross_check,
                flagged: last.flagged,
                decreasing,
                elliptic_witness: find_elliptic(&fam, cfg.elliptic_depth),
                ok,
            });
        }
        let mut csv = String::from("family,formula,bound,measured,std_error,value_short,value_mid,steps,decreasing,cross_check,flagged,elliptic_witness,ok\n");
        for r in &rows {
            let bound = if r.formula == FORMULA_ZERO_EXPONENT { cfg.zero_tol } else { 5.0 * r.std_error };
            let witness = r.elliptic_witness.as_ref().map_or("none".into(), |w| w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "));
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.family,
                r.formula,
                f(bound),
                f(r.values[2]),
                f(r.std_error),
                f(r.values[0]),
                f(r.values[1]),
                r.steps[2],
                r.decreasing,
                f(r.cross_check),
                r.flagged,
                witness,
                r.ok
            );
        }
        Ok(vec![("furstenberg.csv".into(), csv), ("furstenberg.json".into(), json_rows(&rows))])
    })
}

#[derive(Serialize)]
struct LlnRow {
    index: usize,
    p: Vec<f64>,
    l: f64,
    series: f64,
    mass: f64,
    bound: f64,
    ok: bool,
}

fn lln(run: &mut Runner, cfg: &LlnConfig, seed: u64) -> Result<()> {
    run.stage("masses", || {
        let mut r = RngStream::new(seed, 0).rng();
        let mut rows = Vec::new();
        for i in 0..cfg.vectors {
            let p = BernoulliVector::random(cfg.alphabet, &mut r);
            let rep = lln_check(&p, cfg.ell_max, cfg.delta, cfg.trials, RngStream::new(seed, 1 + i as u64))?;
            let bound = 1.0 - cfg.delta;
            rows.push(LlnRow { index: i, p: p.probs().to_vec(), l: rep.l, series: rep.series, mass: rep.good_mass, bound, ok: rep.good_mass >= bound });
        }
        let mut csv = String::from("index,p,L,series,formula,bound,measured,ok\n");
        for r in &rows {
            let p: Vec<String> = r.p.iter().map(|x| format!("{x:.8}")).collect();
            let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", r.index, p.join(";"), f(r.l), f(r.series), FORMULA_LLN, f(r.bound), f(r.mass), r.ok);
        }
        Ok(vec![("lln.csv".into(), csv), ("lln.json".into(), json_rows(&rows))])
    })
}

/// Renders every CSV output of a manifest as an aligned table. `dir` is the
/// directory holding the manifest.
pub fn emit_report(manifest: &RunManifest, dir: &Path) -> Result<String> {
    if manifest.csv_outputs().next().is_none() {
        return Err(Error::MissingOutputs("manifest lists no CSV outputs".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "experiment {} | seed {} | {} | status {:?}", manifest.experiment, manifest.seed, manifest.code_version, manifest.status);
    for s in &manifest.stages {
        let _ = writeln!(out, "  stage {:<12} {:?}{}", s.name, s.status, s.error.as_ref().map_or(String::new(), |e| format!(": {e}")));
    }
    for o in manifest.csv_outputs() {
        let path = dir.join(&o.path);
        let text = fs::read_to_string(&path).map_err(|_| Error::MissingOutputs(path.display().to_string()))?;
        let _ = writeln!(out, "\n{}", o.path);
        if sha_hex(text.as_bytes()) != o.sha256 {
            let _ = writeln!(out, "  checksum mismatch");
        }
        let cells: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
        let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
        let width: Vec<usize> = (0..cols).map(|c| cells.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
        for row in &cells {
            let line: Vec<String> = row.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = width[c])).collect();
            let _ = writeln!(out, "  {}", line.join("  ").trim_end());
        }
        if let Some(ok_col) = cells.first().and_then(|h| h.iter().position(|&c| c == "ok")) {
            let body = &cells[1..];
            let good = body.iter().filter(|r| r.get(ok_col) == Some(&"true")).count();
            let _ = writeln!(out, "  {good}/{} rows OK", body.len());
        }
    }
    Ok(out)
}
