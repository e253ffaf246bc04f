use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lbzero::circle::{CifsCollection, SkewSystem};
use lbzero::cocycle::{top_lyapunov, CocycleFamily, LyapunovEstimate};
use lbzero::fbar::edit_distance_slices;
use lbzero::lab::{self, Overrides, RunManifest, Status, MANIFEST_FILE};
use lbzero::{BernoulliVector, Error, RngStream};

const VALIDATION: u8 = 2;
const FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "lbzero", version, about = "Finite-scale experiments on zero-exponent measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (TOML), or replay a manifest (JSON).
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a finished run.
    Report { manifest: PathBuf },
    /// Edit distance of the first n symbols of two sequences.
    Fbar {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Top Lyapunov exponent of a matrix family under a Bernoulli drive.
    Lyap {
        family: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated weights; uniform when omitted.
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        csv: bool,
    },
    /// Check a word collection against the CIFS conditions.
    CifsVerify { system: PathBuf, collection: PathBuf },
}

/// Exit status for a library error: bad input is a validation error,
/// everything else a failed computation.
fn code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::AlphabetMismatch(_) | Error::Io(_) => VALIDATION,
        _ => FAILURE,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Symbols as a JSON array or separated by whitespace/commas.
fn read_symbols(path: &Path) -> Result<Vec<usize>, Error> {
    let text = read(path)?;
    if let Ok(v) = serde_json::from_str::<Vec<usize>>(&text) {
        return Ok(v);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidArgument(format!("{}: bad symbol {s:?}", path.display()))))
        .collect()
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<u8, Error> {
    let manifest = if config.extension().is_some_and(|e| e == "json") {
        let old = RunManifest::load(config)?;
        let mut cfg = old.config.clone();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let out = out.unwrap_or_else(|| config.parent().unwrap_or(Path::new(".")).join("replay"));
        let new = lab::run_config(cfg, &out)?;
        let diff = lab::csv_differences(&old, &new);
        if diff.is_empty() {
            println!("replay reproduced all CSV outputs byte for byte");
        } else {
            println!("replay differs in: {}", diff.join(", "));
        }
        println!("{}", out.join(MANIFEST_FILE).display());
        new
    } else {
        lab::run_experiment(config, &Overrides { seed, output_dir: out })?
    };
    for s in &manifest.stages {
        if let Some(e) = &s.error {
            eprintln!("stage {} failed: {e}", s.name);
        }
    }
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, o.path);
    }
    Ok(if manifest.status == Status::Ok { 0 } else { FAILURE })
}

fn report(path: &Path) -> Result<u8, Error> {
    let m = RunManifest::load(path)?;
    let text = lab::emit_report(&m, path.parent().unwrap_or(Path::new(".")))?;
    print!("{text}");
    Ok(0)
}

fn fbar(a: &Path, b: &Path, n: Option<usize>) -> Result<u8, Error> {
    let (a, b) = (read_symbols(a)?, read_symbols(b)?);
    let n = n.unwrap_or(a.len().min(b.len()));
    if n == 0 || n > a.len() || n > b.len() {
        return Err(Error::InvalidArgument(format!("n = {n} with sequence lengths {} and {}", a.len(), b.len())));
    }
    println!("{}", edit_distance_slices(&a[..n], &b[..n]));
    Ok(0)
}

fn lyap(family: &Path, steps: usize, trials: usize, seed: u64, p: Option<String>, csv: bool) -> Result<u8, Error> {
    let fam = CocycleFamily::from_json(&read(family)?)?;
    let p = match p {
        None => BernoulliVector::uniform(fam.size()),
        Some(s) => {
            let w: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
            BernoulliVector::from_weights(&w.map_err(|e| Error::InvalidArgument(format!("--p: {e}")))?)?
        }
    };
    let e = top_lyapunov(&fam, &p, steps, trials, RngStream::new(seed, 0))?;
    if csv {
        println!("{}\n{}", LyapunovEstimate::CSV_HEADER, e.csv_row());
    } else {
        println!("{}", serde_json::to_string_pretty(&e).expect("plain data"));
    }
    Ok(if e.flagged { FAILURE } else { 0 })
}

fn cifs_verify(system: &Path, collection: &Path) -> Result<u8, Error> {
    let sys = SkewSystem::from_json(&read(system)?)?;
    let col = CifsCollection::from_json(&read(collection)?)?;
    let cert = col.verify(&sys)?;
    println!("{}", cert.to_json());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Report { manifest } => report(&manifest),
        Command::Fbar { file_a, file_b, n } => fbar(&file_a, &file_b, n),
        Command::Lyap { family, steps, trials, seed, p, csv } => lyap(&family, steps, trials, seed, p, csv),
        Command::CifsVerify { system, collection } => cifs_verify(&system, &collection),
    };
    match result {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code(&e))
        }
    }
}
