//! Command-line driver: prelimit path simulation, limit path sampling and the
//! named verification checks.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 failed verification.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gwi_core::checks::{self, CheckOptions, CHECK_NAMES};
use gwi_core::gw::FluidConfig;
use gwi_core::gwi::{normalized_observable, GwiRun};
use gwi_core::limit::{self, PrmParams, ShotNoiseSpec};
use gwi_core::rng::{replicate_seed, stream};
use gwi_core::{ImmigrationLaw, OffspringFamily};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "gwisim", version, about = "Galton-Watson processes with very active immigration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate normalized prelimit paths log⁺(Y_[nt]) / norm.
    Simulate(Common),
    /// Sample extremal shot noise limit paths.
    LimitSample(Common),
    /// Run a named verification check.
    Verify {
        /// One of the registered check names.
        check: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Strict mode: the seed must be explicit.
    #[arg(long)]
    ci: bool,
}

enum Failure {
    Usage(String),
    Io(String),
    Verify(String),
}

impl From<gwi_core::Error> for Failure {
    fn from(e: gwi_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Norm {
    /// Divide by `n`.
    #[default]
    N,
    /// Divide by the norming constant `b_n` of the immigration law.
    Bn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    n: u64,
    horizon: f64,
    family: OffspringFamily,
    law: ImmigrationLaw,
    #[serde(default)]
    fluid: FluidConfig,
    #[serde(default)]
    norm: Norm,
    /// Multiply `Y_m` by `μ^{-m}` before taking `log⁺`.
    #[serde(default)]
    supercritical_correction: bool,
    seed: Option<u64>,
    replicates: Option<usize>,
    output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitConfig {
    a: f64,
    b: f64,
    slope: f64,
    horizon: f64,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    seed: Option<u64>,
    replicates: Option<usize>,
    output: Option<PathBuf>,
}

fn default_delta() -> f64 {
    limit::DEFAULT_DELTA
}

fn default_grid_points() -> usize {
    1000
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    seed: Option<u64>,
    replicates: Option<usize>,
    output: Option<PathBuf>,
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>, ci: bool) -> CliResult<u64> {
    match flag.or(config) {
        Some(s) => Ok(s),
        None if ci => Err(Failure::Usage("--ci requires an explicit seed".into())),
        None => {
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0);
            Ok(nanos)
        }
    }
}

fn resolve_replicates(flag: Option<usize>, config: Option<usize>) -> CliResult<usize> {
    match flag.or(config).unwrap_or(1) {
        0 => Err(Failure::Usage("replicates must be at least 1".into())),
        r => Ok(r),
    }
}

fn resolve_out(flag: &Option<PathBuf>, config: Option<PathBuf>, fallback: &str) -> PathBuf {
    flag.clone().or(config).unwrap_or_else(|| PathBuf::from(fallback))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with sorted keys and a trailing newline.
fn to_json(value: &Value) -> String {
    // serde_json's default map is ordered by key
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn metadata(command: &str, seed: u64, replicates: usize, params: Value) -> Value {
    json!({
        "command": command,
        "params": params,
        "replicate_count": replicates,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    builder.build().map_err(|e| Failure::Usage(format!("cannot start worker threads: {e}")))
}

fn csv_rows(out: &mut String, replicate: usize, times: &[f64], values: &[f64]) {
    use std::fmt::Write;
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{replicate},{t},{v}");
    }
}

fn simulate(c: &Common) -> CliResult<()> {
    let path = c.config.as_ref().ok_or_else(|| Failure::Usage("simulate needs --config".into()))?;
    let cfg: SimulateConfig = read_config(path)?;
    let seed = resolve_seed(c.seed, cfg.seed, c.ci)?;
    let reps = resolve_replicates(c.replicates, cfg.replicates)?;
    let out = resolve_out(&c.out, cfg.output.clone(), "simulate");
    let base = GwiRun { n: cfg.n, horizon: cfg.horizon, family: cfg.family, law: cfg.law, config: cfg.fluid, seed };
    base.validate()?;
    let norm = match cfg.norm {
        Norm::N => cfg.n as f64,
        Norm::Bn => cfg.law.norming_bn(cfg.n)?,
    };
    let correction = cfg.supercritical_correction.then(|| cfg.family.mean());
    let last = base.last_index();
    let times: Vec<f64> = (0..=last).map(|m| m as f64 / cfg.n as f64).collect();

    let pool = thread_pool(c.jobs)?;
    let levels = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let run = GwiRun { seed: replicate_seed(seed, r as u64), ..base.clone() };
                let y = run.simulate_y_path()?;
                let path = normalized_observable(&y, norm, cfg.n, correction)?;
                Ok(path.sample(&times))
            })
            .collect::<Result<Vec<Vec<f64>>, gwi_core::Error>>()
    })?;

    let mut csv = String::from("replicate,t,value\n");
    for (r, values) in levels.iter().enumerate() {
        csv_rows(&mut csv, r, &times, values);
    }
    let params = json!({
        "family": cfg.family,
        "fluid": cfg.fluid,
        "horizon": cfg.horizon,
        "law": cfg.law,
        "n": cfg.n,
        "norm": cfg.norm,
        "norm_value": norm,
        "supercritical_correction": cfg.supercritical_correction,
    });
    write_file(&with_suffix(&out, ".csv"), &csv)?;
    write_file(&with_suffix(&out, ".json"), &to_json(&metadata("simulate", seed, reps, params)))
}

fn limit_sample(c: &Common) -> CliResult<()> {
    let path = c.config.as_ref().ok_or_else(|| Failure::Usage("limit-sample needs --config".into()))?;
    let cfg: LimitConfig = read_config(path)?;
    let seed = resolve_seed(c.seed, cfg.seed, c.ci)?;
    let reps = resolve_replicates(c.replicates, cfg.replicates)?;
    let out = resolve_out(&c.out, cfg.output.clone(), "limit");
    let params = PrmParams::new(cfg.a, cfg.b, cfg.horizon, cfg.delta)?;
    if !cfg.slope.is_finite() {
        return Err(Failure::Usage(format!("slope must be finite, got {}", cfg.slope)));
    }
    if cfg.grid_points == 0 {
        return Err(Failure::Usage("grid_points must be at least 1".into()));
    }
    let g = cfg.grid_points;
    let times: Vec<f64> = (0..=g).map(|k| cfg.horizon * k as f64 / g as f64).collect();

    let pool = thread_pool(c.jobs)?;
    let sampled = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let atoms = limit::sample_atoms(&params, &mut stream(replicate_seed(seed, r as u64), 0))?;
                let spec = ShotNoiseSpec { slope: cfg.slope, atoms };
                let values = spec.path(&times)?.sample(&times);
                Ok((spec.atoms, values))
            })
            .collect::<Result<Vec<_>, gwi_core::Error>>()
    })?;

    if cfg.slope == 0.0 {
        for (r, (_, values)) in sampled.iter().enumerate() {
            if values.windows(2).any(|w| w[1] < w[0]) {
                return Err(Failure::Verify(format!("replicate {r}: extremal path is not nondecreasing")));
            }
        }
    }

    let mut csv = String::from("replicate,t,value\n");
    let mut atom_lists = Vec::with_capacity(reps);
    for (r, (atoms, values)) in sampled.iter().enumerate() {
        csv_rows(&mut csv, r, &times, values);
        atom_lists.push(json!({ "atom_count": atoms.len(), "atoms": atoms.atoms, "replicate": r }));
    }
    let meta_params = json!({
        "a": cfg.a,
        "b": cfg.b,
        "delta": cfg.delta,
        "grid_points": g,
        "horizon": cfg.horizon,
        "slope": cfg.slope,
    });
    write_file(&with_suffix(&out, ".csv"), &csv)?;
    write_file(&with_suffix(&out, ".atoms.json"), &to_json(&json!({ "replicates": atom_lists })))?;
    write_file(&with_suffix(&out, ".json"), &to_json(&metadata("limit-sample", seed, reps, meta_params)))
}

fn verify(check: &str, c: &Common) -> CliResult<()> {
    if !CHECK_NAMES.contains(&check) {
        return Err(Failure::Usage(format!("unknown check {check:?}; known: {}", CHECK_NAMES.join(", "))));
    }
    let cfg: VerifyConfig = match &c.config {
        Some(p) => read_config(p)?,
        None => VerifyConfig::default(),
    };
    let seed = resolve_seed(c.seed, cfg.seed, c.ci)?;
    let opts = CheckOptions { seed, replicates: c.replicates.or(cfg.replicates) };
    if opts.replicates == Some(0) {
        return Err(Failure::Usage("replicates must be at least 1".into()));
    }
    let out = c.out.clone().or(cfg.output);
    let pool = thread_pool(c.jobs)?;
    let report = pool.install(|| checks::run_check(check, &opts))?;
    let value = serde_json::to_value(&report).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = to_json(&value);
    match out {
        Some(prefix) => write_file(&with_suffix(&prefix, ".json"), &text)?,
        None => print!("{text}"),
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "check {check} failed: statistic {} above threshold {}",
            report.statistic, report.threshold
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::LimitSample(c) => limit_sample(c),
        Command::Verify { check, common } => verify(check, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
