//! Command-line front end: `zeromode [flags] <gauge|spectrum|sweep|perturb|validate>`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 computation or validation
//! failure. `ZEROMODE_THREADS` sets the worker thread count.

pub mod commands;
pub mod config;
pub mod output;
pub mod suites;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{cmd_gauge, cmd_perturb, cmd_spectrum, cmd_sweep, cmd_validate, Payload, ResultRecord};
pub use config::{ConfigError, Overrides, RunConfig};

use crate::error::Result;

pub const THREADS_VAR: &str = "ZEROMODE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "zeromode", version, about = "Zero modes of Pauli operators on a periodic box")]
struct Args {
    /// TOML configuration file; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid points per axis.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    /// Half width of the box [-L, L)^3.
    #[arg(long = "box", global = true, value_name = "L")]
    half_width: Option<f64>,
    /// Coupling range A:B:STEP, or a single coupling T.
    #[arg(long = "t", global = true, value_name = "A:B:STEP")]
    coupling: Option<String>,
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
enum Command {
    /// Coulomb gauge of the configured field, with residuals.
    Gauge,
    /// Spectrum, nullity and Birman–Schwinger eigenvalues at one coupling.
    Spectrum,
    /// Coupling sweep with zero-mode detection.
    Sweep,
    /// Random perturbations of the field at t = 1.
    Perturb,
    /// Property suites.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gauge => "gauge",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Perturb => "perturb",
            Command::Validate => "validate",
        }
    }
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("configuration error: {e}");
    ExitCode::from(1)
}

fn effective_config(args: &Args) -> std::result::Result<RunConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let coupling = args.coupling.as_deref().map(config::parse_coupling).transpose()?;
    Overrides {
        out: args.out.clone(),
        points: args.grid,
        half_width: args.half_width,
        coupling,
        seed: args.seed,
    }
    .apply(&mut cfg);
    cfg.materialize()
}

fn configure_threads() -> std::result::Result<(), ConfigError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new(THREADS_VAR, format!("expected a positive integer, got `{value}`")))?;
    // A pool that already exists (tests, embedding) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run_command(name: &str, cfg: &RunConfig) -> Result<ResultRecord> {
    match name {
        "gauge" => cmd_gauge(cfg),
        "spectrum" => cmd_spectrum(cfg),
        "sweep" => cmd_sweep(cfg),
        "perturb" => cmd_perturb(cfg),
        "validate" => cmd_validate(cfg),
        other => Err(crate::error::Error::InvalidArgument(format!("unknown command `{other}`"))),
    }
}

/// Writes the record and its companion files under `dir`; returns the
/// record path.
pub fn persist(record: &mut ResultRecord, dir: &Path) -> Result<PathBuf> {
    let stem = output::unique_stem(dir, &record.command);
    let base = stem.file_name().expect("stem has a name").to_string_lossy().into_owned();
    if let Some(Payload::Sweep(sweep)) = &mut record.payload {
        let k = record.config.solver.bs_k;
        let csv = format!("{base}.csv");
        output::atomic_write(&dir.join(&csv), output::sweep_csv(&sweep.records, k).as_bytes())?;
        let plot = format!("{base}.gp");
        let script = output::gnuplot_script(&csv, &format!("{base}.png"), k, &sweep.detections);
        output::atomic_write(&dir.join(&plot), script.as_bytes())?;
        record.files.extend([csv, plot]);
        if record.config.output.eigenvectors {
            for (i, det) in sweep.detections.iter_mut().enumerate() {
                let mut names = Vec::new();
                for (j, psi) in det.eigenvectors.iter().enumerate() {
                    let name = format!("{base}-detection{i}-mode{j}.bin");
                    output::atomic_write(&dir.join(&name), &output::spinor_bytes(psi))?;
                    names.push(name);
                }
                if !names.is_empty() {
                    det.snapshot = Some(names.join(","));
                }
                record.files.extend(names);
            }
        }
    }
    let path = stem.with_extension("json");
    let json = serde_json::to_string_pretty(record).expect("records serialize");
    output::atomic_write(&path, json.as_bytes())?;
    Ok(path)
}

fn summary(record: &ResultRecord) -> String {
    let mut lines = Vec::new();
    match &record.payload {
        Some(Payload::Gauge(g)) => lines.push(format!(
            "curl residual {:.3e}, div residual {:.3e}, ‖B‖_3/2 = {:.6}",
            g.gauge.curl_residual, g.gauge.relative_div_residual, g.b_l32_norm
        )),
        Some(Payload::Spectrum(s)) => lines.push(format!(
            "t = {}: lambda_min = {:?}, lambda_loc = {:?}, nullity = {:?}, bs_top = {:?}",
            s.t, s.record.lambda_min, s.record.lambda_loc, s.record.nullity, s.record.bs_top
        )),
        Some(Payload::Sweep(s)) => {
            lines.push(format!("{} points, {} detections", s.records.len(), s.detections.len()));
            for d in &s.detections {
                lines.push(format!(
                    "  t* = {:.4} in [{:.4}, {:.4}], multiplicity {}, consistent {}",
                    d.t_star, d.bracket.0, d.bracket.1, d.multiplicity, d.consistent
                ));
            }
        }
        Some(Payload::Perturb(p)) => {
            for r in &p.reports {
                lines.push(format!(
                    "trial {}: nullity {:?} -> {:?}, lambda_min {:?} -> {:?}",
                    r.trial, r.nullity_before, r.nullity_after, r.lambda_min_before, r.lambda_min_after
                ));
            }
        }
        Some(Payload::Validate(v)) => {
            for s in &v.suites {
                let verdict = if s.passed { "pass" } else { "FAIL" };
                lines.push(format!("{verdict} {}: worst {:.3e} (threshold {:.3e})", s.name, s.worst, s.threshold));
            }
        }
        None => {}
    }
    lines.join("\n")
}

/// Full command-line behavior; `main` forwards `std::env::args_os()`.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        return config_failure(&e);
    }
    let cfg = match effective_config(&args) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    if args.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = args.command else {
        return config_failure(&ConfigError::new("", "no subcommand given (gauge, spectrum, sweep, perturb, validate)"));
    };
    let mut record = match run_command(command.name(), &cfg) {
        Ok(r) => r,
        Err(e) => {
            let mut r = ResultRecord::new(command.name(), &cfg);
            r.ok = false;
            r.message = Some(e.to_string());
            r
        }
    };
    let path = match persist(&mut record, &cfg.output.dir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot write results: {e}");
            return ExitCode::from(2);
        }
    };
    let text = summary(&record);
    if !text.is_empty() {
        println!("{text}");
    }
    println!("record: {}", path.display());
    if record.ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} failed: {}", record.command, record.message.as_deref().unwrap_or("unknown error"));
        ExitCode::from(2)
    }
}
