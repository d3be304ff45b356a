//! `hyperdiff` command-line driver.
//!
//! Exit status: 0 on success, 2 when a solve stops before converging, 1 on
//! any error including invalid arguments.

mod commands;
mod config;

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use hyperdiff::{CaseName, DiffusionTensor};

use commands::{Emit, Scheme, Settings, StencilForm, DEFAULT_DT};
use config::FileConfig;

const DEFAULT_N: usize = 100;
const DEFAULT_RATIO: f64 = 1e4;
const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_MAX_STEPS: u64 = 1_000_000;
const DEFAULT_ALPHA_S: f64 = 1.0;
const DEFAULT_H: f64 = 0.01;
const TABLE_CS: [f64; 6] = [0.5, 0.25, 0.1, 0.05, 0.025, 0.01];

#[derive(Parser, Debug)]
#[command(
    name = "hyperdiff",
    version,
    about = "Anisotropic diffusion with a preconditioned hyperbolic scheme"
)]
struct Cli {
    /// `key = value` file; flags and HYPERDIFF_* variables override it
    #[arg(long, global = true, env = "HYPERDIFF_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one case to steady state and write field, profile, speed and report files
    #[command(allow_negative_numbers = true)]
    Run(SolveArgs),
    /// Solve one case for several alpha_s values and write sweep.csv
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Tabulate |alpha~+(C)| with the thresholds and the dt bound
    #[command(allow_negative_numbers = true)]
    Analyze(AnalyzeArgs),
    /// Print the one-step 5x5 stencil of the two-stage update and its monotonicity
    #[command(allow_negative_numbers = true)]
    Stencil(StencilArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Test case: A, B, C or D
    #[arg(long, env = "HYPERDIFF_CASE")]
    case: Option<CaseName>,
    /// Cells in x [default: 100]
    #[arg(long, env = "HYPERDIFF_NX")]
    nx: Option<usize>,
    /// Cells in y [default: nx]
    #[arg(long, env = "HYPERDIFF_NY")]
    ny: Option<usize>,
    /// Anisotropy ratio k_par / k_perp [default: 1e4]
    #[arg(long, env = "HYPERDIFF_RATIO")]
    ratio: Option<f64>,
    /// Field-line angle in radians [default: the case's own]
    #[arg(long, env = "HYPERDIFF_THETA")]
    theta: Option<f64>,
    /// Relaxation parameter [default: 1]
    #[arg(long = "alpha-s", env = "HYPERDIFF_ALPHA_S")]
    alpha_s: Option<f64>,
    /// Pseudo-time step [default: 1e-4; central: stability limit]
    #[arg(long, env = "HYPERDIFF_DT")]
    dt: Option<f64>,
    /// Steady-state tolerance on max|dphi|/dt [default: 1e-8]
    #[arg(long, env = "HYPERDIFF_TOL")]
    tol: Option<f64>,
    /// Step limit [default: 1000000]
    #[arg(long = "max-steps", env = "HYPERDIFF_MAX_STEPS")]
    max_steps: Option<u64>,
    /// hyperbolic, hyperbolic-unrefined or central [default: hyperbolic]
    #[arg(long, env = "HYPERDIFF_SCHEME")]
    scheme: Option<Scheme>,
    /// Output directory [default: hyperdiff-out]
    #[arg(long, env = "HYPERDIFF_OUT")]
    out: Option<PathBuf>,
    /// all, none, or a list of field,profile,speed,report [default: all for run, none for sweep]
    #[arg(long, env = "HYPERDIFF_EMIT")]
    emit: Option<Emit>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Comma-separated alpha_s values
    #[arg(long, value_delimiter = ',', env = "HYPERDIFF_ALPHAS")]
    alphas: Vec<f64>,
}

#[derive(Args, Debug)]
struct TensorArgs {
    /// Anisotropy ratio [default: 1e4]
    #[arg(long, env = "HYPERDIFF_RATIO")]
    ratio: Option<f64>,
    /// Field-line angle in radians [default: pi/4]
    #[arg(long, env = "HYPERDIFF_THETA")]
    theta: Option<f64>,
    /// Pseudo-time step [default: 1e-4]
    #[arg(long, env = "HYPERDIFF_DT")]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    /// Comma-separated C = dt/h values [default: 0.5,0.25,0.1,0.05,0.025,0.01]
    #[arg(long, value_delimiter = ',', env = "HYPERDIFF_CS")]
    cs: Vec<f64>,
    /// Output CSV file [default: stdout]
    #[arg(long, env = "HYPERDIFF_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StencilArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    /// Relaxation parameter [default: 1]
    #[arg(long = "alpha-s", env = "HYPERDIFF_ALPHA_S")]
    alpha_s: Option<f64>,
    /// Mesh spacing [default: 0.01]
    #[arg(long, env = "HYPERDIFF_H", conflicts_with = "c")]
    h: Option<f64>,
    /// Courant number dt/h, instead of --h
    #[arg(long, env = "HYPERDIFF_C")]
    c: Option<f64>,
    /// composed (the implemented update) or display (closed-form coefficients) [default: composed]
    #[arg(long, env = "HYPERDIFF_FORM")]
    form: Option<StencilForm>,
}

/// Flag or environment value, else the config file, else `default`.
fn pick<T>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

fn pick_opt<T>(flag: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => file.get(key)?,
    })
}

fn pick_list(flag: Vec<f64>, file: &FileConfig, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    if !flag.is_empty() {
        return Ok(flag);
    }
    Ok(file.get_list(key)?.unwrap_or_else(|| default.to_vec()))
}

fn settings(a: SolveArgs, file: &FileConfig, default_emit: Emit) -> Result<Settings> {
    let nx = pick(a.nx, file, "nx", DEFAULT_N)?;
    let s = Settings {
        case: pick(a.case, file, "case", CaseName::A)?,
        nx,
        ny: pick(a.ny, file, "ny", nx)?,
        ratio: pick(a.ratio, file, "ratio", DEFAULT_RATIO)?,
        theta: pick_opt(a.theta, file, "theta")?,
        alpha_s: pick(a.alpha_s, file, "alpha_s", DEFAULT_ALPHA_S)?,
        dt: pick_opt(a.dt, file, "dt")?,
        tol: pick(a.tol, file, "tol", DEFAULT_TOL)?,
        max_steps: pick(a.max_steps, file, "max_steps", DEFAULT_MAX_STEPS)?,
        scheme: pick(a.scheme, file, "scheme", Scheme::Hyperbolic)?,
        out: pick(a.out, file, "out", PathBuf::from("hyperdiff-out"))?,
        emit: pick(a.emit, file, "emit", default_emit)?,
    };
    Ok(s)
}

fn tensor(a: &TensorArgs, file: &FileConfig) -> Result<(DiffusionTensor, f64)> {
    let ratio = pick(a.ratio, file, "ratio", DEFAULT_RATIO)?;
    let theta = pick(a.theta, file, "theta", FRAC_PI_4)?;
    let dt = pick(a.dt, file, "dt", DEFAULT_DT)?;
    Ok((DiffusionTensor::from_angle(theta, ratio)?, dt))
}

/// `Ok(false)` means a solve did not converge.
fn dispatch(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Run(a) => commands::run(&settings(a, &file, Emit::ALL)?),
        Command::Sweep(a) => {
            let alphas = pick_list(a.alphas, &file, "alphas", &[])?;
            commands::sweep(&settings(a.solve, &file, Emit::NONE)?, &alphas)
        }
        Command::Analyze(a) => {
            let (t, dt) = tensor(&a.tensor, &file)?;
            let cs = pick_list(a.cs, &file, "cs", &TABLE_CS)?;
            let out = pick_opt(a.out, &file, "out")?;
            commands::analyze(&t, dt, &cs, out.as_deref())?;
            Ok(true)
        }
        Command::Stencil(a) => {
            let (t, dt) = tensor(&a.tensor, &file)?;
            let alpha_s = pick(a.alpha_s, &file, "alpha_s", DEFAULT_ALPHA_S)?;
            let h = match (a.c, pick_opt(a.h, &file, "h")?) {
                (Some(c), _) if c > 0.0 => dt / c,
                (Some(c), _) => bail!("C must be positive, got {c}"),
                (None, h) => h.unwrap_or(DEFAULT_H),
            };
            let form = pick(a.form, &file, "form", StencilForm::Composed)?;
            print!("{}", commands::stencil_text(&t, alpha_s, dt, h, form)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not failures
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
