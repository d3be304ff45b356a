//! The four subcommands and their file outputs.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use hyperdiff::central::{central_dt_limit, central_solve_steady};
use hyperdiff::dmp::{
    alpha_thresholds, analysis_rows, composed_stencil, dt_bound, effective_stencil,
    monotonicity_report,
};
use hyperdiff::{
    solve_steady, CaseName, CaseSpec, ConvergenceHistory, DiffusionTensor, DmpReport, FieldState,
    GridSpec, HyperScheme, SolverConfig,
};
use rayon::prelude::*;
use serde::Serialize;

/// Absolute slack on the bounds when judging the DMP.
pub const DMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Hyperbolic,
    HyperbolicUnrefined,
    Central,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

/// Which stencil `stencil` prints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StencilForm {
    /// Exact one-step map of the implemented two-stage update.
    Composed,
    /// Closed-form coefficient display; equal to `composed` at α_s = 1.
    Display,
}

impl FromStr for StencilForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// Files written per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Emit {
    pub field: bool,
    pub profile: bool,
    pub speed: bool,
    pub report: bool,
}

impl Emit {
    pub const ALL: Emit = Emit {
        field: true,
        profile: true,
        speed: true,
        report: true,
    };
    pub const NONE: Emit = Emit {
        field: false,
        profile: false,
        speed: false,
        report: false,
    };

    fn any(&self) -> bool {
        self.field || self.profile || self.speed || self.report
    }
}

impl FromStr for Emit {
    type Err = String;

    /// `all`, `none`, or a comma list of `field`, `profile`, `speed`, `report`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut emit = Emit::NONE;
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "all" => emit = Emit::ALL,
                "none" => {}
                "field" => emit.field = true,
                "profile" => emit.profile = true,
                "speed" => emit.speed = true,
                "report" => emit.report = true,
                other => return Err(format!("unknown emit item '{other}'")),
            }
        }
        Ok(emit)
    }
}

/// Fully resolved settings of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub case: CaseName,
    pub nx: usize,
    pub ny: usize,
    pub ratio: f64,
    /// Field-line angle in radians; `None` keeps the case default.
    pub theta: Option<f64>,
    pub alpha_s: f64,
    /// `None` selects 1e-4 for the hyperbolic schemes and the explicit
    /// stability limit for the central scheme.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_steps: u64,
    pub scheme: Scheme,
    pub out: PathBuf,
    pub emit: Emit,
}

pub const DEFAULT_DT: f64 = 1e-4;

impl Settings {
    pub fn build_case(&self) -> Result<CaseSpec> {
        let grid = GridSpec::new(self.nx, self.ny)?;
        let case = CaseSpec::build(self.case, grid, self.ratio, self.theta)?;
        case.validate()?;
        Ok(case)
    }

    fn angle(&self) -> Option<f64> {
        self.theta.or(self.case.default_angle())
    }
}

/// Steady solve together with what was actually used.
pub struct Solved {
    pub state: FieldState,
    pub history: ConvergenceHistory,
    pub dt: f64,
    pub dmp: DmpReport,
}

pub fn solve(case: &CaseSpec, s: &Settings) -> Result<Solved> {
    let (state, history, dt) = match s.scheme {
        Scheme::Central => {
            let dt = s.dt.unwrap_or_else(|| central_dt_limit(case));
            let (state, history) = central_solve_steady(case, dt, s.tol, s.max_steps)?;
            (state, history, dt)
        }
        Scheme::Hyperbolic | Scheme::HyperbolicUnrefined => {
            let scheme = if s.scheme == Scheme::Hyperbolic {
                HyperScheme::Refined
            } else {
                HyperScheme::Unrefined
            };
            let dt = s.dt.unwrap_or(DEFAULT_DT);
            let cfg = SolverConfig::new(s.alpha_s, dt)
                .with_tol(s.tol)
                .with_max_steps(s.max_steps)
                .with_scheme(scheme);
            let (state, history) = solve_steady(case, &cfg)?;
            (state, history, dt)
        }
    };
    let (lo, hi) = case.bounds;
    let dmp = state.dmp_report(lo, hi, DMP_TOL);
    Ok(Solved {
        state,
        history,
        dt,
        dmp,
    })
}

#[derive(Debug, Serialize)]
struct GridReport {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

#[derive(Debug, Serialize)]
struct RunReport {
    case: String,
    scheme: Scheme,
    grid: GridReport,
    ratio: f64,
    theta: Option<f64>,
    /// Absent for the central scheme, which has no relaxation parameter.
    alpha_s: Option<f64>,
    dt: f64,
    tol: f64,
    max_steps: u64,
    steps: u64,
    final_residual: f64,
    converged: bool,
    bounds: (f64, f64),
    dmp_tol: f64,
    #[serde(flatten)]
    dmp: DmpReport,
    /// `max |φ − (1 − x)|` for the isotropic Case A, whose exact solution is linear.
    #[serde(skip_serializing_if = "Option::is_none")]
    isotropic_linear_error: Option<f64>,
}

fn run_report(case: &CaseSpec, s: &Settings, solved: &Solved) -> RunReport {
    let g = case.grid;
    let isotropic_linear_error = (s.case == CaseName::A && s.ratio == 1.0).then(|| {
        g.coordinates()
            .map(|(i, j)| (solved.state.phi_at(i, j) - (1.0 - g.x(i))).abs())
            .fold(0.0, f64::max)
    });
    RunReport {
        case: case.name.clone(),
        scheme: s.scheme,
        grid: GridReport {
            nx: g.nx(),
            ny: g.ny(),
            hx: g.hx(),
            hy: g.hy(),
        },
        ratio: s.ratio,
        theta: s.angle(),
        alpha_s: (s.scheme != Scheme::Central).then_some(s.alpha_s),
        dt: solved.dt,
        tol: s.tol,
        max_steps: s.max_steps,
        steps: solved.history.steps,
        final_residual: solved.history.final_residual,
        converged: solved.history.converged,
        bounds: case.bounds,
        dmp_tol: DMP_TOL,
        dmp: solved.dmp,
        isotropic_linear_error,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_outputs(dir: &Path, case: &CaseSpec, s: &Settings, solved: &Solved) -> Result<()> {
    if !s.emit.any() {
        return Ok(());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let emit = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
    };
    let state = &solved.state;
    if s.emit.field {
        emit("field.csv", &|w| state.write_field_csv(w))?;
    }
    if s.emit.profile {
        emit("profile.csv", &|w| state.write_profile_csv(w))?;
    }
    if s.emit.speed {
        emit("speed.csv", &|w| state.write_speed_csv(w))?;
    }
    if s.emit.report {
        let report = run_report(case, s, solved);
        emit("report.json", &|w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)
        })?;
    }
    Ok(())
}

/// Solves one case and writes the requested files. Returns whether the
/// solve converged.
pub fn run(s: &Settings) -> Result<bool> {
    let case = s.build_case()?;
    let solved = solve(&case, s)?;
    write_outputs(&s.out, &case, s, &solved)?;
    let d = &solved.dmp;
    println!(
        "case {} scheme {} steps {} residual {:e} converged {} min {:e} max {:e} dmp {}",
        case.name,
        s.scheme,
        solved.history.steps,
        solved.history.final_residual,
        solved.history.converged,
        d.min_phi,
        d.max_phi,
        if d.satisfied { "satisfied" } else { "violated" }
    );
    Ok(solved.history.converged)
}

struct SweepRow {
    alpha_s: f64,
    outcome: Result<(u64, f64, bool, DmpReport)>,
}

/// Directory name for one sweep member, e.g. `alpha_0.5`.
pub fn alpha_dir(alpha_s: f64) -> String {
    format!("alpha_{alpha_s}")
}

/// Runs one solve per `α_s` and writes `sweep.csv` sorted by `α_s`.
/// Failed runs keep their row with the error message. Returns whether
/// every run converged.
pub fn sweep(s: &Settings, alphas: &[f64]) -> Result<bool> {
    if alphas.is_empty() {
        bail!("sweep needs at least one alpha_s (--alphas)");
    }
    let case = s.build_case()?;
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let rows: Vec<SweepRow> = alphas
        .par_iter()
        .map(|&alpha_s| {
            let member = Settings {
                alpha_s,
                ..s.clone()
            };
            let outcome = solve(&case, &member).and_then(|solved| {
                write_outputs(&s.out.join(alpha_dir(alpha_s)), &case, &member, &solved)?;
                let h = &solved.history;
                Ok((h.steps, h.final_residual, h.converged, solved.dmp))
            });
            SweepRow { alpha_s, outcome }
        })
        .collect();

    fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let path = s.out.join("sweep.csv");
    let mut w = create(&path)?;
    writeln!(w, "alpha_s,min_phi,max_phi,undershoot,overshoot,satisfied,steps,final_residual,converged,error")?;
    let mut all_converged = true;
    for row in &rows {
        match &row.outcome {
            Ok((steps, residual, converged, d)) => {
                all_converged &= converged;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},",
                    row.alpha_s,
                    d.min_phi,
                    d.max_phi,
                    d.undershoot,
                    d.overshoot,
                    d.satisfied,
                    steps,
                    residual,
                    converged
                )?;
                println!(
                    "alpha_s {} min {:e} max {:e} dmp {} converged {}",
                    row.alpha_s,
                    d.min_phi,
                    d.max_phi,
                    if d.satisfied { "satisfied" } else { "violated" },
                    converged
                );
            }
            Err(e) => {
                all_converged = false;
                let msg = format!("{e:#}").replace('"', "'");
                writeln!(w, "{},,,,,,,,false,\"{msg}\"", row.alpha_s)?;
                println!("alpha_s {} error: {msg}", row.alpha_s);
            }
        }
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(all_converged)
}

/// `|α̃+(C)|` table with a `#` header carrying `α±` and the `Δt` bound.
pub fn analyze_table(tensor: &DiffusionTensor, dt: f64, cs: &[f64]) -> Result<String> {
    if cs.is_empty() {
        bail!("analyze needs at least one C value (--cs)");
    }
    let t = alpha_thresholds(tensor, dt)?;
    let mut out = format!(
        "# alpha_minus={:e} alpha_plus={:e} dt_bound={:e}\nC,h,abs_alpha_tilde_plus,error\n",
        t.alpha_minus,
        t.alpha_plus,
        dt_bound(tensor)
    );
    for row in analysis_rows(tensor, dt, cs) {
        match row.alpha_tilde_plus {
            Ok(a) => out.push_str(&format!("{},{:e},{:.10},\n", row.c, row.h, a)),
            Err(e) => out.push_str(&format!("{},{:e},,\"{e}\"\n", row.c, row.h)),
        }
    }
    Ok(out)
}

pub fn analyze(tensor: &DiffusionTensor, dt: f64, cs: &[f64], out: Option<&Path>) -> Result<()> {
    let table = analyze_table(tensor, dt, cs)?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, table).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

/// Printed 5×5 coefficient table, rows from `dj = 2` down to `dj = −2`.
pub fn stencil_text(
    tensor: &DiffusionTensor,
    alpha_s: f64,
    dt: f64,
    h: f64,
    form: StencilForm,
) -> Result<String> {
    let st = match form {
        StencilForm::Composed => composed_stencil(tensor, alpha_s, dt, h, h)?,
        StencilForm::Display => effective_stencil(tensor, alpha_s, dt, h, h)?,
    };
    let m = monotonicity_report(&st);
    let name = match form {
        StencilForm::Composed => "composed",
        StencilForm::Display => "display",
    };
    let mut out = format!(
        "{name} stencil, alpha_s={alpha_s} dt={dt:e} h={h:e} C=dt/h={:e}\n",
        dt / h
    );
    out.push_str("dj\\di");
    for di in -2..=2 {
        out.push_str(&format!("{di:>15}"));
    }
    out.push('\n');
    for dj in (-2..=2).rev() {
        out.push_str(&format!("{dj:>5}"));
        for di in -2..=2 {
            out.push_str(&format!("{:>15.6e}", st.get(di, dj)));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "sum = {:.15}\nmin coefficient = {:e}\ncross magnitude = {:e}\nmonotone = {}\n",
        st.sum(),
        m.min_coefficient,
        m.cross_magnitude,
        m.is_monotone
    ));
    Ok(out)
}
