//! Command-line front end for the three qutrit experiments: free decay,
//! constant control and constrained optimisation.
//!
//! Every run writes `trajectory.csv` and a flat `key=value` `summary` into
//! the output directory; `optimize` adds `adjoint.csv` and
//! `convergence.csv`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{integrate_forward, AdjointTrajectory, ControlGrid, StateTrajectory};
use crate::models::{load_config, reference_config, ConfigError, ExperimentConfig, Mode};
use crate::operators::CMatrix;
use crate::pmp::{cost, sweep, MultiplierPath};

#[derive(Debug, Parser)]
#[command(name = "coherence-pmp", version, about = "Coherence-constrained minimum-energy control of a driven qutrit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the qutrit with no control field.
    SimulateFree(RunArgs),
    /// Evolve the qutrit under the configured constant control amplitude.
    SimulateConst(RunArgs),
    /// Solve the coherence-constrained minimum-energy problem.
    Optimize(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file; absent keys keep the reference values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` from the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of grid intervals.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Sweep iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Suppress the progress report on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] crate::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

/// Run-level digest written as `summary`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub parameters: Vec<(String, String)>,
    pub cost: f64,
    pub coherence_initial: f64,
    pub coherence_final: f64,
    pub coherence_min: f64,
    pub coherence_max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode={}", self.mode.as_str());
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "{k}={v}");
        }
        for (k, v) in [
            ("cost", self.cost),
            ("coherence_initial", self.coherence_initial),
            ("coherence_final", self.coherence_final),
            ("coherence_min", self.coherence_min),
            ("coherence_max", self.coherence_max),
        ] {
            let _ = writeln!(out, "{k}={}", num(v));
        }
        let _ = writeln!(out, "iterations={}", self.iterations);
        let _ = writeln!(out, "converged={}", self.converged);
        let _ = writeln!(out, "wall_seconds={:.6}", self.wall_seconds);
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parameters(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let q = &cfg.qutrit;
    let g = &cfg.grid;
    let s = &cfg.solver;
    let mut out: Vec<(String, String)> = [
        ("e0", q.e0),
        ("e1", q.e1),
        ("e2", q.e2),
        ("gamma0", q.gamma0),
        ("gamma1", q.gamma1),
        ("gamma_d", q.gamma_d),
        ("omega_d", q.omega_d),
        ("phi_d", q.phi_d),
        ("t0", g.t0),
        ("tf", g.tf),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), num(v)))
    .collect();
    out.push(("steps".into(), g.steps.to_string()));
    match cfg.mode {
        Mode::Free => {}
        Mode::ConstantControl => out.push(("control".into(), num(g.control))),
        Mode::Optimize => {
            out.push(("initial_control".into(), num(g.initial_control)));
            out.push(("coherence_lower".into(), num(cfg.coherence_bounds.0)));
            out.push(("coherence_upper".into(), num(cfg.coherence_bounds.1)));
            out.push(("zeta1".into(), num(s.zeta1)));
            out.push(("zeta2".into(), num(s.zeta2)));
            out.push(("max_iters".into(), s.max_iters.to_string()));
        }
    }
    out
}

const RHO_ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
const PI_ENTRIES: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 2), (1, 0)];

fn push_entries(row: &mut Vec<String>, m: &CMatrix, entries: &[(usize, usize)]) {
    for &(j, k) in entries {
        row.push(num(m[(j, k)].re));
        row.push(num(m[(j, k)].im));
    }
}

fn entry_headers(name: &str, entries: &[(usize, usize)]) -> Vec<String> {
    entries
        .iter()
        .flat_map(|(j, k)| [format!("re_{name}{j}{k}"), format!("im_{name}{j}{k}")])
        .collect()
}

fn render(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `t`, `ρ` entries, `C`, `u` and optionally `mu`, one row per grid instant.
/// Interval values are held into the final row.
pub fn timeseries_csv(
    traj: &StateTrajectory,
    coherence: &[f64],
    grid: &ControlGrid,
    multipliers: Option<&MultiplierPath>,
) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(entry_headers("rho", &RHO_ENTRIES));
    header.extend(["C".to_string(), "u".to_string()]);
    if multipliers.is_some() {
        header.push("mu".into());
    }
    let last = grid.steps() - 1;
    let rows = traj
        .states
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let interval = m.min(last);
            let mut row = vec![num(traj.times[m])];
            push_entries(&mut row, s.matrix(), &RHO_ENTRIES);
            row.push(num(coherence[m]));
            row.push(num(grid.controls()[interval]));
            if let Some(path) = multipliers {
                row.push(num(path.mu()[interval]));
            }
            row
        })
        .collect();
    render(header, rows)
}

/// `t` and the `π₀₀, π₀₁, π₁₂, π₁₀` entries.
pub fn adjoint_csv(adjoint: &AdjointTrajectory) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(entry_headers("pi", &PI_ENTRIES));
    let rows = adjoint
        .times
        .iter()
        .zip(&adjoint.costates)
        .map(|(t, pi)| {
            let mut row = vec![num(*t)];
            push_entries(&mut row, pi, &PI_ENTRIES);
            row
        })
        .collect();
    render(header, rows)
}

pub fn convergence_csv(history: &[f64]) -> String {
    let rows = history
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
        .collect();
    render(vec!["iteration".into(), "metric".into()], rows)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Io { path, source })
}

fn resolve(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => reference_config(),
    };
    cfg.mode = mode;
    if let Some(steps) = args.steps {
        cfg = cfg.with_steps(steps).map_err(|_| ConfigError::Validation {
            field: "--steps".into(),
            message: "must be positive".into(),
        })?;
    }
    if let Some(n) = args.max_iters {
        cfg.solver.max_iters = n;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn extremes(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Runs one experiment and writes its artefacts.
pub fn execute(args: &RunArgs, mode: Mode) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let cfg = resolve(args, mode)?;
    let model = cfg.model()?;
    let grid = cfg.control_grid()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;

    let (coherence, cost_value, iterations, converged) = match mode {
        Mode::Free | Mode::ConstantControl => {
            let traj = integrate_forward(&model, &cfg.rho0, &grid)?;
            let coherence = traj.coherence_path(&cfg.pairs)?;
            write(dir, "trajectory.csv", &timeseries_csv(&traj, &coherence, &grid, None))?;
            (coherence, cost(&grid), 0, true)
        }
        Mode::Optimize => {
            let out = sweep(&model, &cfg.rho0, &grid, &cfg.solver)?;
            write(
                dir,
                "trajectory.csv",
                &timeseries_csv(&out.trajectory, &out.coherence_path, &out.controls, Some(&out.multipliers)),
            )?;
            write(dir, "adjoint.csv", &adjoint_csv(&out.adjoint))?;
            write(dir, "convergence.csv", &convergence_csv(&out.convergence_history))?;
            (out.coherence_path, out.cost, out.iterations, out.converged)
        }
    };

    let (lo, hi) = extremes(&coherence);
    let summary = RunSummary {
        mode,
        parameters: parameters(&cfg),
        cost: cost_value,
        coherence_initial: coherence[0],
        coherence_final: *coherence.last().expect("non-empty trajectory"),
        coherence_min: lo,
        coherence_max: hi,
        iterations,
        converged,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write(dir, "summary", &summary.to_text())?;
    if !args.quiet {
        eprintln!(
            "{}: J = {:.6e}, C in [{lo:.6}, {hi:.6}], {iterations} iterations, converged = {converged}, wrote {}",
            mode.as_str(),
            cost_value,
            dir.display()
        );
    }
    Ok(summary)
}

pub fn run(cli: Cli) -> Result<RunSummary, CliError> {
    match cli.command {
        Command::SimulateFree(args) => execute(&args, Mode::Free),
        Command::SimulateConst(args) => execute(&args, Mode::ConstantControl),
        Command::Optimize(args) => execute(&args, Mode::Optimize),
    }
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
