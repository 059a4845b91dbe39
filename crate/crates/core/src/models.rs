//! The driven, decaying and dephasing qutrit, plus experiment configuration.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::dynamics::{ControlGrid, SystemModel};
use crate::error::{Error, Result};
use crate::operators::{c, ket_bra, zeros, CMatrix, CoherencePair, ConstraintSpec, DecoherenceChannel, DensityMatrix};
use crate::pmp::{MultiplierReset, MultiplierRule, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritParams {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    /// Decay |2⟩ → |0⟩.
    pub gamma0: f64,
    /// Decay |2⟩ → |1⟩.
    pub gamma1: f64,
    /// Dephasing between |0⟩ and |1⟩.
    pub gamma_d: f64,
    pub omega_d: f64,
    pub phi_d: f64,
}

impl Default for QutritParams {
    fn default() -> Self {
        Self {
            e0: 1.0,
            e1: 1.5,
            e2: 2.0,
            gamma0: 0.1,
            gamma1: 0.001,
            gamma_d: 0.005,
            omega_d: 0.1,
            phi_d: FRAC_PI_2,
        }
    }
}

impl QutritParams {
    pub fn validate(&self) -> Result<()> {
        let values = [
            ("qutrit.e0", self.e0),
            ("qutrit.e1", self.e1),
            ("qutrit.e2", self.e2),
            ("qutrit.gamma0", self.gamma0),
            ("qutrit.gamma1", self.gamma1),
            ("qutrit.gamma_d", self.gamma_d),
            ("qutrit.omega_d", self.omega_d),
            ("qutrit.phi_d", self.phi_d),
        ];
        for (name, v) in values {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in &values[3..6] {
            if *v < 0.0 {
                return Err(Error::InvalidChannel(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Drift Hamiltonian built from population differences.
pub fn qutrit_drift(params: &QutritParams) -> CMatrix {
    let p = |j: usize, k: usize| ket_bra(j, j, 3) - ket_bra(k, k, 3);
    p(2, 0) * c((params.e2 - params.e0) / 3.0)
        + p(2, 1) * c((params.e2 - params.e1) / 3.0)
        + p(0, 1) * c((params.e0 - params.e1) / 3.0)
}

/// `(e^{iφ_d}|0⟩⟨1| + e^{−iφ_d}|1⟩⟨0|) cos(ω_d t)`.
pub fn qutrit_envelope(phi_d: f64, omega_d: f64, t: f64) -> CMatrix {
    let phase = Complex64::from_polar(1.0, phi_d);
    let carrier = (omega_d * t).cos();
    let mut m = zeros(3);
    m[(0, 1)] = phase * carrier;
    m[(1, 0)] = phase.conj() * carrier;
    m
}

/// Decay to |0⟩, decay to |1⟩, then dephasing `L₃ = |0⟩⟨0| − |1⟩⟨1|`.
pub fn qutrit_channel(params: &QutritParams) -> Result<DecoherenceChannel> {
    DecoherenceChannel::new(
        3,
        vec![ket_bra(0, 2, 3), ket_bra(1, 2, 3), ket_bra(0, 0, 3) - ket_bra(1, 1, 3)],
        vec![params.gamma0, params.gamma1, params.gamma_d],
    )
}

pub fn build_qutrit(params: &QutritParams) -> Result<SystemModel> {
    params.validate()?;
    let (phi_d, omega_d) = (params.phi_d, params.omega_d);
    SystemModel::new(
        qutrit_drift(params),
        Arc::new(move |t| qutrit_envelope(phi_d, omega_d, t)),
        qutrit_channel(params)?,
    )
}

/// Which experiment a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Free,
    ConstantControl,
    Optimize,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Free => "free",
            Mode::ConstantControl => "constant_control",
            Mode::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    /// Amplitude for the constant-control run.
    pub control: f64,
    /// Starting guess for the optimiser.
    pub initial_control: f64,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub qutrit: QutritParams,
    pub rho0: DensityMatrix,
    pub grid: GridSettings,
    /// Bounds on `C` (not `C²`).
    pub coherence_bounds: (f64, f64),
    pub pairs: Vec<CoherencePair>,
    pub solver: SolverConfig,
    pub mode: Mode,
    pub output_dir: PathBuf,
}

pub fn reference_rho0() -> DensityMatrix {
    let mut m = zeros(3);
    m[(0, 0)] = c(0.21);
    m[(0, 1)] = Complex64::new(0.195, -0.195);
    m[(1, 0)] = Complex64::new(0.195, 0.195);
    m[(1, 1)] = c(0.78);
    m[(2, 2)] = c(0.01);
    DensityMatrix::new(m).expect("reference state is valid")
}

/// Reference qutrit experiment.
pub fn reference_config() -> ExperimentConfig {
    let pairs = vec![CoherencePair::new(0, 1).expect("0 < 1")];
    let (c_min, c_max) = (0.550, 0.553);
    let constraint =
        ConstraintSpec::from_coherence_bounds(c_min, c_max, pairs.clone()).expect("ordered bounds");
    ExperimentConfig {
        qutrit: QutritParams::default(),
        rho0: reference_rho0(),
        grid: GridSettings {
            t0: 0.0,
            tf: 20.0,
            steps: 1000,
            control: 0.1,
            initial_control: 0.0,
        },
        coherence_bounds: (c_min, c_max),
        pairs,
        solver: SolverConfig::new(constraint),
        mode: Mode::Optimize,
        output_dir: PathBuf::from("out"),
    }
}

impl ExperimentConfig {
    pub fn model(&self) -> Result<SystemModel> {
        build_qutrit(&self.qutrit)
    }

    /// Grid holding the mode's starting control.
    pub fn control_grid(&self) -> Result<ControlGrid> {
        let value = match self.mode {
            Mode::Free => 0.0,
            Mode::ConstantControl => self.grid.control,
            Mode::Optimize => self.grid.initial_control,
        };
        ControlGrid::constant(self.grid.t0, self.grid.tf, self.grid.steps, value)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidConfig("grid.steps must be positive".into()));
        }
        self.grid.steps = steps;
        Ok(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value for {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    output_dir: Option<PathBuf>,
    /// Row-major `[re, im]` entries.
    rho0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    qutrit: RawQutrit,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    constraint: RawConstraint,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQutrit {
    e0: Option<f64>,
    e1: Option<f64>,
    e2: Option<f64>,
    gamma0: Option<f64>,
    gamma1: Option<f64>,
    gamma_d: Option<f64>,
    omega_d: Option<f64>,
    phi_d: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t0: Option<f64>,
    tf: Option<f64>,
    steps: Option<i64>,
    control: Option<f64>,
    initial_control: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    alpha: Option<f64>,
    beta: Option<f64>,
    pairs: Option<Vec<Vec<i64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    eta_i: Option<f64>,
    eta_d: Option<f64>,
    zeta1: Option<f64>,
    zeta2: Option<f64>,
    eps_rho: Option<f64>,
    eps_pi: Option<f64>,
    eps_u: Option<f64>,
    eps_mu: Option<f64>,
    eps: Option<f64>,
    eps_active: Option<f64>,
    eps_phi: Option<f64>,
    max_iters: Option<i64>,
    reset: Option<String>,
    rule: Option<String>,
}

/// Parses and validates configuration text. Absent keys take the
/// reference-experiment defaults.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut cfg = reference_config();

    if let Some(mode) = raw.mode {
        cfg.mode = mode;
    }
    if let Some(dir) = raw.output_dir {
        cfg.output_dir = dir;
    }

    let q = &mut cfg.qutrit;
    let rq = &raw.qutrit;
    for (slot, value) in [
        (&mut q.e0, rq.e0),
        (&mut q.e1, rq.e1),
        (&mut q.e2, rq.e2),
        (&mut q.gamma0, rq.gamma0),
        (&mut q.gamma1, rq.gamma1),
        (&mut q.gamma_d, rq.gamma_d),
        (&mut q.omega_d, rq.omega_d),
        (&mut q.phi_d, rq.phi_d),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    for (name, rate) in [
        ("qutrit.gamma0", q.gamma0),
        ("qutrit.gamma1", q.gamma1),
        ("qutrit.gamma_d", q.gamma_d),
    ] {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid(name, format!("rate must be non-negative, got {rate}")));
        }
    }
    q.validate().map_err(|e| invalid("qutrit", e.to_string()))?;

    if let Some(entries) = raw.rho0 {
        cfg.rho0 = parse_rho0(&entries)?;
    }

    let g = &mut cfg.grid;
    if let Some(v) = raw.grid.t0 {
        g.t0 = v;
    }
    if let Some(v) = raw.grid.tf {
        g.tf = v;
    }
    if let Some(v) = raw.grid.steps {
        if v <= 0 {
            return Err(invalid("grid.steps", format!("must be positive, got {v}")));
        }
        g.steps = v as usize;
    }
    if let Some(v) = raw.grid.control {
        g.control = v;
    }
    if let Some(v) = raw.grid.initial_control {
        g.initial_control = v;
    }
    if !(g.t0.is_finite() && g.tf.is_finite() && g.tf > g.t0) {
        return Err(invalid("grid.t0, grid.tf", format!("need t0 < tf, got [{}, {}]", g.t0, g.tf)));
    }
    if !g.control.is_finite() || !g.initial_control.is_finite() {
        return Err(invalid("grid.control", "control amplitudes must be finite"));
    }

    if let Some(pairs) = raw.constraint.pairs {
        let mut parsed = Vec::with_capacity(pairs.len());
        for (idx, p) in pairs.iter().enumerate() {
            let [j, k] = p.as_slice() else {
                return Err(invalid(
                    "constraint.pairs",
                    format!("entry {idx} must be a [j, k] pair"),
                ));
            };
            if *j < 0 || *k < 0 {
                return Err(invalid("constraint.pairs", format!("entry {idx} has a negative index")));
            }
            let pair = CoherencePair::new(*j as usize, *k as usize)
                .and_then(|p| p.validate(3).map(|_| p))
                .map_err(|e| invalid("constraint.pairs", e.to_string()))?;
            parsed.push(pair);
        }
        if parsed.is_empty() {
            return Err(invalid("constraint.pairs", "at least one pair is required"));
        }
        cfg.pairs = parsed;
    }
    let alpha = raw.constraint.alpha.unwrap_or(cfg.coherence_bounds.0);
    let beta = raw.constraint.beta.unwrap_or(cfg.coherence_bounds.1);
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(invalid("constraint.alpha, constraint.beta", "bounds must be finite"));
    }
    if alpha < 0.0 {
        return Err(invalid("constraint.alpha", format!("must be non-negative, got {alpha}")));
    }
    if alpha >= beta {
        return Err(invalid(
            "constraint.alpha, constraint.beta",
            format!("alpha ({alpha}) must be below beta ({beta})"),
        ));
    }
    cfg.coherence_bounds = (alpha, beta);
    let constraint = ConstraintSpec::from_coherence_bounds(alpha, beta, cfg.pairs.clone())
        .map_err(|e| invalid("constraint", e.to_string()))?;

    let rs = &raw.solver;
    let s = &mut cfg.solver;
    s.constraint = constraint;
    for (slot, value) in [
        (&mut s.eta_i, rs.eta_i),
        (&mut s.eta_d, rs.eta_d),
        (&mut s.eps_rho, rs.eps_rho),
        (&mut s.eps_pi, rs.eps_pi),
        (&mut s.eps_u, rs.eps_u),
        (&mut s.eps_mu, rs.eps_mu),
        (&mut s.eps, rs.eps),
        (&mut s.eps_active, rs.eps_active),
        (&mut s.eps_phi, rs.eps_phi),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    match (rs.zeta1, rs.zeta2) {
        (Some(z1), Some(z2)) => {
            s.zeta1 = z1;
            s.zeta2 = z2;
        }
        (Some(z1), None) => {
            s.zeta1 = z1;
            s.zeta2 = 1.0 - z1;
        }
        (None, Some(z2)) => {
            s.zeta2 = z2;
            s.zeta1 = 1.0 - z2;
        }
        (None, None) => {}
    }
    if let Some(v) = rs.max_iters {
        if v < 0 {
            return Err(invalid("solver.max_iters", format!("must be non-negative, got {v}")));
        }
        s.max_iters = v as usize;
    }
    if let Some(reset) = &rs.reset {
        s.reset = match reset.as_str() {
            "warm_start" => MultiplierReset::WarmStart,
            "zero" => MultiplierReset::Zero,
            other => {
                return Err(invalid(
                    "solver.reset",
                    format!("expected \"warm_start\" or \"zero\", got {other:?}"),
                ))
            }
        };
    }
    if let Some(rule) = &rs.rule {
        s.rule = match rule.as_str() {
            "linearized" => MultiplierRule::Linearized,
            "step_change" => MultiplierRule::StepChange,
            other => {
                return Err(invalid(
                    "solver.rule",
                    format!("expected \"linearized\" or \"step_change\", got {other:?}"),
                ))
            }
        };
    }
    s.validate().map_err(|e| invalid("solver", e.to_string()))?;

    Ok(cfg)
}

fn parse_rho0(entries: &[Vec<f64>]) -> std::result::Result<DensityMatrix, ConfigError> {
    if entries.len() != 9 {
        return Err(invalid(
            "rho0",
            format!("expected 9 row-major [re, im] entries, got {}", entries.len()),
        ));
    }
    let mut m = zeros(3);
    for (idx, entry) in entries.iter().enumerate() {
        let value = match entry.as_slice() {
            [re, im] => Complex64::new(*re, *im),
            [_] => return Err(ConfigError::MissingField(format!("rho0[{idx}] imaginary part"))),
            [] => return Err(ConfigError::MissingField(format!("rho0[{idx}] real part"))),
            _ => {
                return Err(invalid("rho0", format!("entry {idx} must be a [re, im] pair")));
            }
        };
        m[(idx / 3, idx % 3)] = value;
    }
    DensityMatrix::new(m).map_err(|e| invalid("rho0", e.to_string()))
}

pub fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
