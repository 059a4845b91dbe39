//! Python bindings: the qutrit model, forward simulation, the sweep solver
//! and the scalar diagnostics around them.
//!
//! Matrices cross the boundary as nested lists of Python `complex`.

use coherence_pmp::dynamics::{chi, hamiltonian, integrate_forward, lindblad_rhs, ControlGrid, SystemModel};
use coherence_pmp::models::{self, build_qutrit, load_config, reference_config, ExperimentConfig, QutritParams};
use coherence_pmp::operators::{self, unital_defect, CMatrix, CoherencePair, ConstraintSpec, DensityMatrix};
use coherence_pmp::pmp::{self, MultiplierRule, SolverConfig};
use coherence_pmp::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<Complex64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonFinite { .. } | Error::ConstraintSolve(_) | Error::ComplexResidue { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn to_pairs(pairs: Option<Vec<(usize, usize)>>) -> PyResult<Vec<CoherencePair>> {
    pairs
        .unwrap_or_else(|| vec![(0, 1)])
        .into_iter()
        .map(|(j, k)| CoherencePair::new(j, k).map_err(py_err))
        .collect()
}

fn state(rho: Option<Rows>) -> PyResult<DensityMatrix> {
    match rho {
        Some(rows) => DensityMatrix::new(to_matrix(&rows)?).map_err(py_err),
        None => Ok(models::reference_rho0()),
    }
}

/// Driven, decaying three-level system.
#[pyclass(name = "QutritModel", frozen)]
struct PyQutritModel {
    params: QutritParams,
    model: SystemModel,
}

#[pymethods]
impl PyQutritModel {
    #[new]
    #[pyo3(signature = (*, e0=None, e1=None, e2=None, gamma0=None, gamma1=None, gamma_d=None, omega_d=None, phi_d=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        e0: Option<f64>,
        e1: Option<f64>,
        e2: Option<f64>,
        gamma0: Option<f64>,
        gamma1: Option<f64>,
        gamma_d: Option<f64>,
        omega_d: Option<f64>,
        phi_d: Option<f64>,
    ) -> PyResult<Self> {
        let d = QutritParams::default();
        let params = QutritParams {
            e0: e0.unwrap_or(d.e0),
            e1: e1.unwrap_or(d.e1),
            e2: e2.unwrap_or(d.e2),
            gamma0: gamma0.unwrap_or(d.gamma0),
            gamma1: gamma1.unwrap_or(d.gamma1),
            gamma_d: gamma_d.unwrap_or(d.gamma_d),
            omega_d: omega_d.unwrap_or(d.omega_d),
            phi_d: phi_d.unwrap_or(d.phi_d),
        };
        let model = build_qutrit(&params).map_err(py_err)?;
        Ok(Self { params, model })
    }

    #[getter]
    fn rates(&self) -> (f64, f64, f64) {
        (self.params.gamma0, self.params.gamma1, self.params.gamma_d)
    }

    fn hamiltonian(&self, t: f64, u: f64) -> Rows {
        to_rows(&hamiltonian(&self.model, t, u))
    }

    fn lindblad_rhs(&self, rho: Rows, t: f64, u: f64) -> PyResult<Rows> {
        Ok(to_rows(&lindblad_rhs(&self.model, &to_matrix(&rho)?, t, u).map_err(py_err)?))
    }

    fn chi(&self, phi: Rows, t: f64, u: f64) -> PyResult<Rows> {
        Ok(to_rows(&chi(&self.model, &to_matrix(&phi)?, t, u).map_err(py_err)?))
    }

    /// `ℒ(I)`; zero exactly when the channel is unital.
    fn unital_defect(&self) -> Rows {
        to_rows(&unital_defect(self.model.channel()))
    }

    /// `(Φ, Δ)` with `dC²/dt = Φ u + Δ`.
    #[pyo3(signature = (rho, t, pairs=None))]
    fn phi_delta(&self, rho: Rows, t: f64, pairs: Option<Vec<(usize, usize)>>) -> PyResult<(f64, f64)> {
        pmp::phi_delta(&self.model, &to_matrix(&rho)?, &to_pairs(pairs)?, t).map_err(py_err)
    }

    #[pyo3(signature = (rho, t, pairs=None, eps_phi=1e-10))]
    fn boundary_control(&self, rho: Rows, t: f64, pairs: Option<Vec<(usize, usize)>>, eps_phi: f64) -> PyResult<f64> {
        pmp::boundary_control(&self.model, &to_matrix(&rho)?, &to_pairs(pairs)?, t, eps_phi).map_err(py_err)
    }

    /// Extended Hamiltonian of the optimal-control problem.
    #[pyo3(signature = (rho, pi, u, mu, t, pairs=None))]
    fn pontryagin_hamiltonian(
        &self,
        rho: Rows,
        pi: Rows,
        u: f64,
        mu: f64,
        t: f64,
        pairs: Option<Vec<(usize, usize)>>,
    ) -> PyResult<f64> {
        pmp::pontryagin_hamiltonian(&self.model, &to_matrix(&rho)?, &to_matrix(&pi)?, u, mu, &to_pairs(pairs)?, t)
            .map_err(py_err)
    }

    #[pyo3(signature = (rho, pi, mu, t, pairs=None))]
    fn stationary_control(
        &self,
        rho: Rows,
        pi: Rows,
        mu: f64,
        t: f64,
        pairs: Option<Vec<(usize, usize)>>,
    ) -> PyResult<f64> {
        pmp::stationary_control(&self.model, &to_matrix(&rho)?, &to_matrix(&pi)?, mu, &to_pairs(pairs)?, t)
            .map_err(py_err)
    }

    /// Forward run under piecewise-constant `controls` on `[t0, tf]`.
    #[pyo3(signature = (controls, tf, t0=0.0, rho0=None, pairs=None))]
    fn simulate(
        &self,
        controls: Vec<f64>,
        tf: f64,
        t0: f64,
        rho0: Option<Rows>,
        pairs: Option<Vec<(usize, usize)>>,
    ) -> PyResult<PyTrajectory> {
        let grid = ControlGrid::new(t0, tf, controls).map_err(py_err)?;
        let traj = integrate_forward(&self.model, &state(rho0)?, &grid).map_err(py_err)?;
        let coherence = traj.coherence_path(&to_pairs(pairs)?).map_err(py_err)?;
        Ok(PyTrajectory {
            times: traj.times,
            states: traj.states.iter().map(|s| to_rows(s.matrix())).collect(),
            coherence,
        })
    }

    /// Minimum-energy control keeping `C` within `[c_min, c_max]`.
    #[pyo3(signature = (c_min, c_max, tf, steps, t0=0.0, rho0=None, pairs=None, initial_control=0.0, max_iters=500, rule="linearized"))]
    #[allow(clippy::too_many_arguments)]
    fn optimize(
        &self,
        c_min: f64,
        c_max: f64,
        tf: f64,
        steps: usize,
        t0: f64,
        rho0: Option<Rows>,
        pairs: Option<Vec<(usize, usize)>>,
        initial_control: f64,
        max_iters: usize,
        rule: &str,
    ) -> PyResult<PySweepResult> {
        let constraint = ConstraintSpec::from_coherence_bounds(c_min, c_max, to_pairs(pairs)?).map_err(py_err)?;
        let mut cfg = SolverConfig::new(constraint);
        cfg.max_iters = max_iters;
        cfg.rule = parse_rule(rule)?;
        let grid = ControlGrid::constant(t0, tf, steps, initial_control).map_err(py_err)?;
        run_sweep(&self.model, &state(rho0)?, &grid, &cfg)
    }

    fn __repr__(&self) -> String {
        let p = &self.params;
        format!(
            "QutritModel(gamma0={}, gamma1={}, gamma_d={}, omega_d={}, phi_d={})",
            p.gamma0, p.gamma1, p.gamma_d, p.omega_d, p.phi_d
        )
    }
}

fn parse_rule(rule: &str) -> PyResult<MultiplierRule> {
    match rule {
        "linearized" => Ok(MultiplierRule::Linearized),
        "step_change" => Ok(MultiplierRule::StepChange),
        other => Err(PyValueError::new_err(format!(
            "rule must be \"linearized\" or \"step_change\", got {other:?}"
        ))),
    }
}

fn run_sweep(model: &SystemModel, rho0: &DensityMatrix, grid: &ControlGrid, cfg: &SolverConfig) -> PyResult<PySweepResult> {
    let out = pmp::sweep(model, rho0, grid, cfg).map_err(py_err)?;
    Ok(PySweepResult {
        times: out.trajectory.times.clone(),
        controls: out.controls.controls().to_vec(),
        coherence: out.coherence_path,
        mu: out.multipliers.mu().to_vec(),
        costates: out.adjoint.costates.iter().map(to_rows).collect(),
        states: out.trajectory.states.iter().map(|s| to_rows(s.matrix())).collect(),
        cost: out.cost,
        convergence_history: out.convergence_history,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[pyclass(name = "Trajectory", frozen, get_all)]
struct PyTrajectory {
    times: Vec<f64>,
    states: Vec<Rows>,
    coherence: Vec<f64>,
}

#[pyclass(name = "SweepResult", frozen, get_all)]
struct PySweepResult {
    times: Vec<f64>,
    controls: Vec<f64>,
    coherence: Vec<f64>,
    mu: Vec<f64>,
    costates: Vec<Rows>,
    states: Vec<Rows>,
    cost: f64,
    convergence_history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

#[pymethods]
impl PySweepResult {
    fn __repr__(&self) -> String {
        format!(
            "SweepResult(cost={:.6e}, iterations={}, converged={})",
            self.cost,
            self.iterations,
            if self.converged { "True" } else { "False" }
        )
    }
}

/// `C(ρ) = sqrt(Σ ⟨δRe⟩² + ⟨δIm⟩²)` over the pairs, `(0, 1)` by default.
#[pyfunction]
#[pyo3(signature = (rho, pairs=None))]
fn coherence(rho: Rows, pairs: Option<Vec<(usize, usize)>>) -> PyResult<f64> {
    operators::coherence(&to_matrix(&rho)?, &to_pairs(pairs)?).map_err(py_err)
}

#[pyfunction]
fn reference_state() -> Rows {
    to_rows(models::reference_rho0().matrix())
}

/// Runs the optimiser as configured by a TOML file (or the reference
/// experiment when `path` is `None`).
#[pyfunction]
#[pyo3(signature = (path=None, steps=None, max_iters=None))]
fn optimize_config(path: Option<std::path::PathBuf>, steps: Option<usize>, max_iters: Option<usize>) -> PyResult<PySweepResult> {
    let mut cfg: ExperimentConfig = match path {
        Some(p) => load_config(&p).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => reference_config(),
    };
    if let Some(n) = steps {
        cfg = cfg.with_steps(n).map_err(py_err)?;
    }
    if let Some(n) = max_iters {
        cfg.solver.max_iters = n;
    }
    let model = cfg.model().map_err(py_err)?;
    let grid = cfg.control_grid().map_err(py_err)?;
    run_sweep(&model, &cfg.rho0, &grid, &cfg.solver)
}

#[pymodule]
fn coherence_pmp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQutritModel>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySweepResult>()?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(reference_state, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_config, m)?)?;
    Ok(())
}
