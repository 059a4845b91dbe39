//! Pontryagin minimum principle in Gamkrelidze form for the minimum-energy,
//! coherence-constrained control problem, and the forward-backward sweep
//! that solves it.
//!
//! The extended Hamiltonian is
//!
//! ```text
//! 𝓗 = Tr((π + μ W(ρ))† (−(i/ħ)[H(t), ρ] + ℒ(ρ))) + u²
//! ```
//!
//! with `W(ρ) = ½ ∂C²/∂ρ` and `μ = 2(μ₁ − μ₂)` combining the upper- and
//! lower-bound multipliers. Because `𝓗` is quadratic in `u` with unit
//! leading coefficient, the stationary control has a closed form.

use crate::dynamics::{
    hamiltonian, hermitian_basis, linearize_steps, integrate_backward, integrate_forward, AdjointTrajectory, ControlGrid,
    StateTrajectory, SystemModel,
};
use crate::error::{Error, Result};
use crate::operators::{
    c, check_square, dissipator, max_abs, trace_product, CMatrix, CoherenceBasis, CoherencePair,
    ConstraintSpec, DensityMatrix, I,
};

const IMAG_TOL: f64 = 1e-10;

fn real_part(z: num_complex::Complex64, what: &'static str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::ComplexResidue {
            what,
            residue: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// Per-interval multipliers; `mu[m] == 2 (mu1[m] - mu2[m])` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierPath {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    mu: Vec<f64>,
}

impl MultiplierPath {
    pub fn zeros(steps: usize) -> Self {
        Self {
            mu1: vec![0.0; steps],
            mu2: vec![0.0; steps],
            mu: vec![0.0; steps],
        }
    }

    /// Builds a path from the two bound multipliers, clamping both at zero.
    pub fn from_bounds(mu1: Vec<f64>, mu2: Vec<f64>) -> Result<Self> {
        if mu1.len() != mu2.len() {
            return Err(Error::InvalidGrid(format!(
                "multiplier lengths differ: {} vs {}",
                mu1.len(),
                mu2.len()
            )));
        }
        if let Some(step) = mu1.iter().chain(&mu2).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "multiplier",
                step: step % mu1.len(),
            });
        }
        let mu1: Vec<f64> = mu1.into_iter().map(|v| v.max(0.0)).collect();
        let mu2: Vec<f64> = mu2.into_iter().map(|v| v.max(0.0)).collect();
        let mu = mu1.iter().zip(&mu2).map(|(a, b)| 2.0 * (a - b)).collect();
        Ok(Self { mu1, mu2, mu })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn mu2(&self) -> &[f64] {
        &self.mu2
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// How each sweep pass turns the forward trajectory into multipliers and a
/// control target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierRule {
    /// Step-change accumulation on active bands ([`update_multipliers`]);
    /// the control target is the stationary control. `eta_i`, `eta_d` are
    /// learning rates.
    StepChange,
    /// Multipliers of the minimum-energy problem linearised about the
    /// current trajectory ([`linearized_multipliers`]); the control target
    /// is that problem's minimiser. `eta_i`, `eta_d` blend the new
    /// multipliers into the previous path.
    Linearized,
}

/// How the multiplier path is seeded at the start of each sweep iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierReset {
    /// Accumulate on top of the previous iteration's path.
    WarmStart,
    /// Start every iteration from zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub constraint: ConstraintSpec,
    /// Upper-bound learning rate.
    pub eta_i: f64,
    /// Lower-bound learning rate.
    pub eta_d: f64,
    /// Weight of the freshly computed control target.
    pub zeta1: f64,
    /// Weight of the previous control; `zeta1 + zeta2 == 1`.
    pub zeta2: f64,
    pub eps_rho: f64,
    pub eps_pi: f64,
    pub eps_u: f64,
    pub eps_mu: f64,
    pub eps: f64,
    /// Width of the band in which a bound counts as active.
    pub eps_active: f64,
    /// Smallest |Φ| accepted by the boundary control.
    pub eps_phi: f64,
    pub max_iters: usize,
    pub reset: MultiplierReset,
    pub rule: MultiplierRule,
}

impl SolverConfig {
    pub fn new(constraint: ConstraintSpec) -> Self {
        Self {
            constraint,
            eta_i: 1.0,
            eta_d: 1.0,
            zeta1: 1.0,
            zeta2: 0.0,
            eps_rho: 1e-6,
            eps_pi: 1e-6,
            eps_u: 1e-6,
            eps_mu: 1e-6,
            eps: 1e-6,
            eps_active: 1e-4,
            eps_phi: 1e-10,
            max_iters: 500,
            reset: MultiplierReset::WarmStart,
            rule: MultiplierRule::Linearized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constraint.validate()?;
        let positive = [
            ("eta_i", self.eta_i),
            ("eta_d", self.eta_d),
            ("eps_rho", self.eps_rho),
            ("eps_pi", self.eps_pi),
            ("eps_u", self.eps_u),
            ("eps_mu", self.eps_mu),
            ("eps", self.eps),
            ("eps_active", self.eps_active),
            ("eps_phi", self.eps_phi),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.zeta1 > 0.0 && self.zeta1 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zeta1 must lie in (0, 1], got {}",
                self.zeta1
            )));
        }
        if (self.zeta1 + self.zeta2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "zeta1 + zeta2 must equal 1, got {} + {}",
                self.zeta1, self.zeta2
            )));
        }
        Ok(())
    }
}

/// One complete sweep iterate: the trajectories produced by `controls` and
/// the multipliers used for the adjoint pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepIterate {
    pub trajectory: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub controls: Vec<f64>,
    pub multipliers: MultiplierPath,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub trajectory: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub controls: ControlGrid,
    pub multipliers: MultiplierPath,
    pub cost: f64,
    /// `C(ρ(t_m))` over the constraint pairs, one value per grid instant.
    pub coherence_path: Vec<f64>,
    pub convergence_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `J = Σ_m u_m² Δt`.
pub fn cost(grid: &ControlGrid) -> f64 {
    grid.controls().iter().map(|u| u * u).sum::<f64>() * grid.dt()
}

/// `π + μ W(ρ)`, the effective costate.
fn effective_costate(basis: &CoherenceBasis, rho: &CMatrix, pi: &CMatrix, mu: f64) -> Result<CMatrix> {
    if mu == 0.0 {
        return Ok(pi.clone());
    }
    Ok(pi + basis.weight_operator(rho)? * c(mu))
}

fn check_inputs(model: &SystemModel, rho: &CMatrix, pi: &CMatrix) -> Result<()> {
    check_square(rho, model.dim())?;
    check_square(pi, model.dim())
}

/// Extended Pontryagin Hamiltonian `𝓗(ρ, π, u, μ, t)`.
pub fn pontryagin_hamiltonian(
    model: &SystemModel,
    rho: &CMatrix,
    pi: &CMatrix,
    u: f64,
    mu: f64,
    pairs: &[CoherencePair],
    t: f64,
) -> Result<f64> {
    check_inputs(model, rho, pi)?;
    let basis = CoherenceBasis::new(pairs, model.dim())?;
    let weight = effective_costate(&basis, rho, pi, mu)?;
    let h = hamiltonian(model, t, u);
    let drift = (&h * rho - rho * &h) * (-I / model.hbar()) + dissipator(model.channel(), rho)?;
    let value = trace_product(&weight.adjoint(), &drift);
    Ok(real_part(value, "Pontryagin Hamiltonian")? + u * u)
}

/// `Tr((π + μW)† · (−(i/ħ)[H_c(t), ρ]))`, the coefficient of `u` in `𝓗`.
fn control_gradient(
    model: &SystemModel,
    basis: &CoherenceBasis,
    rho: &CMatrix,
    pi: &CMatrix,
    mu: f64,
    t: f64,
) -> Result<f64> {
    let weight = effective_costate(basis, rho, pi, mu)?;
    let hc = model.control_operator(t);
    let comm = (&hc * rho - rho * &hc) * (-I / model.hbar());
    real_part(trace_product(&weight.adjoint(), &comm), "control gradient")
}

/// `∂𝓗/∂u` at fixed envelope.
pub fn stationarity_residual(
    model: &SystemModel,
    rho: &CMatrix,
    pi: &CMatrix,
    mu: f64,
    pairs: &[CoherencePair],
    t: f64,
    u: f64,
) -> Result<f64> {
    check_inputs(model, rho, pi)?;
    let basis = CoherenceBasis::new(pairs, model.dim())?;
    Ok(control_gradient(model, &basis, rho, pi, mu, t)? + 2.0 * u)
}

/// The unique minimiser of `𝓗` in `u`: `u* = (i/2ħ) Tr((π + μW)† [H_c, ρ])`.
pub fn stationary_control(
    model: &SystemModel,
    rho: &CMatrix,
    pi: &CMatrix,
    mu: f64,
    pairs: &[CoherencePair],
    t: f64,
) -> Result<f64> {
    check_inputs(model, rho, pi)?;
    let basis = CoherenceBasis::new(pairs, model.dim())?;
    Ok(-0.5 * control_gradient(model, &basis, rho, pi, mu, t)?)
}

/// `(Φ, Δ)` with `dC²/dt = Φ u + Δ` along the controlled dynamics.
pub fn phi_delta(
    model: &SystemModel,
    rho: &CMatrix,
    pairs: &[CoherencePair],
    t: f64,
) -> Result<(f64, f64)> {
    check_square(rho, model.dim())?;
    let basis = CoherenceBasis::new(pairs, model.dim())?;
    phi_delta_with(model, &basis, rho, t)
}

fn phi_delta_with(model: &SystemModel, basis: &CoherenceBasis, rho: &CMatrix, t: f64) -> Result<(f64, f64)> {
    let hc = model.control_operator(t);
    let h0 = model.h0();
    let lrho = dissipator(model.channel(), rho)?;
    let scale = -I / model.hbar();
    let mut phi = c(0.0);
    let mut delta = c(0.0);
    for ((a, b), (re, im)) in basis.expectations(rho)?.iter().zip(basis.ops()) {
        for (expect, op) in [(*a, re), (*b, im)] {
            let with_control = op * &hc - &hc * op;
            phi += c(expect) * trace_product(&with_control, rho);
            let with_drift = (op * h0 - h0 * op) * scale;
            delta += c(expect) * (trace_product(&with_drift, rho) + trace_product(op, &lrho));
        }
    }
    let phi = phi * c(-2.0) * I / model.hbar();
    let delta = delta * c(2.0);
    Ok((real_part(phi, "Phi")?, real_part(delta, "Delta")?))
}

/// Control that holds `C²` stationary: `u = −Δ/Φ`.
pub fn boundary_control(
    model: &SystemModel,
    rho: &CMatrix,
    pairs: &[CoherencePair],
    t: f64,
    eps_phi: f64,
) -> Result<f64> {
    let (phi, delta) = phi_delta(model, rho, pairs, t)?;
    if phi.abs() < eps_phi {
        return Err(Error::SingularControlDirection {
            t,
            phi: phi.abs(),
            guard: eps_phi,
        });
    }
    Ok(-delta / phi)
}

/// Step-change multiplier update along one iterate.
///
/// `coherence_sq` holds `C²(ρ_m)` for at least every interval start. Inside
/// the band the running values are carried forward in time; where a bound
/// is active (within `eps_active`) they move by the learning rate times the
/// step change of `C²`. With [`MultiplierReset::WarmStart`] the along-time
/// accumulation is added onto `prev`.
pub fn update_multipliers(
    coherence_sq: &[f64],
    prev: &MultiplierPath,
    cfg: &SolverConfig,
) -> MultiplierPath {
    let steps = prev.len();
    assert!(
        coherence_sq.len() >= steps,
        "coherence path ({}) shorter than multiplier path ({steps})",
        coherence_sq.len()
    );
    let alpha = cfg.constraint.alpha;
    let beta = cfg.constraint.beta;
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    let mut mu1 = vec![0.0; steps];
    let mut mu2 = vec![0.0; steps];
    for m in 0..steps {
        let c2 = coherence_sq[m];
        let change = if m == 0 { 0.0 } else { c2 - coherence_sq[m - 1] };
        if c2 >= beta - cfg.eps_active {
            acc1 += cfg.eta_i * change;
        } else if c2 <= alpha + cfg.eps_active {
            acc2 -= cfg.eta_d * change;
        }
        let (base1, base2) = match cfg.reset {
            MultiplierReset::WarmStart => (prev.mu1[m], prev.mu2[m]),
            MultiplierReset::Zero => (0.0, 0.0),
        };
        mu1[m] = base1 + acc1;
        mu2[m] = base2 + acc2;
    }
    MultiplierPath::from_bounds(mu1, mu2).expect("equal lengths by construction")
}

/// Multipliers and minimiser of the minimum-energy problem with the master
/// equation linearised about the current trajectory:
///
/// ```text
/// min Σ_m u'_m² Δt
/// s.t. δρ_{m+1} = A_m δρ_m + b_m (u'_m − u_m),  δρ_0 = 0,
///      α ≤ C²(ρ_k) + ∇C²(ρ_k)·δρ_k ≤ β,  k = 1..N
/// ```
///
/// `A_m`, `b_m` are the exact derivatives of one integration step. The
/// sample multipliers `ν±_k` of the two bounds accumulate backward into
/// `μ₁`, `μ₂`; at a fixed point of the sweep the stationary control built
/// from them coincides with the minimiser `u'`, which is returned alongside.
pub fn linearized_multipliers(
    model: &SystemModel,
    trajectory: &StateTrajectory,
    grid: &ControlGrid,
    constraint: &ConstraintSpec,
) -> Result<(MultiplierPath, Vec<f64>)> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{
        DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
    };

    let n = grid.steps();
    if trajectory.len() != n + 1 {
        return Err(Error::InvalidGrid(format!(
            "grid has {n} intervals but trajectory has {} samples",
            trajectory.len()
        )));
    }
    let basis = CoherenceBasis::new(&constraint.pairs, model.dim())?;
    let coords = hermitian_basis(model.dim());
    let d = coords.len();
    let steps = linearize_steps(model, trajectory, grid)?;
    let mut level = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    for state in &trajectory.states[1..] {
        let rho = state.matrix();
        level.push(basis.coherence_squared(rho)?);
        let weight = basis.weight_operator(rho)?;
        // ∂C²/∂x_i = 2 Tr(W E_i)
        slope.push(
            coords
                .iter()
                .map(|e| 2.0 * trace_product(&weight, e).re)
                .collect::<Vec<f64>>(),
        );
    }

    // Variables: u'_0..u'_{n-1}, then δρ_1..δρ_n in Hermitian coordinates.
    // Rows: n·d step equations, n upper bounds, n lower bounds.
    let rows = n * d + 2 * n;
    let cols = n + n * d;
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for (m, step) in steps.iter().enumerate() {
        for (i, &b) in step.control.iter().enumerate() {
            if b != 0.0 {
                rowval.push(m * d + i);
                nzval.push(-b);
            }
        }
        colptr.push(rowval.len());
    }
    for k in 1..=n {
        for j in 0..d {
            rowval.push((k - 1) * d + j);
            nzval.push(1.0);
            if k < n {
                let map = &steps[k].map;
                for i in 0..d {
                    if map[(i, j)] != 0.0 {
                        rowval.push(k * d + i);
                        nzval.push(-map[(i, j)]);
                    }
                }
            }
            let g = slope[k - 1][j];
            if g != 0.0 {
                rowval.push(n * d + k - 1);
                nzval.push(g);
                rowval.push(n * d + n + k - 1);
                nzval.push(-g);
            }
            colptr.push(rowval.len());
        }
    }
    debug_assert_eq!(colptr.len(), cols + 1);
    let a = CscMatrix::new(rows, cols, colptr, rowval, nzval);

    let dt = grid.dt();
    let mut b = Vec::with_capacity(rows);
    for (m, step) in steps.iter().enumerate() {
        let u = grid.controls()[m];
        b.extend(step.control.iter().map(|v| -v * u));
    }
    b.extend(level.iter().map(|c2| constraint.beta - c2));
    b.extend(level.iter().map(|c2| c2 - constraint.alpha));

    let p = {
        let colptr: Vec<usize> = (0..=cols).map(|j| j.min(n)).collect();
        CscMatrix::new(cols, cols, colptr, (0..n).collect(), vec![2.0 * dt; n])
    };
    let q = vec![0.0; cols];
    let cones = [ZeroConeT(n * d), NonnegativeConeT(2 * n)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .map_err(|e| Error::ConstraintSolve(e.to_string()))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::ConstraintSolve(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        status => return Err(Error::ConstraintSolve(format!("solver status {status:?}"))),
    }
    let dual = &solver.solution.z;
    let mut mu1 = vec![0.0; n];
    let mut mu2 = vec![0.0; n];
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    for m in (0..n).rev() {
        acc1 += dual[n * d + m].max(0.0);
        acc2 += dual[n * d + n + m].max(0.0);
        mu1[m] = acc1;
        mu2[m] = acc2;
    }
    let minimiser = solver.solution.x[..n].to_vec();
    Ok((MultiplierPath::from_bounds(mu1, mu2)?, minimiser))
}

/// Largest per-step change between two iterates: entrywise max-norm for ρ
/// and π, absolute difference for u and μ.
pub fn convergence_metric(prev: &SweepIterate, curr: &SweepIterate) -> f64 {
    let parts = convergence_components(prev, curr);
    parts.iter().copied().fold(0.0, f64::max)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `[ρ, π, u, μ]` components of [`convergence_metric`].
pub fn convergence_components(prev: &SweepIterate, curr: &SweepIterate) -> [f64; 4] {
    let rho = prev
        .trajectory
        .states
        .iter()
        .zip(&curr.trajectory.states)
        .map(|(a, b)| max_abs(&(a.matrix() - b.matrix())))
        .fold(0.0, f64::max);
    let pi = prev
        .adjoint
        .costates
        .iter()
        .zip(&curr.adjoint.costates)
        .map(|(a, b)| max_abs(&(a - b)))
        .fold(0.0, f64::max);
    let u = max_diff(&prev.controls, &curr.controls);
    let mu = max_diff(prev.multipliers.mu(), curr.multipliers.mu());
    [rho, pi, u, mu]
}

fn coherence_sq_path(basis: &CoherenceBasis, trajectory: &StateTrajectory) -> Result<Vec<f64>> {
    trajectory
        .states
        .iter()
        .map(|s| basis.coherence_squared(s.matrix()))
        .collect()
}

fn check_finite_controls(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(step) => Err(Error::NonFinite { what: "control", step }),
        None => Ok(()),
    }
}

/// Stationary control `u*_m` at every interval start.
fn stationary_path(
    model: &SystemModel,
    basis: &CoherenceBasis,
    iterate: &SweepIterate,
    grid: &ControlGrid,
) -> Result<Vec<f64>> {
    (0..grid.steps())
        .map(|m| {
            let rho = iterate.trajectory.states[m].matrix();
            let pi = &iterate.adjoint.costates[m];
            let mu = iterate.multipliers.mu()[m];
            Ok(-0.5 * control_gradient(model, basis, rho, pi, mu, grid.time(m))?)
        })
        .collect()
}

/// Forward-backward sweep. Each pass integrates the state under the current
/// control, updates the multipliers, integrates the costate backward from
/// `π(t_f) = 0`, and moves the control towards its target by the convex
/// combination `ζ₁ target + ζ₂ u`. Iteration stops once two successive
/// passes agree to the configured tolerances.
pub fn sweep(
    model: &SystemModel,
    rho0: &DensityMatrix,
    grid0: &ControlGrid,
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    let pairs = &cfg.constraint.pairs;
    let basis = CoherenceBasis::new(pairs, model.dim())?;
    let start = basis.coherence_squared(rho0.matrix())?;
    if !cfg.constraint.contains(start) {
        return Err(Error::InfeasibleStart {
            value: start,
            alpha: cfg.constraint.alpha,
            beta: cfg.constraint.beta,
        });
    }

    let pass = |controls: Vec<f64>, prev: &MultiplierPath| -> Result<(SweepIterate, Vec<f64>)> {
        check_finite_controls(&controls)?;
        let grid = grid0.with_controls(controls)?;
        let trajectory = integrate_forward(model, rho0, &grid)?;
        let seed = match cfg.reset {
            MultiplierReset::WarmStart => prev.clone(),
            MultiplierReset::Zero => MultiplierPath::zeros(grid.steps()),
        };
        let (multipliers, minimiser) = match cfg.rule {
            MultiplierRule::StepChange => {
                let c2 = coherence_sq_path(&basis, &trajectory)?;
                (update_multipliers(&c2, &seed, cfg), None)
            }
            MultiplierRule::Linearized => {
                let (target, minimiser) =
                    linearized_multipliers(model, &trajectory, &grid, &cfg.constraint)?;
                let blend = |old: &[f64], new: &[f64], eta: f64| -> Vec<f64> {
                    old.iter().zip(new).map(|(o, n)| o + eta * (n - o)).collect()
                };
                let path = MultiplierPath::from_bounds(
                    blend(seed.mu1(), target.mu1(), cfg.eta_i),
                    blend(seed.mu2(), target.mu2(), cfg.eta_d),
                )?;
                (path, Some(minimiser))
            }
        };
        let adjoint = integrate_backward(model, &trajectory, &grid, multipliers.mu(), pairs)?;
        let iterate = SweepIterate {
            trajectory,
            adjoint,
            controls: grid.controls().to_vec(),
            multipliers,
        };
        let target = match minimiser {
            Some(u) => u,
            None => stationary_path(model, &basis, &iterate, &grid)?,
        };
        Ok((iterate, target))
    };

    let (mut current, mut target) =
        pass(grid0.controls().to_vec(), &MultiplierPath::zeros(grid0.steps()))?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next: Vec<f64> = current
            .controls
            .iter()
            .zip(&target)
            .map(|(u, t)| cfg.zeta1 * t + cfg.zeta2 * u)
            .collect();
        let (iterate, next_target) = pass(next, &current.multipliers)?;
        iterations += 1;
        let parts = convergence_components(&current, &iterate);
        let metric = parts.iter().copied().fold(0.0, f64::max);
        history.push(metric);
        current = iterate;
        target = next_target;
        if parts[0] < cfg.eps_rho
            && parts[1] < cfg.eps_pi
            && parts[2] < cfg.eps_u
            && parts[3] < cfg.eps_mu
            && metric < cfg.eps
        {
            converged = true;
            break;
        }
    }

    let controls = grid0.with_controls(current.controls)?;
    let coherence_path = current.trajectory.coherence_path(pairs)?;
    Ok(SweepResult {
        cost: cost(&controls),
        trajectory: current.trajectory,
        adjoint: current.adjoint,
        controls,
        multipliers: current.multipliers,
        coherence_path,
        convergence_history: history,
        iterations,
        converged,
    })
}
