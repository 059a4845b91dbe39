//! Lindblad evolution, the χ superoperator, and fixed-step RK4 sweeps on a
//! zero-order-hold control grid.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::{
    c, check_square, dissipator, dissipator_l0, hermiticity_defect, hermitize, ket_bra,
    trace_product, CMatrix, CoherenceBasis, CoherencePair, DecoherenceChannel, DensityMatrix, I,
};

/// Time-dependent control-Hamiltonian envelope `t ↦ H_c(t)`.
pub type Envelope = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

const MODEL_HERMITIAN_TOL: f64 = 1e-12;

/// Drift Hamiltonian, control envelope and decoherence channel. The total
/// Hamiltonian is `H(t) = H₀ + u·H_c(t)`.
#[derive(Clone)]
pub struct SystemModel {
    dim: usize,
    h0: CMatrix,
    envelope: Envelope,
    channel: DecoherenceChannel,
    hbar: f64,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("dim", &self.dim)
            .field("h0", &self.h0)
            .field("channel", &self.channel)
            .field("hbar", &self.hbar)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    pub fn new(h0: CMatrix, envelope: Envelope, channel: DecoherenceChannel) -> Result<Self> {
        let dim = h0.nrows();
        check_square(&h0, dim)?;
        if hermiticity_defect(&h0) > MODEL_HERMITIAN_TOL {
            return Err(Error::InvalidState("drift Hamiltonian is not Hermitian".into()));
        }
        if channel.dim() != dim {
            return Err(Error::InvalidChannel(format!(
                "channel acts on dimension {}, model has dimension {dim}",
                channel.dim()
            )));
        }
        let hc = envelope(0.0);
        check_square(&hc, dim)?;
        if hermiticity_defect(&hc) > MODEL_HERMITIAN_TOL {
            return Err(Error::InvalidState("control envelope is not Hermitian".into()));
        }
        Ok(Self {
            dim,
            h0,
            envelope,
            channel,
            hbar: 1.0,
        })
    }

    /// Model whose control operator does not depend on time.
    pub fn with_static_control(h0: CMatrix, hc: CMatrix, channel: DecoherenceChannel) -> Result<Self> {
        Self::new(h0, Arc::new(move |_| hc.clone()), channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn channel(&self) -> &DecoherenceChannel {
        &self.channel
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `H_c(t)`.
    pub fn control_operator(&self, t: f64) -> CMatrix {
        (self.envelope)(t)
    }
}

/// Uniform grid on `[t0, tf]` with one held control sample per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    t0: f64,
    tf: f64,
    u: Vec<f64>,
}

impl ControlGrid {
    pub fn new(t0: f64, tf: f64, u: Vec<f64>) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && tf > t0) {
            return Err(Error::InvalidGrid(format!("need finite t0 < tf, got [{t0}, {tf}]")));
        }
        if u.is_empty() {
            return Err(Error::InvalidGrid("at least one step is required".into()));
        }
        if let Some(m) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("control sample {m} is not finite")));
        }
        Ok(Self { t0, tf, u })
    }

    pub fn constant(t0: f64, tf: f64, steps: usize, value: f64) -> Result<Self> {
        Self::new(t0, tf, vec![value; steps])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn steps(&self) -> usize {
        self.u.len()
    }

    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / self.u.len() as f64
    }

    /// Grid instant `t_m`, `m` in `0..=steps`.
    pub fn time(&self, m: usize) -> f64 {
        if m == self.u.len() {
            self.tf
        } else {
            self.t0 + m as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|m| self.time(m)).collect()
    }

    pub fn controls(&self) -> &[f64] {
        &self.u
    }

    pub fn controls_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn with_controls(&self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.u.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} control samples, got {}",
                self.u.len(),
                u.len()
            )));
        }
        Self::new(self.t0, self.tf, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// `C(ρ(t_m))` at every grid instant.
    pub fn coherence_path(&self, pairs: &[CoherencePair]) -> Result<Vec<f64>> {
        let Some(first) = self.states.first() else {
            return Ok(Vec::new());
        };
        let basis = CoherenceBasis::new(pairs, first.dim())?;
        self.states
            .iter()
            .map(|s| basis.coherence_squared(s.matrix()).map(f64::sqrt))
            .collect()
    }
}

/// Costate samples on the grid; the last entry is the terminal condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub costates: Vec<CMatrix>,
}

/// `H(t) = H₀ + u·H_c(t)`.
pub fn hamiltonian(model: &SystemModel, t: f64, u: f64) -> CMatrix {
    if u == 0.0 {
        return model.h0.clone();
    }
    &model.h0 + model.control_operator(t) * c(u)
}

fn lindblad_rhs_with(model: &SystemModel, h: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let unitary = (h * rho - rho * h) * (-I / model.hbar);
    Ok(unitary + dissipator(&model.channel, rho)?)
}

/// `dρ/dt = −(i/ħ)[H(t), ρ] + ℒ(ρ)`.
pub fn lindblad_rhs(model: &SystemModel, rho: &CMatrix, t: f64, u: f64) -> Result<CMatrix> {
    check_square(rho, model.dim)?;
    lindblad_rhs_with(model, &hamiltonian(model, t, u), rho)
}

fn chi_with(model: &SystemModel, h: &CMatrix, phi: &CMatrix) -> Result<CMatrix> {
    let unitary = (phi * h - h * phi) * (-I / model.hbar);
    Ok(unitary + dissipator(&model.channel, phi)? + dissipator_l0(&model.channel, phi)?)
}

/// `χ(φ) = −(i/ħ)[φ, H(t)] + ℒ(φ) + ℒ₀(φ)`: the Heisenberg-picture generator
/// dual to [`lindblad_rhs`], i.e. `Tr(χ(φ) ρ) = Tr(φ ρ̇)`.
pub fn chi(model: &SystemModel, phi: &CMatrix, t: f64, u: f64) -> Result<CMatrix> {
    check_square(phi, model.dim)?;
    chi_with(model, &hamiltonian(model, t, u), phi)
}

/// `∂𝓗/∂ρ`: the four-term gradient of the extended Pontryagin Hamiltonian
/// with respect to the state.
pub(crate) fn hamiltonian_state_gradient(
    model: &SystemModel,
    basis: &CoherenceBasis,
    h: &CMatrix,
    pi: &CMatrix,
    rho: &CMatrix,
    mu: f64,
) -> Result<CMatrix> {
    if mu == 0.0 {
        return chi_with(model, h, &pi.adjoint());
    }
    // χ is linear and dual to the master equation, so
    // Σ ⟨δ⟩χ(δ) = χ(W) and ⟨χ(δ)⟩ = Tr(δ ρ̇).
    let weight = basis.weight_operator(rho)?;
    let mut grad = chi_with(model, h, &(pi.adjoint() + weight * c(mu)))?;
    let rate = lindblad_rhs_with(model, h, rho)?;
    for (re, im) in basis.ops() {
        grad += re * (trace_product(re, &rate) * c(mu)) + im * (trace_product(im, &rate) * c(mu));
    }
    Ok(grad)
}

/// Costate right-hand side `dπ/dt = −∂𝓗/∂ρ`.
pub fn adjoint_rhs(
    model: &SystemModel,
    pi: &CMatrix,
    rho: &CMatrix,
    mu: f64,
    pairs: &[CoherencePair],
    t: f64,
    u: f64,
) -> Result<CMatrix> {
    check_square(pi, model.dim)?;
    check_square(rho, model.dim)?;
    let basis = CoherenceBasis::new(pairs, model.dim)?;
    let h = hamiltonian(model, t, u);
    Ok(-hamiltonian_state_gradient(model, &basis, &h, pi, rho, mu)?)
}

/// One classical RK4 step of the master equation with `u` held over `[t, t + dt]`.
pub(crate) fn rk4_step(model: &SystemModel, rho: &CMatrix, t: f64, dt: f64, u: f64) -> Result<CMatrix> {
    let half = c(0.5 * dt);
    let h_start = hamiltonian(model, t, u);
    let h_mid = hamiltonian(model, t + 0.5 * dt, u);
    let h_end = hamiltonian(model, t + dt, u);
    let k1 = lindblad_rhs_with(model, &h_start, rho)?;
    let k2 = lindblad_rhs_with(model, &h_mid, &(rho + &k1 * half))?;
    let k3 = lindblad_rhs_with(model, &h_mid, &(rho + &k2 * half))?;
    let k4 = lindblad_rhs_with(model, &h_end, &(rho + &k3 * c(dt)))?;
    Ok(rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0))
}

/// Matrices `E_i` with `m = Σ_i x_i E_i` for Hermitian `m` and the real
/// coordinates `x` of [`hermitian_coords`].
pub(crate) fn hermitian_basis(dim: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        basis.push(ket_bra(j, j, dim));
    }
    for j in 0..dim {
        for k in j + 1..dim {
            basis.push(ket_bra(j, k, dim) + ket_bra(k, j, dim));
            basis.push((ket_bra(j, k, dim) - ket_bra(k, j, dim)) * I);
        }
    }
    basis
}

/// The diagonal of `m`, then `(Re, Im)` of every upper off-diagonal entry.
pub(crate) fn hermitian_coords(m: &CMatrix) -> Vec<f64> {
    let dim = m.nrows();
    let mut x = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        x.push(m[(j, j)].re);
    }
    for j in 0..dim {
        for k in j + 1..dim {
            x.push(m[(j, k)].re);
            x.push(m[(j, k)].im);
        }
    }
    x
}

/// Exact first-order response of one RK4 step in Hermitian coordinates:
/// `δρ_{m+1} = map · δρ_m + control · δu_m`.
#[derive(Debug, Clone)]
pub(crate) struct StepLinearization {
    pub map: DMatrix<f64>,
    pub control: Vec<f64>,
}

/// Linearises every step of `trajectory` about its own states and controls.
pub(crate) fn linearize_steps(
    model: &SystemModel,
    trajectory: &StateTrajectory,
    grid: &ControlGrid,
) -> Result<Vec<StepLinearization>> {
    let dim = model.dim;
    let basis = hermitian_basis(dim);
    let dt = grid.dt();
    let mut steps = Vec::with_capacity(grid.steps());
    for (m, &u) in grid.controls().iter().enumerate() {
        let t = grid.time(m);
        let mut map = DMatrix::zeros(dim * dim, dim * dim);
        for (j, e) in basis.iter().enumerate() {
            // The step is linear in ρ, so its image of a basis element is a column.
            let image = rk4_step(model, e, t, dt, u)?;
            for (i, v) in hermitian_coords(&image).into_iter().enumerate() {
                map[(i, j)] = v;
            }
        }
        // The step is a quartic in u: the central difference error is h²·O(dt³).
        let h = 1e-4 * u.abs().max(1.0);
        let rho = trajectory.states[m].matrix();
        let up = rk4_step(model, rho, t, dt, u + h)?;
        let down = rk4_step(model, rho, t, dt, u - h)?;
        let control = hermitian_coords(&((up - down) * c(0.5 / h)));
        steps.push(StepLinearization { map, control });
    }
    Ok(steps)
}

/// Classical RK4 of the master equation, holding `u_m` on each interval.
/// Stored samples are re-Hermitized.
pub fn integrate_forward(
    model: &SystemModel,
    rho0: &DensityMatrix,
    grid: &ControlGrid,
) -> Result<StateTrajectory> {
    check_square(rho0.matrix(), model.dim)?;
    let dt = grid.dt();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(rho0.clone());
    let mut rho = rho0.matrix().clone();
    for (m, &u) in grid.controls().iter().enumerate() {
        rho = rk4_step(model, &rho, grid.time(m), dt, u)?;
        let sample = DensityMatrix::from_trajectory(rho, m + 1)?;
        rho = sample.matrix().clone();
        states.push(sample);
    }
    Ok(StateTrajectory {
        times: grid.times(),
        states,
    })
}

/// Backward RK4 of the costate from `π(t_f) = 0`. `mu[m]` is the multiplier
/// held on interval `m`; states between grid nodes are linearly interpolated.
pub fn integrate_backward(
    model: &SystemModel,
    trajectory: &StateTrajectory,
    grid: &ControlGrid,
    mu: &[f64],
    pairs: &[CoherencePair],
) -> Result<AdjointTrajectory> {
    let basis = CoherenceBasis::new(pairs, model.dim)?;
    integrate_backward_from(model, trajectory, grid, mu, &basis, crate::operators::zeros(model.dim))
}

/// As [`integrate_backward`] with an arbitrary Hermitian terminal costate.
pub fn integrate_backward_from(
    model: &SystemModel,
    trajectory: &StateTrajectory,
    grid: &ControlGrid,
    mu: &[f64],
    basis: &CoherenceBasis,
    terminal: CMatrix,
) -> Result<AdjointTrajectory> {
    let steps = grid.steps();
    if trajectory.len() != steps + 1 || mu.len() != steps {
        return Err(Error::InvalidGrid(format!(
            "grid has {steps} intervals but trajectory has {} samples and multiplier path {} entries",
            trajectory.len(),
            mu.len()
        )));
    }
    check_square(&terminal, model.dim)?;
    let dt = grid.dt();
    let mut costates = vec![terminal.clone(); steps + 1];
    let mut pi = terminal;
    for m in (0..steps).rev() {
        let u = grid.controls()[m];
        let t_end = grid.time(m + 1);
        let rho_end = trajectory.states[m + 1].matrix();
        let rho_start = trajectory.states[m].matrix();
        let rho_mid = (rho_start + rho_end) * c(0.5);
        let h_end = hamiltonian(model, t_end, u);
        let h_mid = hamiltonian(model, t_end - 0.5 * dt, u);
        let h_start = hamiltonian(model, t_end - dt, u);
        let g = |h: &CMatrix, p: &CMatrix, r: &CMatrix| {
            hamiltonian_state_gradient(model, basis, h, p, r, mu[m])
        };
        // dπ/dt = −G, stepping backwards in time: π(t − dt) = π(t) + dt·G…
        let k1 = g(&h_end, &pi, rho_end)?;
        let k2 = g(&h_mid, &(&pi + &k1 * c(0.5 * dt)), &rho_mid)?;
        let k3 = g(&h_mid, &(&pi + &k2 * c(0.5 * dt)), &rho_mid)?;
        let k4 = g(&h_start, &(&pi + &k3 * c(dt)), rho_start)?;
        pi += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
        if pi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "costate", step: m });
        }
        pi = hermitize(&pi);
        costates[m] = pi.clone();
    }
    Ok(AdjointTrajectory {
        times: grid.times(),
        costates,
    })
}
