//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use coherence_pmp::dynamics::{integrate_backward, integrate_forward, ControlGrid, SystemModel};
use coherence_pmp::models::{build_qutrit, reference_config, Mode};
use coherence_pmp::operators::{
    coherence, coherence_pair_ops, coherence_squared, hermiticity_defect, ket_bra, max_abs, trace,
    unital_defect, zeros, CMatrix, CoherencePair, DecoherenceChannel, DensityMatrix,
};
use coherence_pmp::pmp::{
    boundary_control, phi_delta, pontryagin_hamiltonian, stationarity_residual, stationary_control, sweep,
};
use coherence_pmp::Error;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn pair01() -> Vec<CoherencePair> {
    vec![CoherencePair::new(0, 1).unwrap()]
}

fn random_state(rng: &mut StdRng, dim: usize) -> DensityMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let p = &a * a.adjoint();
    let t = trace(&p).re;
    DensityMatrix::new(p / re(t)).unwrap()
}

fn random_hermitian(rng: &mut StdRng, dim: usize) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&a + a.adjoint()) * re(0.5)
}

fn initial_coherence() -> Outcome {
    let cfg = reference_config();
    let value = coherence(cfg.rho0.matrix(), &cfg.pairs).map_err(|e| e.to_string())?;
    ensure((value - 0.5515).abs() <= 5e-4, format!("C(rho0) = {value:.6}"))
}

fn free_decay() -> Outcome {
    let cfg = reference_config().with_mode(Mode::Free);
    let model = cfg.model().unwrap();
    let traj = integrate_forward(&model, &cfg.rho0, &cfg.control_grid().unwrap()).map_err(|e| e.to_string())?;
    let path = traj.coherence_path(&cfg.pairs).unwrap();
    let ratio = path.last().unwrap() / path[0];
    let want = (-0.2f64).exp();
    ensure((ratio - want).abs() <= 2e-3, format!("ratio {ratio:.6}, expected {want:.6}"))
}

fn conservation() -> Outcome {
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    for mode in [Mode::Free, Mode::ConstantControl] {
        let cfg = reference_config().with_mode(mode);
        let model = cfg.model().unwrap();
        let traj =
            integrate_forward(&model, &cfg.rho0, &cfg.control_grid().unwrap()).map_err(|e| e.to_string())?;
        for s in &traj.states {
            worst_trace = worst_trace.max((trace(s.matrix()) - re(1.0)).norm());
            worst_herm = worst_herm.max(hermiticity_defect(s.matrix()));
        }
    }
    ensure(
        worst_trace <= 1e-6 && worst_herm <= 1e-10,
        format!("max |Tr rho - 1| = {worst_trace:.2e}, max Hermiticity drift = {worst_herm:.2e}"),
    )
}

fn non_unitality() -> Outcome {
    let channel = reference_config().model().unwrap().channel().clone();
    let d = unital_defect(&channel);
    let want = [0.1, 0.001, -0.101];
    let mut err: f64 = 0.0;
    for r in 0..3 {
        for col in 0..3 {
            let target = if r == col { want[r] } else { 0.0 };
            err = err.max((d[(r, col)] - re(target)).norm());
        }
    }
    let (x, y) = coherence_pair_ops(CoherencePair::new(0, 2).unwrap(), 3).unwrap();
    let hermitian = DecoherenceChannel::new(3, vec![x, y], vec![0.3, 0.05]).unwrap();
    let zero = max_abs(&unital_defect(&hermitian));
    ensure(
        err <= 1e-14 && max_abs(&d) > 0.0 && zero <= 1e-14,
        format!("diagonal error {err:.1e}, Hermitian-channel defect {zero:.1e}"),
    )
}

fn convexity() -> Outcome {
    let model = reference_config().model().unwrap();
    let pairs = pair01();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_state(&mut rng, 3);
        let pi = random_hermitian(&mut rng, 3);
        let mu = rng.gen_range(-5.0..5.0);
        let t = rng.gen_range(0.0..20.0);
        let u = rng.gen_range(-1.0..1.0);
        let h = 0.5;
        let at = |v: f64| pontryagin_hamiltonian(&model, rho.matrix(), &pi, v, mu, &pairs, t).unwrap();
        let second = (at(u + h) - 2.0 * at(u) + at(u - h)) / (h * h);
        worst = worst.max((second - 2.0).abs());
    }
    ensure(worst <= 1e-10, format!("max |d2H/du2 - 2| = {worst:.1e} over 100 samples"))
}

fn stationarity() -> Outcome {
    let model = reference_config().model().unwrap();
    let pairs = pair01();
    let mut rng = StdRng::seed_from_u64(11);
    let mut fd_err: f64 = 0.0;
    let mut zero_err: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_state(&mut rng, 3);
        let pi = random_hermitian(&mut rng, 3);
        let mu = rng.gen_range(-5.0..5.0);
        let t = rng.gen_range(0.0..20.0);
        let u = rng.gen_range(-1.0..1.0);
        let h = 1e-3;
        let at = |v: f64| pontryagin_hamiltonian(&model, rho.matrix(), &pi, v, mu, &pairs, t).unwrap();
        let fd = (at(u + h) - at(u - h)) / (2.0 * h);
        let r = stationarity_residual(&model, rho.matrix(), &pi, mu, &pairs, t, u).unwrap();
        fd_err = fd_err.max((fd - r).abs());
        let star = stationary_control(&model, rho.matrix(), &pi, mu, &pairs, t).unwrap();
        let r_star = stationarity_residual(&model, rho.matrix(), &pi, mu, &pairs, t, star).unwrap();
        zero_err = zero_err.max(r_star.abs());
    }
    ensure(
        fd_err <= 1e-8 && zero_err <= 1e-12,
        format!("finite-difference error {fd_err:.1e}, residual at u* {zero_err:.1e}"),
    )
}

fn toy_model() -> SystemModel {
    let mut h0 = zeros(2);
    h0[(0, 0)] = re(-0.3);
    h0[(1, 1)] = re(0.3);
    let (hx, _) = coherence_pair_ops(CoherencePair::new(0, 1).unwrap(), 2).unwrap();
    let channel = DecoherenceChannel::new(2, vec![ket_bra(0, 1, 2)], vec![0.2]).unwrap();
    SystemModel::with_static_control(h0, hx, channel).unwrap()
}

/// Largest mismatch between finite differences of the discretised
/// Lagrangian `Σ u_m² Δt + Σ_m ½ μ (C²_{m+1} − C²_m)` and `Δt ∂𝓗/∂u`,
/// relative to the largest finite difference.
fn gradient_mismatch(mu: f64, trapezoid: bool) -> f64 {
    let model = toy_model();
    let rho0 = DensityMatrix::pure(&[re(0.6), Complex64::new(0.3, 0.74)]).unwrap();
    let pairs = pair01();
    let u: Vec<f64> = (0..10).map(|m| 0.3 * (0.7 * m as f64).sin() + 0.1).collect();
    let grid = ControlGrid::new(0.0, 1.0, u.clone()).unwrap();
    let lagrangian = |v: &[f64]| {
        let g = grid.with_controls(v.to_vec()).unwrap();
        let traj = integrate_forward(&model, &rho0, &g).unwrap();
        let c2: Vec<f64> = traj.states.iter().map(|s| coherence_squared(s.matrix(), &pairs).unwrap()).collect();
        let energy: f64 = v.iter().map(|x| x * x).sum::<f64>() * g.dt();
        energy + c2.windows(2).map(|w| 0.5 * mu * (w[1] - w[0])).sum::<f64>()
    };
    let traj = integrate_forward(&model, &rho0, &grid).unwrap();
    let adj = integrate_backward(&model, &traj, &grid, &[mu; 10], &pairs).unwrap();
    let residual = |k: usize, m: usize| {
        stationarity_residual(&model, traj.states[k].matrix(), &adj.costates[k], mu, &pairs, grid.time(k), u[m])
            .unwrap()
    };
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for m in 0..10 {
        let h = 1e-6;
        let mut up = u.clone();
        up[m] += h;
        let mut down = u.clone();
        down[m] -= h;
        let fd = (lagrangian(&up) - lagrangian(&down)) / (2.0 * h);
        let r = if trapezoid {
            0.5 * (residual(m, m) + residual(m + 1, m))
        } else {
            residual(m, m)
        };
        err = err.max((fd - r * grid.dt()).abs());
        scale = scale.max(fd.abs());
    }
    err / scale
}

fn gradient_check() -> Outcome {
    let plain = gradient_mismatch(0.0, false);
    let coupled = gradient_mismatch(1.5, true);
    ensure(
        plain <= 1e-2 && coupled <= 1e-2,
        format!("relative mismatch {plain:.1e} (mu = 0), {coupled:.1e} (mu = 1.5, interval average)"),
    )
}

fn feasibility_identities() -> Outcome {
    let cfg = reference_config().with_mode(Mode::ConstantControl);
    let model = cfg.model().unwrap();
    let grid = cfg.control_grid().unwrap();
    let traj = integrate_forward(&model, &cfg.rho0, &grid).map_err(|e| e.to_string())?;
    let c2: Vec<f64> = traj
        .states
        .iter()
        .map(|s| coherence_squared(s.matrix(), &cfg.pairs).unwrap())
        .collect();
    let dt = grid.dt();
    let mut rate_err: f64 = 0.0;
    let mut boundary_err: f64 = 0.0;
    for m in 1..grid.steps() {
        let rho = traj.states[m].matrix();
        let t = grid.time(m);
        let (phi, delta) = phi_delta(&model, rho, &cfg.pairs, t).unwrap();
        let fd = (c2[m + 1] - c2[m - 1]) / (2.0 * dt);
        rate_err = rate_err.max((fd - (phi * grid.controls()[m] + delta)).abs());
        if let Ok(u) = boundary_control(&model, rho, &cfg.pairs, t, 1e-10) {
            boundary_err = boundary_err.max((phi * u + delta).abs());
        }
    }
    let diagonal = DensityMatrix::from_populations(&[0.5, 0.3, 0.2]).unwrap();
    let singular = matches!(
        boundary_control(&model, diagonal.matrix(), &cfg.pairs, 0.0, 1e-10),
        Err(Error::SingularControlDirection { .. })
    );
    ensure(
        rate_err <= 1e-4 && boundary_err <= 1e-12 && singular,
        format!(
            "max |dC2/dt - (Phi u + Delta)| = {rate_err:.1e}, max |Phi u_b + Delta| = {boundary_err:.1e}, diagonal state singular: {singular}"
        ),
    )
}

fn constrained_solve() -> Outcome {
    let cfg = reference_config();
    let model = cfg.model().unwrap();
    let (lo, hi) = cfg.coherence_bounds;
    let out = sweep(&model, &cfg.rho0, &cfg.control_grid().unwrap(), &cfg.solver).map_err(|e| e.to_string())?;
    let (min, max) = out
        .coherence_path
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let in_band = min >= lo - 1e-3 && max <= hi + 1e-3;
    let terminal = max_abs(out.adjoint.costates.last().unwrap()) == 0.0;
    let history = &out.convergence_history;
    let decreasing = history.len() >= 2 && history.last() < history.first();
    ensure(
        in_band && terminal && decreasing && out.cost.is_finite(),
        format!(
            "C in [{min:.6}, {max:.6}], pi(tf) = 0: {terminal}, metric {:.2e} -> {:.2e}, J = {:.6}, {} iterations, converged: {}",
            history.first().copied().unwrap_or(f64::NAN),
            history.last().copied().unwrap_or(f64::NAN),
            out.cost,
            out.iterations,
            out.converged
        ),
    )
}

fn integrator_order() -> Outcome {
    let cfg = reference_config();
    let model = build_qutrit(&cfg.qutrit).unwrap();
    let final_c = |steps: usize| {
        let grid = ControlGrid::constant(0.0, 20.0, steps, 0.0).unwrap();
        let traj = integrate_forward(&model, &cfg.rho0, &grid).unwrap();
        coherence(traj.last().matrix(), &cfg.pairs).unwrap()
    };
    let diff = (final_c(1000) - final_c(2000)).abs();
    ensure(diff <= 1e-6, format!("|C(20; dt) - C(20; dt/2)| = {diff:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("initial coherence", initial_coherence),
        ("free-decay oracle", free_decay),
        ("trace and Hermiticity conservation", conservation),
        ("non-unital channel defect", non_unitality),
        ("convexity of the Hamiltonian in u", convexity),
        ("stationarity consistency", stationarity),
        ("adjoint gradient check", gradient_check),
        ("feasibility identities", feasibility_identities),
        ("constrained solve", constrained_solve),
        ("integrator order", integrator_order),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
