//! Dense complex-matrix algebra for open N-level systems.
//!
//! Everything here works on `DMatrix<Complex64>` with ħ = 1 unless a caller
//! scales explicitly. Density matrices, coherence operators and measures,
//! the Lindblad dissipator and its adjoint companion ℒ₀, and the weight
//! operator `W(ρ) = Σ (⟨δRe⟩ δRe + ⟨δIm⟩ δIm)` used by the control
//! Hamiltonian all live in this module.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(dim: usize) -> CMatrix {
    CMatrix::zeros(dim, dim)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `|j⟩⟨k|` in dimension `dim`.
pub fn ket_bra(j: usize, k: usize, dim: usize) -> CMatrix {
    let mut m = zeros(dim);
    m[(j, k)] = c(1.0);
    m
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Max-norm of `A - A†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for col in r..n {
            worst = worst.max((m[(r, col)] - m[(col, r)].conj()).norm());
        }
    }
    worst
}

/// `(A + A†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for k in 0..n {
            acc += a[(r, k)] * b[(k, r)];
        }
    }
    acc
}

pub(crate) fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found_rows: m.nrows(),
            found_cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_same(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found_rows: a.nrows(),
            found_cols: a.ncols(),
        });
    }
    check_square(b, a.nrows())
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// A valid quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const TRAJECTORY_TRACE_TOL: f64 = 1e-6;
    pub const EIGENVALUE_FLOOR: f64 = -1e-8;

    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::InvalidState(format!(
                "expected a non-empty square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("entries must be finite".into()));
        }
        let herm = hermiticity_defect(&data);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |rho - rho^dagger| = {herm:e})"
            )));
        }
        let tr = trace(&data);
        if (tr - c(1.0)).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        let min_eig = hermitian_eigenvalues(&data)[0];
        if min_eig < Self::EIGENVALUE_FLOOR {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (minimum eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { data })
    }

    /// Builds a state from a real diagonal of populations.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        let mut m = zeros(n);
        for (idx, p) in populations.iter().enumerate() {
            m[(idx, idx)] = c(*p);
        }
        Self::new(m)
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalised first.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = amplitudes.len();
        let m = CMatrix::from_fn(n, n, |r, col| amplitudes[r] * amplitudes[col].conj() / (norm * norm));
        Self::new(m)
    }

    /// Sample produced by an integrator: re-Hermitized, finite, trace
    /// within the trajectory tolerance. Positivity is not re-checked here.
    pub(crate) fn from_trajectory(data: CMatrix, step: usize) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "state", step });
        }
        let data = hermitize(&data);
        let tr = trace(&data);
        if (tr - c(1.0)).norm() > Self::TRAJECTORY_TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace drifted to {} at step {step}",
                tr.re
            )));
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_inner(self) -> CMatrix {
        self.data
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.data)[0]
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.data
    }
}

/// Index pair `(j, k)` with `j < k` selecting one off-diagonal coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoherencePair {
    j: usize,
    k: usize,
}

impl CoherencePair {
    pub fn new(j: usize, k: usize) -> Result<Self> {
        if j >= k {
            return Err(Error::IndexOutOfRange { j, k, dim: k });
        }
        Ok(Self { j, k })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.k >= dim {
            return Err(Error::IndexOutOfRange {
                j: self.j,
                k: self.k,
                dim,
            });
        }
        Ok(())
    }

    /// Every pair `j < k` for dimension `dim`.
    pub fn all(dim: usize) -> Vec<Self> {
        (0..dim)
            .flat_map(|j| ((j + 1)..dim).map(move |k| Self { j, k }))
            .collect()
    }
}

/// Lindblad operators `L_k` with non-negative rates `γ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceChannel {
    dim: usize,
    ops: Vec<CMatrix>,
    rates: Vec<f64>,
    // cached L_k† and L_k†L_k
    adjoints: Vec<CMatrix>,
    number_ops: Vec<CMatrix>,
}

impl DecoherenceChannel {
    pub fn new(dim: usize, ops: Vec<CMatrix>, rates: Vec<f64>) -> Result<Self> {
        if ops.len() != rates.len() {
            return Err(Error::InvalidChannel(format!(
                "{} operators but {} rates",
                ops.len(),
                rates.len()
            )));
        }
        for (idx, (op, rate)) in ops.iter().zip(&rates).enumerate() {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::InvalidChannel(format!(
                    "operator {idx} is {}x{}, expected {dim}x{dim}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            if !rate.is_finite() || *rate < 0.0 {
                return Err(Error::InvalidChannel(format!(
                    "rate {idx} must be finite and non-negative, got {rate}"
                )));
            }
        }
        let adjoints: Vec<CMatrix> = ops.iter().map(|l| l.adjoint()).collect();
        let number_ops = adjoints.iter().zip(&ops).map(|(ld, l)| ld * l).collect();
        Ok(Self {
            dim,
            ops,
            rates,
            adjoints,
            number_ops,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            ops: Vec::new(),
            rates: Vec::new(),
            adjoints: Vec::new(),
            number_ops: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Bounds `alpha <= C²(ρ) <= beta` over a set of coherence pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub alpha: f64,
    pub beta: f64,
    pub pairs: Vec<CoherencePair>,
}

impl ConstraintSpec {
    pub fn new(alpha: f64, beta: f64, pairs: Vec<CoherencePair>) -> Result<Self> {
        let spec = Self { alpha, beta, pairs };
        spec.validate()?;
        Ok(spec)
    }

    /// Bounds given on `C` rather than `C²`.
    pub fn from_coherence_bounds(c_min: f64, c_max: f64, pairs: Vec<CoherencePair>) -> Result<Self> {
        if c_min < 0.0 {
            return Err(Error::InvalidConstraint(format!(
                "coherence lower bound must be non-negative, got {c_min}"
            )));
        }
        Self::new(c_min * c_min, c_max * c_max, pairs)
    }

    /// No effective bound: the multipliers never activate.
    pub fn unbounded(pairs: Vec<CoherencePair>) -> Self {
        Self {
            alpha: f64::NEG_INFINITY,
            beta: f64::INFINITY,
            pairs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.beta.is_nan() {
            return Err(Error::InvalidConstraint("bounds must not be NaN".into()));
        }
        if self.alpha.is_finite() && self.alpha < 0.0 {
            return Err(Error::InvalidConstraint(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.alpha >= self.beta {
            return Err(Error::InvalidConstraint(format!(
                "alpha ({}) must be below beta ({})",
                self.alpha, self.beta
            )));
        }
        if self.pairs.is_empty() {
            return Err(Error::InvalidConstraint("at least one coherence pair is required".into()));
        }
        Ok(())
    }

    pub fn contains(&self, c_sq: f64) -> bool {
        c_sq >= self.alpha && c_sq <= self.beta
    }
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same(a, b)?;
    Ok(a * b - b * a)
}

/// `Tr(ρ O)`.
pub fn expectation(op: &CMatrix, rho: &CMatrix) -> Result<Complex64> {
    check_same(op, rho)?;
    Ok(trace_product(rho, op))
}

/// The Hermitian pair `(δRe, δIm)` for `(j, k)`.
pub fn coherence_pair_ops(pair: CoherencePair, dim: usize) -> Result<(CMatrix, CMatrix)> {
    pair.validate(dim)?;
    let (j, k) = (pair.j, pair.k);
    let mut re = zeros(dim);
    re[(j, k)] = c(1.0);
    re[(k, j)] = c(1.0);
    let mut im = zeros(dim);
    im[(j, k)] = -I;
    im[(k, j)] = I;
    Ok((re, im))
}

/// Coherence operators for a fixed pair set, built once and reused along a
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceBasis {
    dim: usize,
    pairs: Vec<CoherencePair>,
    ops: Vec<(CMatrix, CMatrix)>,
}

impl CoherenceBasis {
    pub fn new(pairs: &[CoherencePair], dim: usize) -> Result<Self> {
        let ops = pairs
            .iter()
            .map(|p| coherence_pair_ops(*p, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            pairs: pairs.to_vec(),
            ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[CoherencePair] {
        &self.pairs
    }

    pub fn ops(&self) -> &[(CMatrix, CMatrix)] {
        &self.ops
    }

    /// Real expectations `(⟨δRe⟩, ⟨δIm⟩)` per pair.
    pub fn expectations(&self, rho: &CMatrix) -> Result<Vec<(f64, f64)>> {
        check_square(rho, self.dim)?;
        Ok(self
            .ops
            .iter()
            .map(|(re, im)| (trace_product(rho, re).re, trace_product(rho, im).re))
            .collect())
    }

    pub fn coherence_squared(&self, rho: &CMatrix) -> Result<f64> {
        Ok(self
            .expectations(rho)?
            .iter()
            .map(|(a, b)| a * a + b * b)
            .sum())
    }

    pub fn weight_operator(&self, rho: &CMatrix) -> Result<CMatrix> {
        let mut w = zeros(self.dim);
        for ((a, b), (re, im)) in self.expectations(rho)?.iter().zip(&self.ops) {
            w += re * c(*a) + im * c(*b);
        }
        Ok(w)
    }
}

/// `C²(ρ) = Σ_pairs ⟨δRe⟩² + ⟨δIm⟩²`.
pub fn coherence_squared(rho: &CMatrix, pairs: &[CoherencePair]) -> Result<f64> {
    CoherenceBasis::new(pairs, rho.nrows())?.coherence_squared(rho)
}

pub fn coherence(rho: &CMatrix, pairs: &[CoherencePair]) -> Result<f64> {
    coherence_squared(rho, pairs).map(f64::sqrt)
}

/// `W(ρ) = Σ_pairs ⟨δRe⟩ δRe + ⟨δIm⟩ δIm`, half the gradient of `C²`.
pub fn weight_operator(rho: &CMatrix, pairs: &[CoherencePair]) -> Result<CMatrix> {
    CoherenceBasis::new(pairs, rho.nrows())?.weight_operator(rho)
}

/// `ℒ(ρ) = Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn dissipator(channel: &DecoherenceChannel, rho: &CMatrix) -> Result<CMatrix> {
    check_square(rho, channel.dim)?;
    let mut out = zeros(channel.dim);
    for k in 0..channel.len() {
        let rate = channel.rates[k];
        if rate == 0.0 {
            continue;
        }
        let l = &channel.ops[k];
        let ld = &channel.adjoints[k];
        let n = &channel.number_ops[k];
        let jump = l * rho * ld;
        let anti = n * rho + rho * n;
        out += (jump - anti * c(0.5)) * c(rate);
    }
    Ok(out)
}

/// `ℒ₀(φ) = Σ_k γ_k (L_k† φ L_k − L_k φ L_k†)`.
pub fn dissipator_l0(channel: &DecoherenceChannel, phi: &CMatrix) -> Result<CMatrix> {
    check_square(phi, channel.dim)?;
    let mut out = zeros(channel.dim);
    for k in 0..channel.len() {
        let rate = channel.rates[k];
        if rate == 0.0 {
            continue;
        }
        let l = &channel.ops[k];
        let ld = &channel.adjoints[k];
        out += (ld * phi * l - l * phi * ld) * c(rate);
    }
    Ok(out)
}

/// `ℒ(I) = Σ_k γ_k [L_k, L_k†]`; zero exactly when the channel is unital.
pub fn unital_defect(channel: &DecoherenceChannel) -> CMatrix {
    let mut out = zeros(channel.dim);
    for k in 0..channel.len() {
        let l = &channel.ops[k];
        let ld = &channel.adjoints[k];
        out += (l * ld - ld * l) * c(channel.rates[k]);
    }
    out
}
