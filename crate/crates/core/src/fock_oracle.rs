//! Exact quantum mechanics in a truncated Fock space, optionally with spins.
//!
//! Everything here is dense linear algebra on small matrices. The oracle is
//! the ground truth the phase-space code is checked against, so it favours
//! exactness over speed: operator products are formed in a padded space and
//! projected back, and unitary evolutions use Hermitian eigendecompositions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::phase_space::ComplexAmplitude;
use crate::symbolic::{Ladder, OperatorExpr};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest Poisson tail allowed when building a coherent state.
pub const COHERENT_TAIL_TOLERANCE: f64 = 1e-8;
/// Largest population allowed in the top quarter of levels after evolution.
pub const EVOLUTION_TAIL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("truncation error: lost norm {tail:.3e} exceeds {threshold:.1e} at dim {dim}")]
    Truncation { tail: f64, threshold: f64, dim: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// A dense operator on the first `dim` Fock levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    entries: CMatrix,
}

impl TruncatedOperator {
    pub fn from_matrix(entries: CMatrix) -> Self {
        assert!(entries.is_square(), "operator matrix must be square");
        Self { entries }
    }

    pub fn annihilation(dim: usize) -> Self {
        Self::from_matrix(annihilation_matrix(dim))
    }

    pub fn creation(dim: usize) -> Self {
        Self::from_matrix(annihilation_matrix(dim).adjoint())
    }

    pub fn number(dim: usize) -> Self {
        Self::from_matrix(CMatrix::from_diagonal(&CVector::from_fn(dim, |n, _| Complex64::from(n as f64))))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.entries.adjoint())
    }

    pub fn mul(&self, other: &TruncatedOperator) -> Self {
        Self::from_matrix(&self.entries * &other.entries)
    }

    /// Largest deviation of `[a, a†]` from the identity on levels `n < dim − 1`.
    pub fn commutator_defect(dim: usize) -> f64 {
        let a = annihilation_matrix(dim);
        let ad = a.adjoint();
        let c = &a * &ad - &ad * &a;
        let m = dim.saturating_sub(1);
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((c[(i, j)] - target).norm());
            }
        }
        worst
    }
}

fn annihilation_matrix(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::from((n as f64).sqrt());
    }
    a
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Matrix of a polynomial in ladder operators on `dims[0] ⊗ dims[1] ⊗ …`.
///
/// Products are formed in a space padded by the expression degree and then
/// projected, so every retained matrix element is exact.
pub fn operator_matrix(expr: &OperatorExpr, dims: &[usize]) -> Result<CMatrix, OracleError> {
    if expr.n_modes() > dims.len() {
        return Err(OracleError::Dimension(format!(
            "expression uses {} modes, {} dimensions given",
            expr.n_modes(),
            dims.len()
        )));
    }
    let pad = expr.degree();
    let padded: Vec<usize> = dims.iter().map(|d| d + pad).collect();
    let total: usize = padded.iter().product();
    let ladder = |mode: usize, kind: Ladder| {
        let single = match kind {
            Ladder::Annihilate => annihilation_matrix(padded[mode]),
            Ladder::Create => annihilation_matrix(padded[mode]).adjoint(),
        };
        padded.iter().enumerate().fold(CMatrix::identity(1, 1), |acc, (k, &d)| {
            let factor = if k == mode { single.clone() } else { CMatrix::identity(d, d) };
            acc.kronecker(&factor)
        })
    };
    let mut full = CMatrix::zeros(total, total);
    for (word, c) in expr.terms() {
        let m = word
            .ops()
            .iter()
            .fold(CMatrix::identity(total, total), |acc, op| acc * ladder(op.mode, op.kind));
        full += m * c.to_complex64();
    }
    let keep = retained_indices(dims, &padded);
    Ok(CMatrix::from_fn(keep.len(), keep.len(), |i, j| full[(keep[i], keep[j])]))
}

/// Flat indices of the padded product space whose levels lie below `dims`.
fn retained_indices(dims: &[usize], padded: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (&d, &pd) in dims.iter().zip(padded) {
        out = out.iter().flat_map(|&base| (0..d).map(move |n| base * pd + n)).collect();
    }
    out
}

/// Validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self, OracleError> {
        if !entries.is_square() {
            return Err(OracleError::InvalidState("density matrix must be square".into()));
        }
        let herm = max_abs(&(&entries - entries.adjoint()));
        if herm > 1e-12 {
            return Err(OracleError::InvalidState(format!("not Hermitian (defect {herm:.2e})")));
        }
        let tr = entries.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(OracleError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = entries.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(OracleError::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { entries })
    }

    pub fn pure(psi: &CVector) -> Result<Self, OracleError> {
        Self::new(psi * psi.adjoint())
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut e = CMatrix::zeros(dim, dim);
        e[(0, 0)] = ONE;
        Self { entries: e }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        (&self.entries * op).trace()
    }

    /// `U ρ U†` without revalidation.
    pub fn conjugate(&self, u: &CMatrix) -> DensityMatrix {
        Self { entries: u * &self.entries * u.adjoint() }
    }
}

/// Qubit amplitudes `c_up |↑⟩ + c_down |↓⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub up: Complex64,
    pub down: Complex64,
}

impl SpinState {
    pub fn new(up: Complex64, down: Complex64) -> Result<Self, OracleError> {
        let norm = up.norm_sqr() + down.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(OracleError::InvalidState(format!("spin norm {norm} differs from 1")));
        }
        Ok(Self { up, down })
    }

    pub fn up() -> Self {
        Self { up: ONE, down: ZERO }
    }

    pub fn down() -> Self {
        Self { up: ZERO, down: ONE }
    }

    /// `(|↑⟩ + |↓⟩)/√2`.
    pub fn equal_superposition() -> Self {
        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        Self { up: h, down: h }
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.up.norm_sqr(), self.down.norm_sqr())
    }
}

/// `⟨n|α⟩ = e^{−|α|²/2} αⁿ/√n!` for `n < dim`, not renormalized.
pub fn coherent_coefficients(alpha: Complex64, dim: usize) -> CVector {
    let mut out = CVector::zeros(dim);
    let mut c = Complex64::from((-0.5 * alpha.norm_sqr()).exp());
    for n in 0..dim {
        out[n] = c;
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    out
}

/// `Σ_{n ≥ dim} e^{−λ} λⁿ/n!` for `λ = |α|²`.
pub fn poisson_tail(lambda: f64, dim: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut log_term = -lambda + dim as f64 * lambda.ln() - ln_factorial(dim);
    let mut total = 0.0;
    let mut n = dim;
    loop {
        let t = log_term.exp();
        total += t;
        if (t < 1e-18 * total.max(1e-300) && n as f64 > lambda) || n > dim + 100_000 {
            break;
        }
        n += 1;
        log_term += lambda.ln() - (n as f64).ln();
    }
    total.min(1.0)
}

fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Normalized truncated coherent state.
pub fn coherent_state(alpha: ComplexAmplitude, dim: usize) -> Result<CVector, OracleError> {
    let a = alpha.to_complex();
    let tail = poisson_tail(a.norm_sqr(), dim);
    if tail > COHERENT_TAIL_TOLERANCE {
        return Err(OracleError::Truncation { tail, threshold: COHERENT_TAIL_TOLERANCE, dim });
    }
    let v = coherent_coefficients(a, dim);
    let norm = v.norm();
    Ok(v / Complex64::from(norm))
}

pub fn fock_state(n: usize, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[n] = ONE;
    v
}

/// `Q(α) = ⟨α|ρ|α⟩/π`.
pub fn husimi_q(rho: &DensityMatrix, alpha: ComplexAmplitude) -> f64 {
    let c = coherent_coefficients(alpha.to_complex(), rho.dim());
    (c.adjoint() * rho.matrix() * &c)[(0, 0)].re / PI
}

pub fn husimi_q_pure(psi: &CVector, alpha: Complex64) -> f64 {
    let c = coherent_coefficients(alpha, psi.len());
    c.dotc(psi).norm_sqr() / PI
}

/// Multimode `Q = ⟨α₁…α_k|ρ|α₁…α_k⟩/π^k` on `dims[0] ⊗ dims[1] ⊗ …`.
pub fn husimi_q_multimode(rho: &DensityMatrix, alphas: &[Complex64], dims: &[usize]) -> f64 {
    let c = alphas
        .iter()
        .zip(dims)
        .fold(CVector::from_element(1, ONE), |acc, (&a, &d)| acc.kronecker(&coherent_coefficients(a, d)));
    (c.adjoint() * rho.matrix() * &c)[(0, 0)].re / PI.powi(alphas.len() as i32)
}

/// Unitary `exp(−iτH)` for a Hermitian matrix, from one eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianPropagator {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl HermitianPropagator {
    pub fn new(h: &CMatrix) -> Result<Self, OracleError> {
        let defect = max_abs(&(h - h.adjoint()));
        if defect > 1e-10 {
            return Err(OracleError::InvalidState(format!("generator not Hermitian (defect {defect:.2e})")));
        }
        let eig = h.clone().symmetric_eigen();
        Ok(Self { eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn from_expr(h: &OperatorExpr, dims: &[usize]) -> Result<Self, OracleError> {
        Self::new(&operator_matrix(h, dims)?)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn unitary(&self, tau: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let phases = CVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&e| (-I * e * tau).exp()));
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * v.adjoint()
    }

    pub fn evolve(&self, psi: &CVector, tau: f64) -> CVector {
        let coeffs = self.eigenvectors.adjoint() * psi;
        let phased = CVector::from_iterator(
            self.dim(),
            coeffs.iter().zip(self.eigenvalues.iter()).map(|(c, &e)| c * (-I * e * tau).exp()),
        );
        &self.eigenvectors * phased
    }

    pub fn evolve_density(&self, rho: &DensityMatrix, tau: f64) -> DensityMatrix {
        rho.conjugate(&self.unitary(tau))
    }
}

/// Population in the top quarter of Fock levels.
pub fn top_quarter_population(psi: &CVector) -> f64 {
    let dim = psi.len();
    let start = dim - dim / 4;
    psi.iter().skip(start).map(|c| c.norm_sqr()).sum()
}

fn check_tail(psi: &CVector) -> Result<(), OracleError> {
    let tail = top_quarter_population(psi);
    if tail > EVOLUTION_TAIL_TOLERANCE {
        return Err(OracleError::Truncation { tail, threshold: EVOLUTION_TAIL_TOLERANCE, dim: psi.len() });
    }
    Ok(())
}

/// Degenerate parametric amplifier `U(τ) = exp(τ(a†² − a²)/2)`.
///
/// The generator couples only levels of equal parity, so each parity sector
/// is diagonalized separately and the decompositions are reused for any τ.
#[derive(Debug, Clone)]
pub struct ParametricAmplifier {
    dim: usize,
    sectors: [(Vec<usize>, HermitianPropagator); 2],
}

impl ParametricAmplifier {
    pub fn new(dim: usize) -> Self {
        let sector = |parity: usize| {
            let levels: Vec<usize> = (parity..dim).step_by(2).collect();
            let m = levels.len();
            // K = i(a†² − a²)/2 with U = exp(−iτK).
            let mut k = CMatrix::zeros(m, m);
            for j in 0..m.saturating_sub(1) {
                let n = levels[j] as f64;
                let amp = ((n + 1.0) * (n + 2.0)).sqrt() / 2.0;
                k[(j + 1, j)] = I * amp;
                k[(j, j + 1)] = -I * amp;
            }
            let prop = HermitianPropagator::new(&k).expect("amplifier generator is Hermitian");
            (levels, prop)
        };
        Self { dim, sectors: [sector(0), sector(1)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evolve without a truncation check.
    pub fn evolve_unchecked(&self, psi: &CVector, tau: f64) -> CVector {
        assert_eq!(psi.len(), self.dim, "state dimension");
        let mut out = CVector::zeros(self.dim);
        for (levels, prop) in &self.sectors {
            if levels.is_empty() {
                continue;
            }
            let sub = CVector::from_iterator(levels.len(), levels.iter().map(|&n| psi[n]));
            let evolved = prop.evolve(&sub, tau);
            for (j, &n) in levels.iter().enumerate() {
                out[n] = evolved[j];
            }
        }
        out
    }

    pub fn evolve(&self, psi: &CVector, tau: f64) -> Result<CVector, OracleError> {
        let out = self.evolve_unchecked(psi, tau);
        check_tail(&out)?;
        Ok(out)
    }

    pub fn unitary(&self, tau: f64) -> CMatrix {
        let mut u = CMatrix::zeros(self.dim, self.dim);
        for (levels, prop) in &self.sectors {
            let block = prop.unitary(tau);
            for (i, &n) in levels.iter().enumerate() {
                for (j, &m) in levels.iter().enumerate() {
                    u[(n, m)] = block[(i, j)];
                }
            }
        }
        u
    }
}

pub fn evolve_parametric(psi: &CVector, tau: f64) -> Result<CVector, OracleError> {
    ParametricAmplifier::new(psi.len()).evolve(psi, tau)
}

/// Squeezed vacuum with `Var(q̂) = e^{−2r}`, prepared by running the
/// amplifier backwards for time `r`.
pub fn squeezed_vacuum(r: f64, dim: usize) -> Result<CVector, OracleError> {
    ParametricAmplifier::new(dim).evolve(&fock_state(0, dim), -r)
}

/// `q̂ = a + a†` and `p̂ = −i(a − a†)` on `dim` levels, exact below the top level.
pub fn quadrature_operators(dim: usize) -> (CMatrix, CMatrix) {
    let a = annihilation_matrix(dim);
    let ad = a.adjoint();
    (&a + &ad, (&a - &ad) * (-I))
}

/// Moments of a pure single-mode state in the `(q, p)` operator quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
}

/// `(⟨a⟩, ⟨a²⟩, ⟨a†a⟩)`.
fn ladder_moments(psi: &CVector) -> (Complex64, Complex64, f64) {
    let dim = psi.len();
    let a_psi = CVector::from_fn(dim, |n, _| if n + 1 < dim { ((n + 1) as f64).sqrt() * psi[n + 1] } else { ZERO });
    let a2_psi = CVector::from_fn(dim, |n, _| if n + 1 < dim { ((n + 1) as f64).sqrt() * a_psi[n + 1] } else { ZERO });
    let mean_a = psi.dotc(&a_psi);
    let mean_a2 = psi.dotc(&a2_psi);
    let n_mean = a_psi.norm_squared();
    (mean_a, mean_a2, n_mean)
}

/// Operator moments `⟨q̂⟩, Var(q̂)`, … computed from exact ladder actions.
pub fn quadrature_moments(psi: &CVector) -> QuadratureMoments {
    let (a, a2, n) = ladder_moments(psi);
    // q̂² = a² + a†² + 2a†a + 1, p̂² = −a² − a†² + 2a†a + 1
    let q2 = 2.0 * a2.re + 2.0 * n + 1.0;
    let p2 = -2.0 * a2.re + 2.0 * n + 1.0;
    let mean_q = 2.0 * a.re;
    let mean_p = 2.0 * a.im;
    QuadratureMoments { mean_q, mean_p, var_q: q2 - mean_q * mean_q, var_p: p2 - mean_p * mean_p }
}

/// Moments of the Q-function in `q = α + α*`, `p = −i(α − α*)`.
///
/// Q-function moments are anti-normally ordered expectation values:
/// `E_Q[(α+α*)²] = ⟨a² + 2aa† + a†²⟩ = ⟨q̂²⟩ + 1`.
pub fn q_function_moments(psi: &CVector) -> QuadratureMoments {
    let (a, a2, n) = ladder_moments(psi);
    let q2 = 2.0 * a2.re + 2.0 * (n + 1.0);
    let p2 = -2.0 * a2.re + 2.0 * (n + 1.0);
    let mean_q = 2.0 * a.re;
    let mean_p = 2.0 * a.im;
    QuadratureMoments { mean_q, mean_p, var_q: q2 - mean_q * mean_q, var_p: p2 - mean_p * mean_p }
}

/// Q-function moments in `(q, p)` by direct trapezoid integration of
/// `husimi_q_pure` over a square grid; independent of the ordering argument.
pub fn q_function_moments_numeric(psi: &CVector, half_width: f64, n: usize) -> (f64, QuadratureMoments) {
    let h = 2.0 * half_width / (n - 1) as f64;
    let mut s = [0.0f64; 5];
    for i in 0..n {
        let x = -half_width + i as f64 * h;
        let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for j in 0..n {
            let y = -half_width + j as f64 * h;
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let w = wx * wy * husimi_q_pure(psi, Complex64::new(x, y));
            let (q, p) = (2.0 * x, 2.0 * y);
            s[0] += w;
            s[1] += w * q;
            s[2] += w * p;
            s[3] += w * q * q;
            s[4] += w * p * p;
        }
    }
    let norm = s[0] * h * h;
    let mq = s[1] / s[0];
    let mp = s[2] / s[0];
    (
        norm,
        QuadratureMoments { mean_q: mq, mean_p: mp, var_q: s[3] / s[0] - mq * mq, var_p: s[4] / s[0] - mp * mp },
    )
}

/// Qubit ⊗ meter state `|↑⟩|ψ_up⟩ + |↓⟩|ψ_down⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitMeterState {
    pub up: CVector,
    pub down: CVector,
}

impl QubitMeterState {
    pub fn product(spin: SpinState, meter: &CVector) -> Self {
        Self { up: meter * spin.up, down: meter * spin.down }
    }

    pub fn dim(&self) -> usize {
        self.up.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_squared() + self.down.norm_squared()
    }

    /// Reduced spin density matrix `[[ρ↑↑, ρ↑↓], [ρ↓↑, ρ↓↓]]`.
    pub fn spin_density(&self) -> [[Complex64; 2]; 2] {
        [
            [self.up.dotc(&self.up), self.down.dotc(&self.up)],
            [self.up.dotc(&self.down), self.down.dotc(&self.down)],
        ]
    }

    /// Meter Q-function with the spin traced out.
    pub fn meter_q(&self, alpha: Complex64) -> f64 {
        husimi_q_pure(&self.up, alpha) + husimi_q_pure(&self.down, alpha)
    }

    /// Marginal density of `x = Re α`, integrating `Q` over `y` on
    /// `[−w, w]` with the trapezoid rule.
    pub fn x_marginal(&self, x: f64) -> f64 {
        let w = (self.dim() as f64).sqrt() + 8.0;
        let n = ((2.0 * w) / 0.02).ceil() as usize + 1;
        let h = 2.0 * w / (n - 1) as f64;
        let mut total = 0.0;
        for j in 0..n {
            let y = -w + j as f64 * h;
            let weight = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            total += weight * self.meter_q(Complex64::new(x, y));
        }
        total * h
    }
}

/// Apply `exp(+iτ n̂ σ̂_z/2)`, diagonal in the joint number-spin basis.
///
/// The drive sign is chosen so that the meter input `|G/i⟩` at `τ = π` ends
/// in `|↑⟩|G⟩ + |↓⟩|−G⟩`.
pub fn evolve_qubit_meter(state: &QubitMeterState, tau: f64) -> QubitMeterState {
    let phase = |sign: f64, n: usize| (I * sign * tau * n as f64 / 2.0).exp();
    QubitMeterState {
        up: CVector::from_fn(state.dim(), |n, _| state.up[n] * phase(1.0, n)),
        down: CVector::from_fn(state.dim(), |n, _| state.down[n] * phase(-1.0, n)),
    }
}

/// Meter input `|G/i⟩ = |−iG⟩` for gain `G`.
pub fn meter_input(gain: f64, dim: usize) -> Result<CVector, OracleError> {
    coherent_state(ComplexAmplitude::new(0.0, -gain).map_err(|e| OracleError::InvalidState(e.to_string()))?, dim)
}

/// `∫dy ⟨n|α⟩⟨α|m⟩` over `α = x + iy`, as a matrix in `(n, m)`.
pub fn x_marginal_kernel(x: f64, dim: usize) -> CMatrix {
    let w = (dim as f64).sqrt() + 8.0;
    let n = ((2.0 * w) / 0.02).ceil() as usize + 1;
    let h = 2.0 * w / (n - 1) as f64;
    let mut k = CMatrix::zeros(dim, dim);
    for j in 0..n {
        let y = -w + j as f64 * h;
        let weight = if j == 0 || j == n - 1 { 0.5 } else { 1.0 } * h;
        let c = coherent_coefficients(Complex64::new(x, y), dim);
        k.ger(Complex64::from(weight), &c, &c.conjugate(), ONE);
    }
    k
}

/// Eigenvector of `σ_θ = cos θ σ_z + sin θ σ_x` with eigenvalue `s = ±1`,
/// as `(⟨↑|·⟩, ⟨↓|·⟩)`.
pub fn spin_basis(theta: f64, s: i8) -> [f64; 2] {
    let (c, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    if s > 0 {
        [c, sn]
    } else {
        [-sn, c]
    }
}

/// Two spins ⊗ two meters after the measurement interaction, stored per
/// joint eigenbranch `(a, b)` of `(σ_θ^A, σ_φ^B)`: `M_ab[n][m]` is the
/// amplitude of `|a⟩|b⟩|n⟩|m⟩`.
#[derive(Debug, Clone)]
pub struct BellMeterState {
    pub theta: f64,
    pub phi: f64,
    /// Ordered `(+,+), (+,−), (−,+), (−,−)`.
    pub branches: [CMatrix; 4],
}

pub const BRANCH_SIGNS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

impl BellMeterState {
    pub fn branch_weights(&self) -> [f64; 4] {
        let mut w = [0.0; 4];
        for (k, m) in self.branches.iter().enumerate() {
            w[k] = m.norm_squared();
        }
        w
    }

    /// Joint density of `(x_A, x_B)` with spins traced out, from per-meter
    /// marginal kernels. `kernels_b` must be evaluated on the `x_B` grid.
    pub fn x_marginal_grid(&self, xs_a: &[f64], xs_b: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.branches[0].nrows();
        let kb: Vec<CMatrix> = xs_b.iter().map(|&x| x_marginal_kernel(x, dim)).collect();
        xs_a.iter()
            .map(|&xa| {
                let ka = x_marginal_kernel(xa, dim);
                // R_s = M_s† K_A M_s, then P = Σ_s Σ_{m'm} R_s[m', m] K_B[m', m].
                let rs: Vec<CMatrix> = self.branches.iter().map(|m| m.adjoint() * &ka * m).collect();
                kb.iter()
                    .map(|k| {
                        let total: Complex64 = rs
                            .iter()
                            .map(|r| r.iter().zip(k.iter()).map(|(a, b)| a * b).sum::<Complex64>())
                            .sum();
                        total.re / (PI * PI)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Singlet `(|↑↓⟩ − |↓↑⟩)/√2` with meters `|G/i⟩ ⊗ |G/i⟩`, evolved under
/// `σ_θ^A n̂^A + σ_φ^B n̂^B` for `t = π/2` (same drive sign as the qubit meter).
pub fn evolve_bell_meters(gain: f64, dim: usize, theta: f64, phi: f64) -> Result<BellMeterState, OracleError> {
    let meter = meter_input(gain, dim)?;
    let product = &meter * meter.transpose();
    let singlet = |su: usize, sd: usize| -> f64 {
        // amplitudes in the z basis: index 0 = ↑, 1 = ↓
        match (su, sd) {
            (0, 1) => std::f64::consts::FRAC_1_SQRT_2,
            (1, 0) => -std::f64::consts::FRAC_1_SQRT_2,
            _ => 0.0,
        }
    };
    let t = std::f64::consts::FRAC_PI_2;
    let rotate = |s: i8| CVector::from_fn(dim, |n, _| (I * f64::from(s) * t * n as f64).exp());
    let mut branches: Vec<CMatrix> = Vec::with_capacity(4);
    for (a, b) in BRANCH_SIGNS {
        let ea = spin_basis(theta, a);
        let eb = spin_basis(phi, b);
        let amp: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| ea[i] * eb[j] * singlet(i, j)).sum();
        let (ra, rb) = (rotate(a), rotate(b));
        branches.push(CMatrix::from_fn(dim, dim, |n, m| product[(n, m)] * amp * ra[n] * rb[m]));
    }
    let branches: [CMatrix; 4] = branches.try_into().expect("four branches");
    Ok(BellMeterState { theta, phi, branches })
}

/// Independent-variable projector `Λ(α, w) = e^{−αw} Σ αⁿ wᵐ/√(n!m!) |n⟩⟨m|`,
/// equal to `|α⟩⟨α|` at `w = α*`.
pub fn coherent_projector(alpha: Complex64, w: Complex64, dim: usize) -> CMatrix {
    let powers = |z: Complex64| {
        let mut v = CVector::zeros(dim);
        let mut c = ONE;
        for n in 0..dim {
            v[n] = c;
            c = c * z / ((n + 1) as f64).sqrt();
        }
        v
    };
    (powers(alpha) * powers(w).transpose()) * (-alpha * w).exp()
}

/// Central difference with one Richardson level, `h = 1e-4`.
fn holomorphic_derivative(f: impl Fn(Complex64) -> CMatrix, z: Complex64) -> CMatrix {
    let h = 1e-4;
    let d = |h: f64| (f(z + h) - f(z - h)) / Complex64::from(2.0 * h);
    let coarse = d(h);
    let fine = d(h / 2.0);
    (fine * Complex64::from(4.0) - coarse) / Complex64::from(3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BosonicIdentity {
    /// `â Λ = α Λ`
    Annihilation,
    /// `â† Λ = (∂_α + α*) Λ`
    Creation,
    /// `Λ â = (∂_α* + α) Λ`
    RightAnnihilation,
    /// `Λ â† = α* Λ`
    RightCreation,
}

impl BosonicIdentity {
    pub const ALL: [BosonicIdentity; 4] =
        [Self::Annihilation, Self::Creation, Self::RightAnnihilation, Self::RightCreation];

    pub fn id(self) -> &'static str {
        match self {
            Self::Annihilation => "a",
            Self::Creation => "a_dagger",
            Self::RightAnnihilation => "right_a",
            Self::RightCreation => "right_a_dagger",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.id() == id)
    }
}

/// Largest elementwise `|LHS − RHS|` on the first `dim` levels. Operators
/// act in a padded space so the truncation edge does not contribute.
pub fn verify_bosonic_identity(identity: BosonicIdentity, alpha: Complex64, dim: usize) -> f64 {
    let big = dim + 2;
    let w = alpha.conj();
    let a = annihilation_matrix(big);
    let ad = a.adjoint();
    let lambda = coherent_projector(alpha, w, big);
    let (lhs, rhs) = match identity {
        BosonicIdentity::Annihilation => (&a * &lambda, &lambda * alpha),
        BosonicIdentity::Creation => {
            let d = holomorphic_derivative(|z| coherent_projector(z, w, big), alpha);
            (&ad * &lambda, d + &lambda * w)
        }
        BosonicIdentity::RightAnnihilation => {
            let d = holomorphic_derivative(|z| coherent_projector(alpha, z, big), w);
            (&lambda * &a, d + &lambda * alpha)
        }
        BosonicIdentity::RightCreation => (&lambda * &ad, &lambda * w),
    };
    let diff = (lhs - rhs).view((0, 0), (dim, dim)).into_owned();
    max_abs(&diff)
}

/// `P(z, w) = (|↓⟩ + z|↑⟩)(⟨↓| + w⟨↑|)/(1 + zw)`, equal to `|z⟩⟨z|` at `w = z*`.
/// Basis order `(↑, ↓)`.
pub fn spin_projector(z: Complex64, w: Complex64) -> CMatrix {
    let ket = CVector::from_vec(vec![z, ONE]);
    let bra = CVector::from_vec(vec![w, ONE]);
    (ket * bra.transpose()) / (ONE + z * w)
}

fn sigma_z() -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, -ONE]))
}

/// `σ̂_z P = [2z∂_z + (zw − 1)/(1 + zw)] P` at `w = z*`, derivative by
/// central differences of step `step` with one Richardson level.
pub fn verify_spin_identity(z: Complex64, step: f64) -> f64 {
    let w = z.conj();
    let p = spin_projector(z, w);
    let d = |h: f64| (spin_projector(z + h, w) - spin_projector(z - h, w)) / Complex64::from(2.0 * h);
    let dz = (d(step / 2.0) * Complex64::from(4.0) - d(step)) / Complex64::from(3.0);
    let lhs = sigma_z() * &p;
    let rhs = dz * (2.0 * z) + &p * ((z * w - ONE) / (ONE + z * w));
    max_abs(&(lhs - rhs))
}

/// Spin identity in logarithmic variables `z = e^η`:
/// `σ̂_z Λ_η = 2[∂_η + (3/2)(zw − 1)/(zw + 1)] Λ_η` with
/// `Λ_η = 2zw P/(π(1 + zw)²)`; the bracket reduces to `m(η)` at `w = z*`.
pub fn verify_log_spin_identity(eta: Complex64) -> f64 {
    let eta_w = eta.conj();
    let lam = |e: Complex64| {
        let (z, w) = (e.exp(), eta_w.exp());
        spin_projector(z, w) * (2.0 * z * w / (PI * (ONE + z * w).powi(2)))
    };
    let (z, w) = (eta.exp(), eta_w.exp());
    let l = lam(eta);
    let d = holomorphic_derivative(lam, eta);
    let rhs = (d + &l * (1.5 * (z * w - ONE) / (z * w + ONE))) * Complex64::from(2.0);
    max_abs(&(sigma_z() * &l - rhs))
}

/// Number identity in logarithmic variables `α = e^φ`:
/// `n̂ Λ_φ = [∂_φ + αw − 1] Λ_φ` with `Λ_φ = αw Λ(α, w)/π`; the bracket
/// reduces to `n(φ) = e^{2φ′} − 1` at `w = α*`.
pub fn verify_log_number_identity(phi: Complex64, dim: usize) -> f64 {
    let big = dim + 2;
    let w = phi.conj().exp();
    let lam = |p: Complex64| coherent_projector(p.exp(), w, big) * (p.exp() * w / PI);
    let alpha = phi.exp();
    let l = lam(phi);
    let d = holomorphic_derivative(lam, phi);
    let rhs = d + &l * (alpha * w - ONE);
    let lhs = TruncatedOperator::number(big).matrix() * &l;
    max_abs(&(lhs - rhs).view((0, 0), (dim, dim)).into_owned())
}

/// Result of one check in the identity suite.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub point: Complex64,
    pub error: f64,
}

/// Every bosonic, spin and logarithmic identity at the given points.
pub fn identity_suite(points: &[Complex64], dim: usize) -> Vec<IdentityCheck> {
    let mut out = Vec::new();
    for &p in points {
        for id in BosonicIdentity::ALL {
            out.push(IdentityCheck { name: id.id().to_string(), point: p, error: verify_bosonic_identity(id, p, dim) });
        }
        out.push(IdentityCheck { name: "spin_z".into(), point: p, error: verify_spin_identity(p, 1e-4) });
        out.push(IdentityCheck { name: "log_spin_z".into(), point: p, error: verify_log_spin_identity(p) });
        out.push(IdentityCheck { name: "log_number".into(), point: p, error: verify_log_number_identity(p * 0.5, dim) });
    }
    out
}

/// `n` points uniform in the unit disk, from stream 0 of `seed`.
pub fn suite_points(n: usize, seed: u64) -> Vec<Complex64> {
    use rand::Rng;
    let mut r = crate::rng::stream(seed, 0);
    (0..n)
        .map(|_| {
            let radius: f64 = r.random::<f64>().sqrt();
            let angle: f64 = r.random::<f64>() * 2.0 * PI;
            Complex64::from_polar(radius, angle)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::ComplexAmplitude;
    use crate::symbolic::parse_hamiltonian;
    use proptest::prelude::*;

    fn amp(x: f64, p: f64) -> ComplexAmplitude {
        ComplexAmplitude::new(x, p).unwrap()
    }

    #[test]
    fn ladder_operators() {
        let a = TruncatedOperator::annihilation(6);
        assert!((a.matrix()[(2, 3)].re - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.matrix()[(5, 0)], ZERO);
        assert!(TruncatedOperator::commutator_defect(30) < 1e-12);
        let n = TruncatedOperator::creation(6).mul(&a);
        assert!(max_abs(&(n.matrix() - TruncatedOperator::number(6).matrix())) < 1e-14);
    }

    #[test]
    fn coherent_state_examples() {
        let vac = coherent_state(amp(0.0, 0.0), 10).unwrap();
        assert_eq!(vac, fock_state(0, 10));
        let one = coherent_state(amp(1.0, 0.0), 30).unwrap();
        assert!((one[0].re - (-0.5f64).exp()).abs() < 1e-12);
        assert!(matches!(coherent_state(amp(2.0, 0.0), 8), Err(OracleError::Truncation { .. })));
        assert!((poisson_tail(4.0, 8) - 0.051134).abs() < 1e-5);
    }

    #[test]
    fn husimi_examples() {
        let vac = DensityMatrix::vacuum(20);
        assert!((husimi_q(&vac, amp(0.0, 0.0)) - 1.0 / PI).abs() < 1e-15);
        assert!((husimi_q(&vac, amp(0.6, 0.8)) - (-1.0f64).exp() / PI).abs() < 1e-15);
        let beta = amp(0.7, -0.4);
        let rho = DensityMatrix::pure(&coherent_state(beta, 40).unwrap()).unwrap();
        assert!((husimi_q(&rho, beta) - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::from(0.5);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 1)] = Complex64::from(0.5);
        m[(0, 1)] = I * 0.1;
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = -I * 0.1;
        assert!(DensityMatrix::new(m).is_ok());
        assert!(SpinState::new(ONE, ONE).is_err());
    }

    #[test]
    fn parametric_vacuum_variances() {
        let tau = 0.5;
        let psi = evolve_parametric(&fock_state(0, 64), tau).unwrap();
        let m = quadrature_moments(&psi);
        assert!((m.var_q - (2.0 * tau).exp()).abs() < 1e-9, "{}", m.var_q);
        assert!((m.var_p - (-2.0 * tau).exp()).abs() < 1e-9);
        let q = q_function_moments(&psi);
        assert!((q.var_q - (1.0 + 1f64.exp())).abs() < 1e-9);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let zero = evolve_parametric(&fock_state(3, 16), 0.0).unwrap();
        assert!((zero - fock_state(3, 16)).norm() < 1e-12);
    }

    #[test]
    fn parametric_matches_generic_propagator() {
        let h = parse_hamiltonian("0.5i*adag^2 - 0.5i*a^2").unwrap();
        let generic = HermitianPropagator::from_expr(&h, &[24]).unwrap().unitary(0.3);
        let special = ParametricAmplifier::new(24).unitary(0.3);
        assert!(max_abs(&(generic - &special)) < 1e-10);
        let defect = max_abs(&(special.adjoint() * &special - CMatrix::identity(24, 24)));
        assert!(defect < 1e-9);
    }

    #[test]
    fn truncation_detected() {
        assert!(matches!(evolve_parametric(&fock_state(0, 16), 2.0), Err(OracleError::Truncation { .. })));
    }

    #[test]
    fn density_evolution_preserves_trace() {
        let amp_ = ParametricAmplifier::new(40);
        let psi = coherent_state(amp(0.4, 0.2), 40).unwrap();
        let rho = DensityMatrix::pure(&psi).unwrap().conjugate(&amp_.unitary(0.4));
        assert!((rho.matrix().trace() - ONE).norm() < 1e-9);
        assert!(max_abs(&(rho.matrix() - rho.matrix().adjoint())) < 1e-9);
    }

    #[test]
    fn normal_order_preserves_matrix() {
        for text in ["a adag", "a a adag adag", "(a + adag)^3", "a b adag bdag + 0.5i*a adag^2"] {
            let e = parse_hamiltonian(text).unwrap();
            let dims: Vec<usize> = vec![12; e.n_modes().max(1)];
            let m1 = operator_matrix(&e, &dims).unwrap();
            let n = e.normal_order();
            let m2 = operator_matrix(&n, &dims).unwrap();
            assert!(max_abs(&(m1 - m2)) < 1e-10, "{text}");
            assert_eq!(n.normal_order(), n);
        }
    }

    #[test]
    fn q_function_integrates_to_one_and_variance_identity() {
        let psi = squeezed_vacuum(0.3, 40).unwrap();
        let psi = CVector::from_fn(40, |n, _| psi[n]);
        let (norm, numeric) = q_function_moments_numeric(&psi, 7.0, 281);
        assert!((norm - 1.0).abs() < 1e-4, "{norm}");
        let exact = q_function_moments(&psi);
        let op = quadrature_moments(&psi);
        assert!((numeric.var_q - exact.var_q).abs() < 1e-6);
        assert!((numeric.var_p - exact.var_p).abs() < 1e-6);
        assert!((exact.var_q - (op.var_q + 1.0)).abs() < 1e-9);
        assert!((op.var_q - (-0.6f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn qubit_meter_cat_state() {
        let g = 2.0;
        let meter = meter_input(g, 40).unwrap();
        let out = evolve_qubit_meter(&QubitMeterState::product(SpinState::equal_superposition(), &meter), PI);
        let plus = coherent_state(amp(g, 0.0), 40).unwrap() * Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let minus = coherent_state(amp(-g, 0.0), 40).unwrap() * Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        assert!((out.up.dotc(&plus).norm() - 0.5).abs() < 1e-10);
        assert!((out.down.dotc(&minus).norm() - 0.5).abs() < 1e-10);
        // σ_z is conserved.
        let up_only = evolve_qubit_meter(&QubitMeterState::product(SpinState::up(), &meter), 1.3);
        assert!(up_only.down.norm() == 0.0);
        assert!((up_only.spin_density()[0][0].re - 1.0).abs() < 1e-12);
        let same = evolve_qubit_meter(&QubitMeterState::product(SpinState::up(), &meter), 0.0);
        assert_eq!(same.up, meter);
    }

    #[test]
    fn marginal_kernel_agrees_with_direct_integration() {
        let meter = meter_input(1.0, 20).unwrap();
        let st = evolve_qubit_meter(&QubitMeterState::product(SpinState::equal_superposition(), &meter), PI);
        let k = x_marginal_kernel(0.8, 20);
        let via_kernel: f64 = [&st.up, &st.down]
            .iter()
            .map(|psi| (psi.adjoint() * &k * *psi)[(0, 0)].re)
            .sum::<f64>()
            / PI;
        assert!((via_kernel - st.x_marginal(0.8)).abs() < 1e-12);
    }

    #[test]
    fn bell_branch_weights_match_singlet() {
        let st = evolve_bell_meters(1.5, 32, 0.3, -1.1).unwrap();
        let w = st.branch_weights();
        for (k, (a, b)) in BRANCH_SIGNS.into_iter().enumerate() {
            let expected = 0.25 * (1.0 - f64::from(a) * f64::from(b) * (0.3f64 + 1.1).cos());
            assert!((w[k] - expected).abs() < 1e-10);
        }
        let orth = evolve_bell_meters(1.5, 32, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        for x in orth.branch_weights() {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn bosonic_identities() {
        let a = Complex64::new(0.5, 0.3);
        assert!(verify_bosonic_identity(BosonicIdentity::Annihilation, a, 30) < 1e-10);
        assert!(verify_bosonic_identity(BosonicIdentity::Creation, a, 30) < 1e-6);
        assert!(verify_bosonic_identity(BosonicIdentity::RightAnnihilation, a, 30) < 1e-6);
        assert!(verify_bosonic_identity(BosonicIdentity::RightCreation, a, 30) < 1e-10);
        assert!(verify_bosonic_identity(BosonicIdentity::Annihilation, ZERO, 30) < 1e-12);
        assert_eq!(BosonicIdentity::from_id("a_dagger"), Some(BosonicIdentity::Creation));
    }

    #[test]
    fn spin_identities() {
        assert!(verify_spin_identity(ONE, 1e-4) < 1e-6);
        assert!(verify_spin_identity(Complex64::new(0.3, -0.7), 1e-4) < 1e-6);
        let p0 = spin_projector(ZERO, ZERO);
        let lhs = sigma_z() * &p0;
        assert_eq!(lhs[(1, 1)], -ONE);
        assert!(verify_spin_identity(ZERO, 1e-4) < 1e-6);
        assert!(verify_log_spin_identity(Complex64::new(0.2, 0.9)) < 1e-6);
        assert!(verify_log_number_identity(Complex64::new(-0.3, 0.4), 30) < 1e-6);
    }

    #[test]
    fn identity_suite_at_random_points() {
        let pts = suite_points(20, 11);
        assert!(pts.iter().all(|p| p.norm() <= 1.0));
        let checks = identity_suite(&pts, 30);
        assert_eq!(checks.len(), 20 * 7);
        let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn wrong_identity_is_detected() {
        // Dropping α* from the creation identity leaves an O(1) residual.
        let a = Complex64::new(0.5, 0.3);
        let big = 32;
        let lambda = coherent_projector(a, a.conj(), big);
        let d = holomorphic_derivative(|z| coherent_projector(z, a.conj(), big), a);
        let ad = annihilation_matrix(big).adjoint();
        assert!(max_abs(&(&ad * &lambda - d).view((0, 0), (30, 30)).into_owned()) > 1e-2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_words_normal_order_to_same_matrix(
            words in proptest::collection::vec(proptest::collection::vec((any::<bool>(), 0usize..2), 1..=4), 1..=3),
            coeffs in proptest::collection::vec(-3i32..=3, 3),
        ) {
            let names = [("a", "adag"), ("b", "bdag")];
            let text = words
                .iter()
                .zip(&coeffs)
                .map(|(w, c)| {
                    let ops: Vec<&str> = w.iter().map(|&(cr, m)| if cr { names[m].1 } else { names[m].0 }).collect();
                    format!("({c})*{}", ops.join("*"))
                })
                .collect::<Vec<_>>()
                .join(" + ");
            let e = parse_hamiltonian(&text).unwrap();
            let dims = vec![8; e.n_modes().max(1)];
            let m1 = operator_matrix(&e, &dims).unwrap();
            let n = e.normal_order();
            prop_assert!(n.is_normal_ordered());
            let m2 = operator_matrix(&n, &dims).unwrap();
            prop_assert!(max_abs(&(m1 - m2)) < 1e-10, "{}", text);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn husimi_is_nonnegative(re in -1.0f64..1.0, im in -1.0f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0, tau in -0.5f64..0.5) {
            let psi = coherent_state(amp(re, im), 48).unwrap();
            let psi = ParametricAmplifier::new(48).evolve_unchecked(&psi, tau);
            prop_assert!(husimi_q_pure(&psi, Complex64::new(x, y)) >= -1e-12);
        }

        #[test]
        fn coherent_projector_is_projector(re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let a = Complex64::new(re, im);
            let p = coherent_projector(a, a.conj(), 40);
            let psi = coherent_coefficients(a, 40);
            prop_assert!(max_abs(&(p - &psi * psi.adjoint())) < 1e-12);
        }
    }
}
