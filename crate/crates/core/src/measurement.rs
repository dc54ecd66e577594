//! Continuous (amplified quadrature) and discrete (qubit meter) measurement
//! models with closed-form output distributions.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use libm::{erf, erfc};
use thiserror::Error;

use crate::fock_oracle::SpinState;
use crate::phase_space::{GaussianMixture1D, MixtureComponent, PhaseSpaceError, QuadratureConvention};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Distribution(#[from] PhaseSpaceError),
}

/// Convention of the continuous model: `q = α + α*`, vacuum Q-variance 1.
pub const CONTINUOUS_CONVENTION: QuadratureConvention = QuadratureConvention::OperatorQuadratures;
/// Convention of the spin model: `σ_m = x/G` with `x = Re α`.
pub const SPIN_CONVENTION: QuadratureConvention = QuadratureConvention::AmplitudeParts;

pub fn gain(tau: f64) -> f64 {
    tau.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousMeasurementResult {
    pub tau: f64,
    pub gain: f64,
    /// Q-function marginal of the amplified quadrature `q(τ)`.
    pub q_distribution: GaussianMixture1D,
    /// Inferred eigenvalue `q_m = q/G`.
    pub q_m_distribution: GaussianMixture1D,
    pub samples: Option<Vec<f64>>,
}

/// `q(τ) ~ N(G q₀, 1 + G² var₀)` and `q_m = q/G`.
pub fn continuous_measurement(
    q0: f64,
    initial_operator_variance: f64,
    tau: f64,
) -> Result<ContinuousMeasurementResult, MeasurementError> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(MeasurementError::InvalidParameter(format!("tau must be finite and non-negative, got {tau}")));
    }
    if !(initial_operator_variance.is_finite() && initial_operator_variance >= 0.0) {
        return Err(MeasurementError::InvalidParameter(format!(
            "initial variance must be non-negative, got {initial_operator_variance}"
        )));
    }
    let g = gain(tau);
    let q_distribution = GaussianMixture1D::normal(g * q0, measured_variance(initial_operator_variance, tau))?;
    let q_m_distribution = q_distribution.affine(1.0 / g, 0.0)?;
    Ok(ContinuousMeasurementResult { tau, gain: g, q_distribution, q_m_distribution, samples: None })
}

impl ContinuousMeasurementResult {
    /// Attach `n` draws of `q_m` from stream 0 of `seed`.
    pub fn with_samples(mut self, n: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0);
        self.samples = Some((0..n).map(|_| self.q_m_distribution.sample(&mut r)).collect());
        self
    }
}

/// Q-function variance of the amplified quadrature, `1 + G²⟨Δq̂²(0)⟩`.
pub fn measured_variance(initial_operator_variance: f64, tau: f64) -> f64 {
    1.0 + gain(tau).powi(2) * initial_operator_variance
}

/// Q-function variance of the squeezed quadrature, `1 + ⟨Δp̂²(0)⟩/G²`.
pub fn measured_variance_p(initial_operator_variance: f64, tau: f64) -> f64 {
    1.0 + initial_operator_variance / gain(tau).powi(2)
}

/// `P(q_m, τ) = √(G²/2π) exp(−½G²(q_m − q₀)²)` for an eigenstate input.
pub fn eigenvalue_density(q_m: f64, q0: f64, tau: f64) -> f64 {
    let g2 = gain(tau).powi(2);
    (g2 / (2.0 * PI)).sqrt() * (-0.5 * g2 * (q_m - q0).powi(2)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinMeasurementResult {
    pub gain: f64,
    pub sigma_m_distribution: GaussianMixture1D,
    pub binned_samples: Option<Vec<i8>>,
}

/// Two-branch mixture for `σ_m = x/G`: weights `|c↑|²`, `|c↓|²`, means ±1,
/// variance `1/(2G²)` each. Zero-weight branches are dropped.
pub fn qubit_measurement(spin: SpinState, gain: f64) -> Result<SpinMeasurementResult, MeasurementError> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(MeasurementError::InvalidParameter(format!("gain must be positive, got {gain}")));
    }
    let (w_up, w_down) = spin.weights();
    let variance = 1.0 / (2.0 * gain * gain);
    let components: Vec<MixtureComponent> = [(w_up, 1.0), (w_down, -1.0)]
        .into_iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(weight, mean)| MixtureComponent { weight: weight / (w_up + w_down), mean, variance })
        .collect();
    Ok(SpinMeasurementResult { gain, sigma_m_distribution: GaussianMixture1D::new(components)?, binned_samples: None })
}

impl SpinMeasurementResult {
    /// Draw `n` values of `σ_m` from stream 0 of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| self.sigma_m_distribution.sample(&mut r)).collect()
    }

    pub fn with_binned_samples(mut self, n: usize, seed: u64) -> Self {
        self.binned_samples = Some(self.sample(n, seed).into_iter().map(bin_spin).collect());
        self
    }
}

/// `P(σ_m) = (G/2√π)[e^{−G²(σ_m−1)²} + e^{−G²(σ_m+1)²}]` for the equal
/// superposition.
pub fn closed_form_spin_density(sigma_m: f64, gain: f64) -> f64 {
    let g2 = gain * gain;
    gain / (2.0 * PI.sqrt()) * ((-g2 * (sigma_m - 1.0).powi(2)).exp() + (-g2 * (sigma_m + 1.0).powi(2)).exp())
}

/// `σ_b = sgn(σ_m)`, with `σ_m = 0` mapped to `+1`.
pub fn bin_spin(sigma_m: f64) -> i8 {
    if sigma_m < 0.0 {
        -1
    } else {
        1
    }
}

/// `η(G) = ½(erf G + 1 − erfc G)`, which equals `erf G`.
pub fn binning_efficiency(gain: f64) -> f64 {
    0.5 * (erf(gain) + 1.0 - erfc(gain))
}

/// Mean of `sgn(σ_m)` when `σ_m ~ N(mean, 1/(2G²))`, by sampling.
pub fn sampled_sign_expectation(mean: f64, gain: f64, n: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, 0);
    let sd = 1.0 / (gain * 2f64.sqrt());
    let total: i64 = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            i64::from(bin_spin(mean + sd * z))
        })
        .sum();
    total as f64 / n as f64
}
