//! Shared phase-space types: complex amplitudes, quadrature conventions,
//! dimensionless time grids and one-dimensional Gaussian mixtures.
//!
//! All times are the dimensionless `τ = g t`; the coupling `g` never appears
//! at runtime. Variances are always stored as variances.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseSpaceError {
    #[error("non-finite amplitude ({x}, {p})")]
    NonFinite { x: f64, p: f64 },
    #[error("invalid time grid: tau_0 = {tau_0}, tau_f = {tau_f}, n_steps = {n_steps}")]
    InvalidGrid { tau_0: f64, tau_f: f64, n_steps: usize },
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("mixture component {index} is invalid: {reason}")]
    InvalidComponent { index: usize, reason: &'static str },
    #[error("mixture has no components")]
    EmptyMixture,
}

/// A phase-space coordinate `α = x + ip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub x: f64,
    pub p: f64,
}

impl ComplexAmplitude {
    pub const ZERO: ComplexAmplitude = ComplexAmplitude { x: 0.0, p: 0.0 };

    pub fn new(x: f64, p: f64) -> Result<Self, PhaseSpaceError> {
        if x.is_finite() && p.is_finite() {
            Ok(Self { x, p })
        } else {
            Err(PhaseSpaceError::NonFinite { x, p })
        }
    }

    /// Amplitude from modulus and phase.
    pub fn from_polar(r: f64, theta: f64) -> Result<Self, PhaseSpaceError> {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.p)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.p * self.p
    }

    pub fn conj(self) -> Self {
        Self { x: self.x, p: -self.p }
    }

    /// The operator quadratures `(q, p) = (α + α*, (α − α*)/i)`.
    pub fn quadratures(self) -> (f64, f64) {
        (2.0 * self.x, 2.0 * self.p)
    }
}

impl From<ComplexAmplitude> for Complex64 {
    fn from(a: ComplexAmplitude) -> Self {
        a.to_complex()
    }
}

impl TryFrom<Complex64> for ComplexAmplitude {
    type Error = PhaseSpaceError;

    fn try_from(z: Complex64) -> Result<Self, Self::Error> {
        Self::new(z.re, z.im)
    }
}

impl fmt::Display for ComplexAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p < 0.0 {
            write!(f, "{}-{}i", self.x, -self.p)
        } else {
            write!(f, "{}+{}i", self.x, self.p)
        }
    }
}

/// Which real coordinates a complex amplitude is split into.
///
/// `AmplitudeParts` uses `x = Re α`, `y = Im α`; the vacuum Q-function
/// variance of `x` is 1/2. `OperatorQuadratures` uses `q = α + α*`,
/// `p = (α − α*)/i`, twice as large, so variances scale by 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureConvention {
    AmplitudeParts,
    OperatorQuadratures,
}

impl QuadratureConvention {
    /// Factor between the real coordinate and the amplitude part it is built
    /// from (`q = 2x`).
    pub fn scale(self) -> f64 {
        match self {
            Self::AmplitudeParts => 1.0,
            Self::OperatorQuadratures => 2.0,
        }
    }

    /// Q-function variance of either real coordinate in the vacuum state.
    pub fn vacuum_q_variance(self) -> f64 {
        0.5 * self.scale() * self.scale()
    }

    /// Names of the (real, imaginary) coordinates of a mode, with an
    /// optional mode suffix.
    pub fn coordinate_names(self, mode: Option<usize>) -> (String, String) {
        let (a, b) = match self {
            Self::AmplitudeParts => ("x", "y"),
            Self::OperatorQuadratures => ("q", "p"),
        };
        match mode {
            None => (a.to_string(), b.to_string()),
            Some(k) => (format!("{a}{}", k + 1), format!("{b}{}", k + 1)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AmplitudeParts => "amplitude_parts",
            Self::OperatorQuadratures => "operator_quadratures",
        }
    }
}

impl std::str::FromStr for QuadratureConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "amplitude_parts" | "amplitude-parts" | "x" => Ok(Self::AmplitudeParts),
            "operator_quadratures" | "operator-quadratures" | "q" => Ok(Self::OperatorQuadratures),
            other => Err(format!("unknown quadrature convention '{other}'")),
        }
    }
}

impl fmt::Display for QuadratureConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn convert_quadrature(value: f64, from: QuadratureConvention, to: QuadratureConvention) -> f64 {
    match (from, to) {
        (QuadratureConvention::AmplitudeParts, QuadratureConvention::OperatorQuadratures) => value * 2.0,
        (QuadratureConvention::OperatorQuadratures, QuadratureConvention::AmplitudeParts) => value / 2.0,
        _ => value,
    }
}

pub fn convert_variance(variance: f64, from: QuadratureConvention, to: QuadratureConvention) -> f64 {
    match (from, to) {
        (QuadratureConvention::AmplitudeParts, QuadratureConvention::OperatorQuadratures) => variance * 4.0,
        (QuadratureConvention::OperatorQuadratures, QuadratureConvention::AmplitudeParts) => variance / 4.0,
        _ => variance,
    }
}

/// Uniform grid on `[tau_0, tau_f]` with `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    tau_0: f64,
    tau_f: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(tau_0: f64, tau_f: f64, n_steps: usize) -> Result<Self, PhaseSpaceError> {
        if !(tau_0.is_finite() && tau_f.is_finite()) || tau_f <= tau_0 || n_steps == 0 {
            return Err(PhaseSpaceError::InvalidGrid { tau_0, tau_f, n_steps });
        }
        Ok(Self { tau_0, tau_f, n_steps })
    }

    /// Grid with step as close as possible to (and not above) `dtau`.
    pub fn with_step(tau_0: f64, tau_f: f64, dtau: f64) -> Result<Self, PhaseSpaceError> {
        let n = ((tau_f - tau_0) / dtau).ceil();
        if !n.is_finite() || n < 1.0 {
            return Err(PhaseSpaceError::InvalidGrid { tau_0, tau_f, n_steps: 0 });
        }
        Self::new(tau_0, tau_f, n as usize)
    }

    pub fn tau_0(&self) -> f64 {
        self.tau_0
    }

    pub fn tau_f(&self) -> f64 {
        self.tau_f
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dtau(&self) -> f64 {
        (self.tau_f - self.tau_0) / self.n_steps as f64
    }

    /// Time of grid point `i`; the last point is exactly `tau_f`.
    pub fn tau(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.tau_f
        } else {
            self.tau_0 + i as f64 * self.dtau()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(move |i| self.tau(i))
    }

    /// Index of the grid point nearest to `tau`.
    pub fn nearest_index(&self, tau: f64) -> usize {
        let i = ((tau - self.tau_0) / self.dtau()).round();
        i.clamp(0.0, self.n_steps as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl MixtureComponent {
    fn pdf(&self, value: f64) -> f64 {
        let d = value - self.mean;
        (-0.5 * d * d / self.variance).exp() / (2.0 * PI * self.variance).sqrt()
    }

    fn cdf(&self, value: f64) -> f64 {
        0.5 * erfc(-(value - self.mean) / (2.0 * self.variance).sqrt())
    }
}

/// Finite mixture of normal densities on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture1D {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture1D {
    pub const WEIGHT_TOLERANCE: f64 = 1e-12;

    pub fn new(components: Vec<MixtureComponent>) -> Result<Self, PhaseSpaceError> {
        if components.is_empty() {
            return Err(PhaseSpaceError::EmptyMixture);
        }
        for (index, c) in components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(PhaseSpaceError::InvalidComponent { index, reason: "weight must be a probability" });
            }
            if !c.mean.is_finite() {
                return Err(PhaseSpaceError::InvalidComponent { index, reason: "mean must be finite" });
            }
            if !(c.variance.is_finite() && c.variance > 0.0) {
                return Err(PhaseSpaceError::InvalidComponent { index, reason: "variance must be positive" });
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > Self::WEIGHT_TOLERANCE {
            return Err(PhaseSpaceError::WeightSum(total));
        }
        Ok(Self { components })
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self, PhaseSpaceError> {
        Self::new(vec![MixtureComponent { weight: 1.0, mean, variance }])
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn pdf(&self, value: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.pdf(value)).sum()
    }

    pub fn cdf(&self, value: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.cdf(value)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + (c.mean - m).powi(2)))
            .sum()
    }

    /// `[lo, hi]` covering every component out to `n_sigma` standard
    /// deviations.
    pub fn envelope(&self, n_sigma: f64) -> (f64, f64) {
        self.components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            let s = n_sigma * c.variance.sqrt();
            (lo.min(c.mean - s), hi.max(c.mean + s))
        })
    }

    /// Affine image `a·X + b` of the mixture.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self, PhaseSpaceError> {
        Self::new(
            self.components
                .iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    mean: scale * c.mean + shift,
                    variance: scale * scale * c.variance,
                })
                .collect(),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = if self.components.len() == 1 {
            &self.components[0]
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.components.last().expect("mixture is non-empty");
            for c in &self.components {
                acc += c.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            chosen
        };
        let z: f64 = rng.sample(StandardNormal);
        c.mean + c.variance.sqrt() * z
    }

    /// `(value, density)` pairs on the caller's grid.
    pub fn tabulate(&self, values: &[f64]) -> Vec<(f64, f64)> {
        values.iter().map(|&v| (v, self.pdf(v))).collect()
    }
}

pub fn mixture_pdf(m: &GaussianMixture1D, value: f64) -> f64 {
    m.pdf(value)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect()
        }
    }
}
