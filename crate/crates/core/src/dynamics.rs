//! Forward-backward stochastic trajectories of a phase-space equation.
//!
//! Coordinates with positive diffusion start from a past boundary sample and
//! run forward in τ; coordinates with negative diffusion start from a future
//! boundary sample and run backward, with drift `−A` and noise variance
//! `|D| dτ` per step.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase_space::{GaussianMixture1D, TimeGrid};
use crate::rng;
use crate::symbolic::rational::rational_to_f64;
use crate::symbolic::{DiffusionSign, FpeError, PhaseSpacePDE};

/// Largest allowed `dτ · max|∂A^μ/∂φ^ν|`.
pub const MAX_STEP_STIFFNESS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("boundary for '{coordinate}' is at the {given}, but its diffusion requires the {required}")]
    SignSplit { coordinate: String, given: BoundaryEnd, required: BoundaryEnd },
    #[error("step too large: dτ·max|∂A/∂φ| = {stiffness:.4} exceeds {MAX_STEP_STIFFNESS}")]
    Step { stiffness: f64 },
    #[error("equation does not factor into forward and backward parts: {0}")]
    NonFactorizable(String),
    #[error("scheme {scheme} cannot integrate this equation: {reason}")]
    UnsupportedScheme { scheme: Scheme, reason: String },
    #[error("boundary specification has {given} coordinates, equation has {expected}")]
    BoundaryArity { given: usize, expected: usize },
    #[error("record stride must be at least 1")]
    RecordStride,
    #[error("non-finite value in trajectory {traj}")]
    NonFinite { traj: usize },
}

impl From<FpeError> for DynamicsError {
    fn from(e: FpeError) -> Self {
        DynamicsError::NonFactorizable(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    /// Exact Ornstein-Uhlenbeck update for affine, uncoupled drift.
    ExactOU,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::ExactOU => "exact_ou",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "euler_maruyama" | "em" => Ok(Scheme::EulerMaruyama),
            "exact_ou" | "ou" => Ok(Scheme::ExactOU),
            other => Err(format!("unknown scheme '{other}' (expected euler_maruyama or exact_ou)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryEnd {
    Past,
    Future,
}

impl fmt::Display for BoundaryEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryEnd::Past => "past",
            BoundaryEnd::Future => "future",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateBoundary {
    pub end: BoundaryEnd,
    pub sampler: GaussianMixture1D,
}

/// One boundary per coordinate, in the equation's variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    coordinates: Vec<CoordinateBoundary>,
}

impl BoundarySpec {
    pub fn new(coordinates: Vec<CoordinateBoundary>) -> Self {
        Self { coordinates }
    }

    pub fn coordinates(&self) -> &[CoordinateBoundary] {
        &self.coordinates
    }

    /// Amplifier boundaries in `(q, p)`: `q` fixed in the future, `p` in the past.
    pub fn amplifier(q_future: GaussianMixture1D, p_past: GaussianMixture1D) -> Self {
        Self::new(vec![
            CoordinateBoundary { end: BoundaryEnd::Future, sampler: q_future },
            CoordinateBoundary { end: BoundaryEnd::Past, sampler: p_past },
        ])
    }

    /// Near-eigenstate measurement of `q̂ = q₀` ending at gain `G(τ_f)`:
    /// `q(τ_f) ~ N(G q₀, 1)` and `p(τ_0) ~ N(0, 1)`.
    pub fn eigenstate_measurement(q0: f64, tau_f: f64) -> Self {
        let g = tau_f.exp();
        Self::amplifier(
            GaussianMixture1D::normal(g * q0, 1.0).expect("unit variance"),
            GaussianMixture1D::normal(0.0, 1.0).expect("unit variance"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: TimeGrid,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Keep every `record_every`-th grid point (the final point is always kept).
    pub record_every: usize,
}

impl SimulationConfig {
    pub fn new(grid: TimeGrid, n_traj: usize, seed: u64, scheme: Scheme) -> Self {
        Self { grid, n_traj, seed, scheme, record_every: 1 }
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }
}

/// Sampled paths, stored trajectory-major as `[traj][record][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    grid: TimeGrid,
    coordinates: Vec<String>,
    record_indices: Vec<usize>,
    paths: Vec<f64>,
    n_traj: usize,
    seed: u64,
    scheme: Scheme,
}

impl TrajectoryEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn coordinate_index(&self, name: &str) -> Option<usize> {
        self.coordinates.iter().position(|c| c == name)
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    pub fn n_records(&self) -> usize {
        self.record_indices.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Grid indices of the stored records.
    pub fn record_indices(&self) -> &[usize] {
        &self.record_indices
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_indices.iter().map(|&i| self.grid.tau(i)).collect()
    }

    /// Record index nearest to `tau`.
    pub fn record_at(&self, tau: f64) -> usize {
        let times = self.record_times();
        (0..times.len())
            .min_by(|&a, &b| (times[a] - tau).abs().total_cmp(&(times[b] - tau).abs()))
            .unwrap_or(0)
    }

    pub fn value(&self, traj: usize, record: usize, coord: usize) -> f64 {
        let d = self.coordinates.len();
        self.paths[(traj * self.n_records() + record) * d + coord]
    }

    pub fn path(&self, traj: usize, coord: usize) -> Vec<f64> {
        (0..self.n_records()).map(|r| self.value(traj, r, coord)).collect()
    }

    /// Values of one coordinate across the ensemble at one record.
    pub fn slice(&self, record: usize, coord: usize) -> Vec<f64> {
        (0..self.n_traj).map(|t| self.value(t, record, coord)).collect()
    }

    pub fn mean_at(&self, record: usize, coord: usize) -> f64 {
        mean(&self.slice(record, coord))
    }

    /// Unbiased sample variance.
    pub fn variance_at(&self, record: usize, coord: usize) -> f64 {
        sample_variance(&self.slice(record, coord))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// `x e^{−k dτ} + ξ √(D/(2k) (1 − e^{−2k dτ}))`.
pub fn exact_ou_step(x: f64, dtau: f64, damping: f64, diffusion_abs: f64, gaussian: f64) -> f64 {
    let decay = (-damping * dtau).exp();
    let var = diffusion_abs / (2.0 * damping) * -(-2.0 * damping * dtau).exp_m1();
    x * decay + gaussian * var.sqrt()
}

/// Per-coordinate integration data after validation.
#[derive(Debug, Clone)]
struct CoordPlan {
    backward: bool,
    diffusion_abs: f64,
    /// Affine drift `slope·x + offset` in the integration direction, when the
    /// coordinate's drift depends on itself only.
    affine: Option<(f64, f64)>,
}

fn plan(pde: &PhaseSpacePDE, bc: &BoundarySpec, config: &SimulationConfig) -> Result<Vec<CoordPlan>, DynamicsError> {
    let n = pde.n_vars();
    if bc.coordinates.len() != n {
        return Err(DynamicsError::BoundaryArity { given: bc.coordinates.len(), expected: n });
    }
    if config.record_every == 0 {
        return Err(DynamicsError::RecordStride);
    }
    let diffusion = pde.constant_diagonal_diffusion()?;
    let signs = pde.sign_split()?;
    for (mu, sign) in signs.iter().enumerate() {
        let required = match sign {
            DiffusionSign::Forward => BoundaryEnd::Past,
            DiffusionSign::Backward => BoundaryEnd::Future,
            DiffusionSign::DriftOnly => continue,
        };
        let given = bc.coordinates[mu].end;
        if given != required {
            return Err(DynamicsError::SignSplit { coordinate: pde.variables()[mu].clone(), given, required });
        }
    }
    let jac = pde.drift_jacobian();
    for mu in 0..n {
        for nu in 0..n {
            if bc.coordinates[mu].end != bc.coordinates[nu].end && !jac[mu][nu].is_zero() {
                return Err(DynamicsError::NonFactorizable(format!(
                    "drift of '{}' depends on '{}', which is integrated in the opposite direction",
                    pde.variables()[mu],
                    pde.variables()[nu]
                )));
            }
        }
    }
    // Stiffness from the constant slopes, or at the boundary means when the
    // drift is nonlinear.
    let probe: Vec<f64> = bc.coordinates.iter().map(|c| c.sampler.mean()).collect();
    let max_slope = jac
        .iter()
        .flatten()
        .map(|p| match p.as_constant() {
            Some(c) => rational_to_f64(&c).abs(),
            None => p.eval(&probe).abs(),
        })
        .fold(0.0, f64::max);
    let stiffness = config.grid.dtau() * max_slope;
    if stiffness > MAX_STEP_STIFFNESS {
        return Err(DynamicsError::Step { stiffness });
    }
    let mut out = Vec::with_capacity(n);
    for mu in 0..n {
        let backward = bc.coordinates[mu].end == BoundaryEnd::Future;
        let dir = if backward { -1.0 } else { 1.0 };
        let a = &pde.drift()[mu];
        let self_only = (0..n).all(|nu| nu == mu || jac[mu][nu].is_zero());
        let affine = (self_only && a.degree() <= 1).then(|| {
            let slope = jac[mu][mu].as_constant().map(|c| rational_to_f64(&c)).unwrap_or(0.0);
            let offset = a.eval(&vec![0.0; n]);
            (dir * slope, dir * offset)
        });
        if config.scheme == Scheme::ExactOU && affine.is_none() {
            return Err(DynamicsError::UnsupportedScheme {
                scheme: Scheme::ExactOU,
                reason: format!("drift of '{}' is not affine in '{}' alone", pde.variables()[mu], pde.variables()[mu]),
            });
        }
        out.push(CoordPlan { backward, diffusion_abs: rational_to_f64(&diffusion[mu]).abs(), affine });
    }
    Ok(out)
}

/// Coefficients `(a, b, σ)` of the exact affine step `x' = a x + b + σ ξ`
/// for `dx = (s x + c) dτ + √D dW`.
fn affine_coefficients(dtau: f64, slope: f64, offset: f64, diffusion_abs: f64) -> (f64, f64, f64) {
    if slope == 0.0 {
        return (1.0, offset * dtau, (diffusion_abs * dtau).sqrt());
    }
    let fixed = -offset / slope;
    let decay = (slope * dtau).exp();
    let var = diffusion_abs / (2.0 * slope) * (2.0 * slope * dtau).exp_m1();
    (decay, fixed * (1.0 - decay), var.sqrt())
}

fn record_indices(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *idx.last().expect("at least one index") != n_steps {
        idx.push(n_steps);
    }
    idx
}

/// Integrate `config.n_traj` trajectories.
///
/// Trajectory `t`, coordinate `μ` draws from stream `t·n_coords + μ`: first
/// its boundary sample, then one standard normal per step in integration
/// order. Schemes therefore share noise realizations for equal seeds.
pub fn simulate(
    pde: &PhaseSpacePDE,
    bc: &BoundarySpec,
    config: &SimulationConfig,
) -> Result<TrajectoryEnsemble, DynamicsError> {
    let plans = plan(pde, bc, config)?;
    let n = pde.n_vars();
    let grid = config.grid;
    let n_points = grid.n_points();
    let dtau = grid.dtau();
    let records = record_indices(grid.n_steps(), config.record_every);

    let steps: Vec<(f64, f64, f64)> = plans
        .iter()
        .map(|p| match p.affine {
            Some((slope, offset)) => affine_coefficients(dtau, slope, offset, p.diffusion_abs),
            None => (1.0, 0.0, (p.diffusion_abs * dtau).sqrt()),
        })
        .collect();
    let drift: Vec<Vec<(Vec<i32>, f64)>> = pde
        .drift()
        .iter()
        .map(|a| a.terms().map(|(m, c)| (m.iter().map(|&e| e as i32).collect(), rational_to_f64(c))).collect())
        .collect();
    let eval = |poly: &[(Vec<i32>, f64)], x: &[f64]| -> f64 {
        poly.iter().map(|(m, c)| m.iter().zip(x).fold(*c, |acc, (&e, &v)| acc * v.powi(e))).sum()
    };

    let run = |traj: usize| -> Result<Vec<f64>, DynamicsError> {
        // full[i][μ] on the whole grid; each direction group is integrated
        // on its own since cross-group drift couplings are excluded.
        let mut full = vec![0.0; n_points * n];
        let mut streams: Vec<_> = (0..n).map(|mu| rng::stream(config.seed, (traj * n + mu) as u64)).collect();
        for mu in 0..n {
            let start = bc.coordinates[mu].sampler.sample(&mut streams[mu]);
            let i0 = if plans[mu].backward { n_points - 1 } else { 0 };
            full[i0 * n + mu] = start;
        }
        let mut state = vec![0.0; n];
        let mut velocity = vec![0.0; n];
        for backward in [false, true] {
            let group: Vec<usize> = (0..n).filter(|&mu| plans[mu].backward == backward).collect();
            if group.is_empty() {
                continue;
            }
            for (mu, c) in bc.coordinates.iter().enumerate() {
                state[mu] = c.sampler.mean();
            }
            let i0 = if backward { n_points - 1 } else { 0 };
            for &mu in &group {
                state[mu] = full[i0 * n + mu];
            }
            let dir = if backward { -1.0 } else { 1.0 };
            for step in 1..n_points {
                let i = if backward { n_points - 1 - step } else { step };
                if config.scheme == Scheme::EulerMaruyama {
                    for &mu in &group {
                        velocity[mu] = dir * eval(&drift[mu], &state);
                    }
                }
                for &mu in &group {
                    let z: f64 = StandardNormal.sample(&mut streams[mu]);
                    let (a, b, sigma) = steps[mu];
                    state[mu] = match config.scheme {
                        Scheme::EulerMaruyama => state[mu] + velocity[mu] * dtau + sigma * z,
                        Scheme::ExactOU => a * state[mu] + b + sigma * z,
                    };
                    if !state[mu].is_finite() {
                        return Err(DynamicsError::NonFinite { traj });
                    }
                    full[i * n + mu] = state[mu];
                }
            }
        }
        let mut out = Vec::with_capacity(records.len() * n);
        for &i in &records {
            out.extend_from_slice(&full[i * n..(i + 1) * n]);
        }
        Ok(out)
    };

    let per_traj: Vec<Vec<f64>> = (0..config.n_traj).into_par_iter().map(run).collect::<Result<_, _>>()?;
    Ok(TrajectoryEnsemble {
        grid,
        coordinates: pde.variables().to_vec(),
        record_indices: records,
        paths: per_traj.concat(),
        n_traj: config.n_traj,
        seed: config.seed,
        scheme: config.scheme,
    })
}

/// `q_m(τ) = q(τ)/G(τ)` with `G(τ) = e^τ`, per trajectory and record.
pub fn measured_value_paths(ensemble: &TrajectoryEnsemble, coord: usize) -> Vec<Vec<f64>> {
    let times = ensemble.record_times();
    (0..ensemble.n_traj())
        .map(|t| {
            ensemble.path(t, coord).iter().zip(&times).map(|(q, tau)| q * (-tau).exp()).collect()
        })
        .collect()
}
