//! CHSH test on the singlet with two amplifying meters and sign binning.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measurement::{bin_spin, binning_efficiency};
use crate::rng;

/// Samples per independent random stream in the Monte Carlo.
pub const BATCH: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellError {
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

/// Measurement angles `(θ₁, θ₂)` at site A and `(φ₁, φ₂)` at site B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshAngles {
    pub theta: [f64; 2],
    pub phi: [f64; 2],
}

impl ChshAngles {
    pub fn new(theta: [f64; 2], phi: [f64; 2]) -> Result<Self, BellError> {
        if theta.iter().chain(&phi).any(|a| !a.is_finite()) {
            return Err(BellError::InvalidSettings("angles must be finite".into()));
        }
        Ok(Self { theta, phi })
    }

    /// Same angles shifted by a common offset at both sites.
    pub fn shifted(&self, offset: f64) -> Self {
        Self { theta: self.theta.map(|t| t + offset), phi: self.phi.map(|p| p + offset) }
    }
}

/// `θ = (0, π/2)`, `φ = (−3π/4, −π/4)`, where `E = −cos(θ − φ)` gives
/// `B = 2√2`.
pub fn optimal_angles() -> ChshAngles {
    ChshAngles { theta: [0.0, FRAC_PI_2], phi: [-3.0 * FRAC_PI_4, -FRAC_PI_4] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub angles: ChshAngles,
    pub gain: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl ChshSettings {
    pub fn new(angles: ChshAngles, gain: f64, n_samples: usize, seed: u64) -> Result<Self, BellError> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(BellError::InvalidSettings(format!("gain must be positive, got {gain}")));
        }
        if n_samples == 0 {
            return Err(BellError::InvalidSettings("at least one sample is required".into()));
        }
        Ok(Self { angles, gain, n_samples, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// `E(θ_i, φ_j)`.
    pub correlations: [[f64; 2]; 2],
    pub b: f64,
    pub b_analytic: f64,
    pub stderr: f64,
    /// Binned marginal `⟨σ_b^A⟩` for each setting pair; zero for the analytic result.
    pub marginals_a: [[f64; 2]; 2],
    pub marginals_b: [[f64; 2]; 2],
}

/// `¼(1 − ab cos(θ − φ))` for outcomes `a, b ∈ {±1}`.
pub fn singlet_branch_probability(a: i8, b: i8, theta: f64, phi: f64) -> f64 {
    0.25 * (1.0 - f64::from(a) * f64::from(b) * (theta - phi).cos())
}

/// `E(θ, φ) = −η(G)² cos(θ − φ)`.
pub fn analytic_correlation(gain: f64, theta: f64, phi: f64) -> f64 {
    -binning_efficiency(gain).powi(2) * (theta - phi).cos()
}

/// `E₁₁ − E₁₂ + E₂₂ + E₂₁`.
pub fn chsh_combination(e: &[[f64; 2]; 2]) -> f64 {
    e[0][0] - e[0][1] + e[1][1] + e[1][0]
}

pub fn chsh_analytic(gain: f64, angles: &ChshAngles) -> ChshResult {
    let mut e = [[0.0; 2]; 2];
    for (i, row) in e.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = analytic_correlation(gain, angles.theta[i], angles.phi[j]);
        }
    }
    let b = chsh_combination(&e);
    ChshResult {
        correlations: e,
        b,
        b_analytic: b,
        stderr: 0.0,
        marginals_a: [[0.0; 2]; 2],
        marginals_b: [[0.0; 2]; 2],
    }
}

/// `2√2 η(G)²`, the optimal-angle value.
pub fn b_max(gain: f64) -> f64 {
    2.0 * SQRT_2 * binning_efficiency(gain).powi(2)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    product: i64,
    sum_a: i64,
    sum_b: i64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally { n: self.n + o.n, product: self.product + o.product, sum_a: self.sum_a + o.sum_a, sum_b: self.sum_b + o.sum_b }
    }
}

fn sample_pair(gain: f64, theta: f64, phi: f64, n: usize, seed: u64, pair: u64) -> Tally {
    let sd = 1.0 / (gain * SQRT_2);
    // Probability that the outcomes agree: 2·¼(1 − cos Δ).
    let p_same = 0.5 * (1.0 - (theta - phi).cos());
    let n_batches = n.div_ceil(BATCH);
    (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut r = rng::stream(seed, (pair << 32) | batch as u64);
            let count = BATCH.min(n - batch * BATCH);
            let mut t = Tally::default();
            for _ in 0..count {
                let a: i8 = if r.random::<bool>() { 1 } else { -1 };
                let b = if r.random::<f64>() < p_same { a } else { -a };
                let za: f64 = StandardNormal.sample(&mut r);
                let zb: f64 = StandardNormal.sample(&mut r);
                let ba = bin_spin(f64::from(a) + sd * za);
                let bb = bin_spin(f64::from(b) + sd * zb);
                t.n += 1;
                t.product += i64::from(ba) * i64::from(bb);
                t.sum_a += i64::from(ba);
                t.sum_b += i64::from(bb);
            }
            t
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

/// Monte Carlo estimate: per sample, draw the branch `(a, b)` with the
/// singlet probabilities, meter outcomes `σ_m ~ N(±1, 1/(2G²))`, and bin by
/// sign. Each setting pair uses `n_samples` samples.
pub fn chsh_monte_carlo(s: &ChshSettings) -> ChshResult {
    let mut e = [[0.0; 2]; 2];
    let mut ma = [[0.0; 2]; 2];
    let mut mb = [[0.0; 2]; 2];
    let mut var = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let t = sample_pair(s.gain, s.angles.theta[i], s.angles.phi[j], s.n_samples, s.seed, (2 * i + j) as u64);
            let n = t.n as f64;
            e[i][j] = t.product as f64 / n;
            ma[i][j] = t.sum_a as f64 / n;
            mb[i][j] = t.sum_b as f64 / n;
            var += (1.0 - e[i][j] * e[i][j]) / n;
        }
    }
    ChshResult {
        correlations: e,
        b: chsh_combination(&e),
        b_analytic: chsh_analytic(s.gain, &s.angles).b,
        stderr: var.sqrt(),
        marginals_a: ma,
        marginals_b: mb,
    }
}

/// Density of `(σ_A, σ_B)` under the sampling model.
pub fn sampler_density(sigma_a: f64, sigma_b: f64, gain: f64, theta: f64, phi: f64) -> f64 {
    let g2 = gain * gain;
    let gauss = |x: f64, m: f64| gain / PI.sqrt() * (-g2 * (x - m).powi(2)).exp();
    let mut total = 0.0;
    for a in [1i8, -1] {
        for b in [1i8, -1] {
            total += singlet_branch_probability(a, b, theta, phi) * gauss(sigma_a, a.into()) * gauss(sigma_b, b.into());
        }
    }
    total
}

/// Gain where the optimal-angle `B` reaches 2, i.e. `erf(G) = 2^{−1/4}`, by
/// bisection to `tol`.
pub fn violation_threshold(tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 5.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if b_max(mid) > 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_oracle::{evolve_bell_meters, spin_basis, BRANCH_SIGNS};
    use libm::erf;

    #[test]
    fn branch_probabilities() {
        assert_eq!(singlet_branch_probability(1, 1, 0.4, 0.4), 0.0);
        assert!((singlet_branch_probability(1, -1, 0.4, 0.4) - 0.5).abs() < 1e-15);
        for (a, b) in BRANCH_SIGNS {
            assert!((singlet_branch_probability(a, b, 1.0, 1.0 - FRAC_PI_2) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn branch_probabilities_from_projectors() {
        // ⟨ψ|P_a(θ) ⊗ P_b(φ)|ψ⟩ for the singlet in the (↑, ↓) basis.
        let singlet = [[0.0, 1.0], [-1.0, 0.0]].map(|r: [f64; 2]| r.map(|x| x / SQRT_2));
        for (theta, phi) in [(0.3, -1.2), (2.0, 0.1), (0.0, FRAC_PI_2)] {
            for (a, b) in BRANCH_SIGNS {
                let (ea, eb) = (spin_basis(theta, a), spin_basis(phi, b));
                let amp: f64 = (0..2).map(|i| (0..2).map(|j| ea[i] * eb[j] * singlet[i][j]).sum::<f64>()).sum();
                assert!((amp * amp - singlet_branch_probability(a, b, theta, phi)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn analytic_values() {
        let ang = optimal_angles();
        assert!((chsh_analytic(40.0, &ang).b - 2.0 * SQRT_2).abs() < 1e-14);
        assert_eq!(chsh_analytic(0.0, &ang).b, 0.0);
        let b1 = chsh_analytic(1.0, &ang).b;
        assert!((b1 - 2.0 * SQRT_2 * erf(1.0).powi(2)).abs() < 1e-14);
        assert!((b1 - 2.008_592_323_910_211).abs() < 1e-12, "{b1:.17}");
        let e = chsh_analytic(40.0, &ang).correlations;
        let h = SQRT_2 / 2.0;
        assert!((e[0][0] - h).abs() < 1e-14 && (e[1][1] - h).abs() < 1e-14 && (e[1][0] - h).abs() < 1e-14);
        assert!((e[0][1] + h).abs() < 1e-14);
        for t in ang.theta {
            for p in ang.phi {
                let k = (t - p) / FRAC_PI_4;
                assert!((k - k.round()).abs() < 1e-12 && (k.round() as i64) % 2 != 0);
            }
        }
        let swapped = ChshAngles { theta: ang.theta, phi: [ang.phi[1], ang.phi[0]] };
        assert!(chsh_analytic(40.0, &swapped).b.abs() <= 2.0 + 1e-12);
    }

    #[test]
    fn threshold_brackets_unity() {
        let g = violation_threshold(1e-9);
        assert!((erf(g) - 2f64.powf(-0.25)).abs() < 1e-8);
        assert!(g > 0.95 && g < 1.05);
        for k in 0..=50 {
            let g = 1.05 + 0.1 * k as f64;
            assert!(b_max(g) > 2.0);
        }
        for k in 0..=95 {
            assert!(b_max(0.01 * k as f64) < 2.0);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_analytic() {
        for g in [0.5, 1.0, 2.0, 4.0] {
            let s = ChshSettings::new(optimal_angles(), g, 200_000, 17).unwrap();
            let r = chsh_monte_carlo(&s);
            assert!((r.b - r.b_analytic).abs() < 3.0 * r.stderr, "G={g}: {} vs {}", r.b, r.b_analytic);
            assert_eq!(r.b, chsh_combination(&r.correlations));
            for i in 0..2 {
                for j in 0..2 {
                    // 16 comparisons per seed, so a 4σ bound.
                    let sigma = 1.0 / (s.n_samples as f64).sqrt();
                    assert!(r.marginals_a[i][j].abs() < 4.0 * sigma && r.marginals_b[i][j].abs() < 4.0 * sigma);
                }
            }
        }
    }

    #[test]
    fn single_sample_is_degenerate() {
        let r = chsh_monte_carlo(&ChshSettings::new(optimal_angles(), 2.0, 1, 4).unwrap());
        for row in r.correlations {
            for e in row {
                assert!(e == 1.0 || e == -1.0);
            }
        }
        assert!(r.b.abs() <= 4.0 && r.b.fract() == 0.0);
    }

    #[test]
    fn common_shift_invariance() {
        let ang = ChshAngles::new([0.2, 1.1], [-0.7, 2.5]).unwrap();
        let a = chsh_analytic(1.3, &ang);
        let b = chsh_analytic(1.3, &ang.shifted(0.9));
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.correlations[i][j] - b.correlations[i][j]).abs() < 1e-14);
            }
        }
        let m1 = chsh_monte_carlo(&ChshSettings::new(ang, 1.3, 100_000, 2).unwrap());
        let m2 = chsh_monte_carlo(&ChshSettings::new(ang.shifted(0.9), 1.3, 100_000, 3).unwrap());
        assert!((m1.b - m2.b).abs() < 3.0 * (m1.stderr.powi(2) + m2.stderr.powi(2)).sqrt());
    }

    #[test]
    fn deterministic_monte_carlo() {
        let s = ChshSettings::new(optimal_angles(), 1.0, 150_000, 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(chsh_monte_carlo(&s), pool.install(|| chsh_monte_carlo(&s)));
    }

    #[test]
    fn sampler_matches_oracle_marginal() {
        let g = 1.0;
        let ang = optimal_angles();
        let (theta, phi) = (ang.theta[0], ang.phi[1]);
        let st = evolve_bell_meters(g, 24, theta, phi).unwrap();
        let xs = [-1.5, -0.5, 0.0, 0.9];
        let grid = st.x_marginal_grid(&xs, &xs);
        for (i, &xa) in xs.iter().enumerate() {
            for (j, &xb) in xs.iter().enumerate() {
                let oracle = g * g * grid[i][j];
                let model = sampler_density(xa / g, xb / g, g, theta, phi);
                assert!((oracle - model).abs() < 1e-4, "{xa} {xb}: {oracle} {model}");
            }
        }
    }
}
