//! Eigenvalue density of an amplified quadrature measurement.
//!
//! For an eigenstate `q̂ = q₀` amplified to gain `G = e^τ`, the inferred
//! eigenvalue `q_m = q/G` is Gaussian around `q₀` with variance `G⁻²`.

use qflow::measurement::{continuous_measurement, eigenvalue_density};
use qflow::dynamics::{mean, sample_variance};

fn main() {
    let q0 = 1.0;
    println!("{:>5} {:>8} {:>12} {:>12} {:>14} {:>14}", "τ", "G", "Var q_m", "e^(−2τ)", "sample mean", "sample var");
    for tau in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let r = continuous_measurement(q0, 0.0, tau).unwrap().with_samples(100_000, 7);
        let s = r.samples.as_deref().unwrap();
        println!(
            "{tau:>5.1} {:>8.3} {:>12.6} {:>12.6} {:>14.6} {:>14.6}",
            r.gain,
            r.q_m_distribution.variance(),
            (-2.0 * tau).exp(),
            mean(s),
            sample_variance(s)
        );
    }

    println!("\nP(q_m, τ) at τ = 1 on a coarse grid:");
    for k in 0..=12 {
        let q = -0.5 + 0.25 * k as f64;
        let p = eigenvalue_density(q, q0, 1.0);
        println!("  q_m = {q:>5.2}  {p:>10.6}  {}", "#".repeat((p * 10.0).round() as usize));
    }

    // An imperfect eigenstate keeps a variance floor of var₀.
    let blurred = continuous_measurement(q0, 0.05, 3.0).unwrap();
    println!("\nwith Var(q̂) = 0.05 at τ = 3: Var q_m = {:.6}", blurred.q_m_distribution.variance());
}
