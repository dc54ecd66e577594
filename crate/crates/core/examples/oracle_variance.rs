//! Amplified quadrature variance from the truncated Fock-space oracle,
//! compared with `Var_Q(q, τ) = 1 + e^{2τ} Var(q̂, 0)`.
//!
//! Inputs are the vacuum and squeezed vacua of increasing squeezing. For
//! each squeezing the smallest basis size passing the truncation check is
//! found by doubling.

use qflow::fock_oracle::{fock_state, q_function_moments, quadrature_moments, squeezed_vacuum, ParametricAmplifier};
use qflow::measurement::measured_variance;

fn main() {
    let taus = [0.3, 0.7, 1.0];
    println!("{:>6} {:>6} {:>12} {:>6} {:>22} {:>10}", "r", "dim", "Var(q̂,0)", "τ", "Var_Q(q,τ) oracle", "|error|");
    for r in [0.0, 1.0, 2.0] {
        let mut dim = 64;
        let psi = loop {
            let state = if r == 0.0 { Ok(fock_state(0, dim)) } else { squeezed_vacuum(r, dim) };
            match state.and_then(|s| {
                let amp = ParametricAmplifier::new(dim);
                taus.iter().try_for_each(|&t| amp.evolve(&s, t).map(|_| ()))?;
                Ok(s)
            }) {
                Ok(s) => break s,
                Err(_) if dim < 1024 => dim *= 2,
                Err(e) => panic!("r = {r}: {e}"),
            }
        };
        let var0 = quadrature_moments(&psi).var_q;
        let amp = ParametricAmplifier::new(dim);
        for tau in taus {
            let out = amp.evolve(&psi, tau).expect("checked above");
            let v = q_function_moments(&out).var_q;
            println!(
                "{r:>6.2} {dim:>6} {var0:>12.4e} {tau:>6.2} {v:>22.15} {:>10.2e}",
                (v - measured_variance(var0, tau)).abs()
            );
        }
    }
}
