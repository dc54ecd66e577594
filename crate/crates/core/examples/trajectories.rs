//! Forward-backward trajectories of the parametric amplifier.
//!
//! `q` diffuses backward from its future boundary, `p` forward from the
//! past. The inferred eigenvalue `q_m = q e^{−τ}` narrows as the gain grows.

use qflow::dynamics::{measured_value_paths, sample_variance, simulate, BoundarySpec, Scheme, SimulationConfig};
use qflow::phase_space::{QuadratureConvention, TimeGrid};
use qflow::rng::DEFAULT_SEED;
use qflow::symbolic::compile_text;

fn main() {
    let (q0, tau_f) = (1.0, 3.0);
    let pde = compile_text("0.5i*adag^2 - 0.5i*a^2", QuadratureConvention::OperatorQuadratures).unwrap();
    println!("{}", pde.pretty());

    let grid = TimeGrid::with_step(0.0, tau_f, 1e-3).unwrap();
    let bc = BoundarySpec::eigenstate_measurement(q0, tau_f);
    for scheme in [Scheme::ExactOU, Scheme::EulerMaruyama] {
        let config = SimulationConfig::new(grid, 20_000, DEFAULT_SEED, scheme).record_every(500);
        let ens = simulate(&pde, &bc, &config).unwrap();
        let (iq, ip) = (ens.coordinate_index("q").unwrap(), ens.coordinate_index("p").unwrap());
        let qm = measured_value_paths(&ens, iq);
        println!("\n{scheme}: {} trajectories", ens.n_traj());
        println!("{:>5} {:>10} {:>10} {:>10} {:>12} {:>12}", "τ", "mean q", "var q", "var p", "var q_m", "e^(−2τ)");
        for (r, tau) in ens.record_times().into_iter().enumerate() {
            let col: Vec<f64> = qm.iter().map(|path| path[r]).collect();
            println!(
                "{tau:>5.2} {:>10.4} {:>10.4} {:>10.4} {:>12.6} {:>12.6}",
                ens.mean_at(r, iq),
                ens.variance_at(r, iq),
                ens.variance_at(r, ip),
                sample_variance(&col),
                (-2.0 * tau).exp()
            );
        }
    }
}
