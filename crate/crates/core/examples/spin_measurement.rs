//! Qubit measured by a coupled meter mode.
//!
//! The meter readout `σ_m = x/G` has one peak per spin projection. The
//! closed form is checked against the x-marginal of the joint
//! state evolved in truncated Fock space.

use std::f64::consts::PI;

use qflow::fock_oracle::{evolve_qubit_meter, meter_input, QubitMeterState, SpinState};
use qflow::measurement::{binning_efficiency, closed_form_spin_density, qubit_measurement};
use qflow::phase_space::linspace;

fn main() {
    let spin = SpinState::equal_superposition();
    for g in [1.0f64, 2.0, 4.0] {
        let dim = (g * g + 12.0 * g + 24.0).ceil() as usize;
        let meter = meter_input(g, dim).unwrap();
        let joint = evolve_qubit_meter(&QubitMeterState::product(spin, &meter), PI);
        let grid = linspace(-2.5, 2.5, 101);
        let sup = grid
            .iter()
            .map(|&s| (g * joint.x_marginal(g * s) - closed_form_spin_density(s, g)).abs())
            .fold(0.0, f64::max);
        let r = qubit_measurement(spin, g).unwrap().with_binned_samples(50_000, 3);
        let up = r.binned_samples.as_ref().unwrap().iter().filter(|&&b| b == 1).count();
        println!(
            "G = {g}: dim {dim}, sup |oracle − closed form| = {sup:.2e}, P(0)/P(1) = {:.3e}, binning efficiency {:.6}, binned up fraction {:.4}",
            closed_form_spin_density(0.0, g) / closed_form_spin_density(1.0, g),
            binning_efficiency(g),
            up as f64 / 50_000.0
        );
    }

    println!("\nP(σ_m) at G = 3:");
    for k in 0..=24 {
        let s = -1.5 + 0.125 * k as f64;
        let p = closed_form_spin_density(s, 3.0);
        println!("  {s:>6.3}  {p:>8.4}  {}", "#".repeat((p * 12.0).round() as usize));
    }
}
