//! Coherent-state and spin projector identities in truncated Fock space.

use qflow::fock_oracle::{identity_suite, suite_points};
use qflow::rng::DEFAULT_SEED;

fn main() {
    let points = suite_points(20, DEFAULT_SEED);
    let checks = identity_suite(&points, 30);
    let mut names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    for name in names {
        let errs: Vec<f64> = checks.iter().filter(|c| c.name == name).map(|c| c.error).collect();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        println!("{name:<15} {} points, max error {worst:.3e}", errs.len());
    }
}
