//! Compile Hamiltonians into Q-function evolution equations.
//!
//! ```text
//! cargo run --example derive_fpe -- "0.5i*adag^2 - 0.5i*a^2"
//! ```

use qflow::phase_space::QuadratureConvention;
use qflow::symbolic::compile_text;

fn main() {
    let given: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<String> = if given.is_empty() {
        ["0.5i*adag^2 - 0.5i*a^2", "adag*a", "0.3*adag*a + 0.5i*adag^2 - 0.5i*a^2", "adag*b + bdag*a", "adag^3 + a^3"]
            .map(String::from)
            .to_vec()
    } else {
        given
    };
    for h in &inputs {
        println!("H = {h}");
        for conv in [QuadratureConvention::OperatorQuadratures, QuadratureConvention::AmplitudeParts] {
            match compile_text(h, conv) {
                Ok(pde) => {
                    println!("  {:<22} {}", conv.as_str(), pde.pretty());
                    if pde.n_vars() == 2 {
                        println!("  {:<22} trace-free diffusion: {}, drift at (1, 0): {:?}", "", pde.is_trace_free(), pde.drift_at(&[1.0, 0.0]));
                    }
                }
                Err(e) => println!("  {:<22} error: {e}", conv.as_str()),
            }
        }
    }
    let amp = compile_text(&inputs[0], QuadratureConvention::OperatorQuadratures);
    if let Ok(pde) = amp {
        println!("\nmachine-readable form of the first equation:\n{}", pde.to_json());
    }
}
