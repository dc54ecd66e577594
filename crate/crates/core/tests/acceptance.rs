//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qflow::bell::{b_max, chsh_monte_carlo, optimal_angles, violation_threshold, ChshSettings};
use qflow::dynamics::{measured_value_paths, sample_variance, simulate, BoundarySpec, Scheme, SimulationConfig};
use qflow::fock_oracle::{
    evolve_qubit_meter, fock_state, identity_suite, meter_input, q_function_moments, quadrature_moments,
    squeezed_vacuum, suite_points, ParametricAmplifier, QubitMeterState, SpinState,
};
use qflow::measurement::{
    binning_efficiency, continuous_measurement, measured_variance, measured_variance_p, closed_form_spin_density,
};
use qflow::phase_space::{linspace, QuadratureConvention, TimeGrid};
use qflow::rng::{self, DEFAULT_SEED};
use qflow::symbolic::{compile, compile_text, parse_hamiltonian, CompileError, FpeError, RealPoly};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn bell_curve() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let grid = linspace(0.0, 5.0, 100);
    let eta_err = grid.iter().map(|&g| (binning_efficiency(g) - libm::erf(g)).abs()).fold(0.0, f64::max);
    let mut ok = eta_err <= 1e-15;
    notes.push(format!("max|η−erf| = {eta_err:.1e}"));

    let angles = optimal_angles();
    for g in [0.5, 1.0, 2.0, 4.0] {
        let r = chsh_monte_carlo(&ChshSettings::new(angles, g, 1_000_000, DEFAULT_SEED).unwrap());
        let analytic = 2.0 * SQRT_2 * libm::erf(g).powi(2);
        let z = (r.b - analytic) / r.stderr;
        ok &= z.abs() <= 3.0 && (r.b_analytic - analytic).abs() < 1e-14;
        notes.push(format!("G={g}: MC {:.5}±{:.5} vs {analytic:.5} (z={z:+.2})", r.b, r.stderr));
    }

    let b1 = b_max(1.0);
    ok &= b1 > 2.0 && (b1 - 2.0087).abs() < 5e-4;
    notes.push(format!("B(1) = {b1:.7}"));
    let g_star = violation_threshold(1e-9);
    let target = 2f64.powf(-0.25);
    ok &= b_max(g_star - 1e-6) < 2.0 && b_max(g_star + 1e-6) > 2.0;
    ok &= (libm::erf(g_star) - target).abs() < 1e-8;
    notes.push(format!("G* = {g_star:.6} (erf(G*) − 2^(−1/4) = {:.1e})", libm::erf(g_star) - target));

    let t = start.elapsed();
    ok &= within(t, 60.0);
    notes.push(format!("{:.1}s", t.as_secs_f64()));
    outcome(ok, notes.join("; "))
}

fn amplifier() -> qflow::symbolic::PhaseSpacePDE {
    compile_text("0.5i*adag^2 - 0.5i*a^2", QuadratureConvention::OperatorQuadratures).unwrap()
}

fn continuous_measurement_variance() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for tau in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let v = continuous_measurement(1.0, 0.0, tau).unwrap().q_m_distribution.variance();
        ok &= (v / (-2.0 * tau).exp() - 1.0).abs() < 1e-14;
    }
    notes.push("closed form Var = e^(−2τ)".to_string());

    let n = 10_000;
    let tau_f = 3.0;
    let grid = TimeGrid::with_step(0.0, tau_f, 1e-3).unwrap();
    let config = SimulationConfig::new(grid, n, DEFAULT_SEED, Scheme::EulerMaruyama).record_every(1000);
    let ens = simulate(&amplifier(), &BoundarySpec::eigenstate_measurement(1.0, tau_f), &config).unwrap();
    let qm = measured_value_paths(&ens, ens.coordinate_index("q").unwrap());
    let tol = 5.0 / (n as f64).sqrt();
    for tau in [1.0, 2.0, 3.0] {
        let r = ens.record_at(tau);
        let col: Vec<f64> = qm.iter().map(|p| p[r]).collect();
        let rel = sample_variance(&col) / (-2.0 * tau).exp() - 1.0;
        ok &= rel.abs() < tol;
        notes.push(format!("τ={tau}: rel err {rel:+.4}"));
    }
    let t = start.elapsed();
    ok &= within(t, 30.0);
    notes.push(format!("tol {tol:.3}, {:.1}s", t.as_secs_f64()));
    outcome(ok, notes.join("; "))
}

fn boundary_statistics() -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let tau_f = 3.0;
    let grid = TimeGrid::with_step(0.0, tau_f, 1e-3).unwrap();
    let config = SimulationConfig::new(grid, n, DEFAULT_SEED, Scheme::ExactOU).record_every(3000);
    let ens = simulate(&amplifier(), &BoundarySpec::eigenstate_measurement(1.0, tau_f), &config).unwrap();
    let iq = ens.coordinate_index("q").unwrap();
    let tol = 5.0 / (n as f64).sqrt();
    let mut ok = true;
    let mut notes = Vec::new();
    for tau in [0.0, tau_f] {
        let v = ens.variance_at(ens.record_at(tau), iq);
        ok &= (v - 1.0).abs() < tol;
        notes.push(format!("Var q(τ={tau}) = {v:.5}"));
    }
    let t = start.elapsed();
    ok &= within(t, 30.0);
    notes.push(format!("tol {tol:.4}, {:.1}s", t.as_secs_f64()));
    outcome(ok, notes.join("; "))
}

fn variance_law() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    // Vacuum, and a squeezed vacuum with Var(q̂) = e^{−4}.
    let inputs = [("vacuum", fock_state(0, 64), 64), ("squeezed r=2", squeezed_vacuum(2.0, 512).unwrap(), 512)];
    for (name, psi, dim) in inputs {
        let var0 = quadrature_moments(&psi);
        let amp = ParametricAmplifier::new(dim);
        let mut worst: f64 = 0.0;
        for tau in [0.3, 0.7, 1.0] {
            let out = match amp.evolve(&psi, tau) {
                Ok(o) => o,
                Err(e) => return outcome(false, format!("{name}: {e}")),
            };
            let m = q_function_moments(&out);
            worst = worst.max((m.var_q - measured_variance(var0.var_q, tau)).abs());
            worst = worst.max((m.var_p - measured_variance_p(var0.var_p, tau)).abs());
        }
        ok &= worst < 1e-3;
        notes.push(format!("{name} (Var q̂ = {:.4}, dim {dim}): max err {worst:.1e}", var0.var_q));
    }
    outcome(ok, notes.join("; "))
}

fn random_quartic(r: &mut impl Rng) -> String {
    let coeff = |r: &mut dyn rand::RngCore| {
        let (a, b, c, d) = (r.random_range(-6..=6), r.random_range(1..=4), r.random_range(-6..=6), r.random_range(1..=4));
        ((a, b), (c, d))
    };
    let n_modes = r.random_range(1..=2);
    let names = [("a", "adag"), ("b", "bdag")];
    let mut terms = Vec::new();
    for k in 0..r.random_range(1..=4) {
        // (is_creation, mode); the first word is always of degree four
        let n_c = if k == 0 { 2 } else { r.random_range(0..=2) };
        let n_a = if k == 0 { 2 } else { r.random_range(0..=2) };
        let mut ops: Vec<(bool, usize)> = (0..n_c).map(|_| (true, r.random_range(0..n_modes))).collect();
        ops.extend((0..n_a).map(|_| (false, r.random_range(0..n_modes))));
        ops.shuffle(r);
        let word = |ops: &[(bool, usize)]| -> String {
            ops.iter().map(|&(c, m)| if c { names[m].1 } else { names[m].0 }).collect::<Vec<_>>().join("*")
        };
        let adjoint: Vec<(bool, usize)> = ops.iter().rev().map(|&(c, m)| (!c, m)).collect();
        let ((a, b), (c, d)) = coeff(r);
        let w = if ops.is_empty() { "1".to_string() } else { word(&ops) };
        let wa = if ops.is_empty() { "1".to_string() } else { word(&adjoint) };
        terms.push(format!("({a}/{b} + ({c}/{d})i)*{w}"));
        terms.push(format!("({a}/{b} - ({c}/{d})i)*{wa}"));
    }
    terms.join(" + ")
}

fn fpe_compilation() -> Outcome {
    let mut notes = Vec::new();
    let pde = amplifier();
    let one = |s: i64| qflow::symbolic::rational::Rational::from_integer(s.into());
    let mono = |powers: Vec<u32>, c: i64| {
        let mut p = RealPoly::zero();
        p.add_term(powers, one(c));
        p
    };
    let mut ok = pde.variables() == ["q", "p"];
    ok &= pde.drift() == [mono(vec![1, 0], 1), mono(vec![0, 1], -1)];
    ok &= pde.constant_diagonal_diffusion().map(|d| d == vec![one(-2), one(2)]).unwrap_or(false);
    ok &= pde.diffusion()[0][1].is_zero() && pde.diffusion()[1][0].is_zero();
    ok &= pde.pretty() == "dQ/dτ = [∂p·p + ∂p² − ∂q·q − ∂q²] Q";
    notes.push(format!("amplifier: {}", pde.pretty()));

    let mut r = rng::stream(DEFAULT_SEED, 7);
    let mut trace_free = 0;
    let mut failures = Vec::new();
    for _ in 0..200 {
        let text = random_quartic(&mut r);
        let h = parse_hamiltonian(&text).unwrap();
        match compile(&h, QuadratureConvention::OperatorQuadratures) {
            Ok(p) if p.is_trace_free() => trace_free += 1,
            Ok(_) => failures.push(format!("trace ≠ 0 for {text}")),
            Err(e) => failures.push(format!("{e} for {text}")),
        }
    }
    ok &= trace_free == 200;
    notes.push(format!("{trace_free}/200 random Hermitian quartics trace-free"));
    if let Some(f) = failures.first() {
        notes.push(f.clone());
    }

    let mut cubic_ok = true;
    for text in ["adag^3 + a^3", "i*adag^3 - i*a^3", "adag^3*a + adag*a^3", "adag^2*bdag + a^2*b"] {
        let is_order = matches!(
            compile_text(text, QuadratureConvention::OperatorQuadratures),
            Err(CompileError::Fpe(FpeError::Order { order: 3, .. }))
        );
        cubic_ok &= is_order;
    }
    ok &= cubic_ok;
    notes.push(format!("cubic terms raise OrderError: {cubic_ok}"));
    outcome(ok, notes.join("; "))
}

fn identities() -> Outcome {
    let checks = identity_suite(&suite_points(20, DEFAULT_SEED), 30);
    let mut names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    let has_all = ["a", "a_dagger", "right_a", "right_a_dagger", "spin_z"].iter().all(|n| names.contains(n));
    outcome(
        has_all && worst < 1e-6,
        format!("{} checks ({}) at 20 points, max error {worst:.2e}", checks.len(), names.join(", ")),
    )
}

fn qubit_measurement() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let spin = SpinState::equal_superposition();
    let grid = linspace(-3.0, 3.0, 241);
    for g in [1.0f64, 2.0, 4.0] {
        let dim = (g * g + 12.0 * g + 24.0).ceil() as usize;
        let joint = evolve_qubit_meter(&QubitMeterState::product(spin, &meter_input(g, dim).unwrap()), PI);
        let sup = grid.iter().map(|&s| (g * joint.x_marginal(g * s) - closed_form_spin_density(s, g)).abs()).fold(0.0, f64::max);
        let dens: Vec<f64> = grid.iter().map(|&s| closed_form_spin_density(s, g)).collect();
        let peaks: Vec<f64> =
            (1..grid.len() - 1).filter(|&i| dens[i] > dens[i - 1] && dens[i] > dens[i + 1]).map(|i| grid[i]).collect();
        // Overlap pulls the modes slightly inward at low gain.
        let two_peaks = peaks.len() == 2
            && (peaks[0] + peaks[1]).abs() < 1e-9
            && peaks.iter().all(|p| (p.abs() - 1.0).abs() < 0.1)
            && closed_form_spin_density(0.0, g) < closed_form_spin_density(peaks[1], g);
        ok &= sup < 1e-6 && two_peaks;
        notes.push(format!("G={g}: sup err {sup:.1e}, peaks {peaks:?}"));
    }
    outcome(ok, notes.join("; "))
}

fn run_cli(dir: &Path, name: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(name);
    let o = Command::new(env!("CARGO_BIN_EXE_qflow"))
        .args(args)
        .args(["--output", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("{args:?} exited with {:?}", o.status.code()));
    }
    let mut bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
    if let Ok(side) = std::fs::read(qflow::output::sidecar_path(&out)) {
        bytes.extend(side);
    }
    Ok(bytes)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 7] = [
        &["eigen-dist"],
        &["trajectories"],
        &["trajectories", "--n-traj", "200", "--scheme", "euler_maruyama", "--seed", "17"],
        &["spin-dist"],
        &["bell", "--n-g", "15"],
        &["verify"],
        &["derive-fpe", "0.5i*adag^2 - 0.5i*a^2"],
    ];
    let mut identical = 0;
    for (k, args) in commands.iter().enumerate() {
        match (run_cli(dir.path(), &format!("{k}a"), args), run_cli(dir.path(), &format!("{k}b"), args)) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => identical += 1,
            (Err(e), _) | (_, Err(e)) => return outcome(false, e),
            _ => return outcome(false, format!("{args:?} differs between runs")),
        }
    }
    outcome(identical == commands.len(), format!("{identical}/{} commands byte-identical across runs", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("bell_curve", bell_curve),
        ("continuous_measurement", continuous_measurement_variance),
        ("trajectory_boundary_statistics", boundary_statistics),
        ("variance_law", variance_law),
        ("fpe_compilation", fpe_compilation),
        ("identity_suite", identities),
        ("qubit_measurement", qubit_measurement),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
