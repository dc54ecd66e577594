//! `qflow` command-line front end.
//!
//! Every subcommand writes a table (CSV with a `.meta.json` sidecar, or one
//! JSON document) to `--output`, or to stdout. Runs are reproducible: the
//! seed defaults to [`DEFAULT_SEED`].
//!
//! Exit codes: 0 ok, 2 I/O, 3 parse or usage, 4 order or compile, 5 tolerance.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

use crate::bell::{self, ChshAngles, ChshSettings};
use crate::dynamics::{self, BoundarySpec, Scheme, SimulationConfig};
use crate::fock_oracle::{self, SpinState};
use crate::measurement::{self, CONTINUOUS_CONVENTION, SPIN_CONVENTION};
use crate::output::{self, Cell, Format, Metadata, Table};
use crate::phase_space::{linspace, QuadratureConvention, TimeGrid};
use crate::rng::DEFAULT_SEED;
use crate::symbolic::{compile_text, CompileError};

/// Amplifier Hamiltonian `i(a†² − a²)/2` driving the continuous measurement.
pub const AMPLIFIER_HAMILTONIAN: &str = "0.5i*adag^2 - 0.5i*a^2";

const SUBCOMMANDS: [&str; 6] = ["eigen-dist", "trajectories", "spin-dist", "bell", "derive-fpe", "verify"];

#[derive(Debug, Parser)]
#[command(name = "qflow", version, about = "Q-function phase-space simulations of quantum measurement")]
pub struct Cli {
    /// RNG seed for stochastic subcommands.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File of `key = value` lines mirroring the long flags; flags on the
    /// command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalue density P(q_m, τ) on a (τ, q_m) grid.
    #[command(allow_negative_numbers = true)]
    EigenDist(EigenDistArgs),
    /// Sampled q(τ), p(τ) and q_m(τ) trajectories for an eigenstate input.
    #[command(allow_negative_numbers = true)]
    Trajectories(TrajectoriesArgs),
    /// Qubit meter density P(σ_m) for a list of gains.
    #[command(allow_negative_numbers = true)]
    SpinDist(SpinDistArgs),
    /// CHSH value B(G): analytic curve and Monte Carlo estimates.
    #[command(allow_negative_numbers = true)]
    Bell(BellArgs),
    /// Compile a Hamiltonian into its Q-function evolution equation.
    #[command(allow_negative_numbers = true)]
    DeriveFpe(DeriveFpeArgs),
    /// Check the coherent-state and spin identities in truncated Fock space.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct EigenDistArgs {
    #[arg(long, default_value_t = 1.0)]
    pub q0: f64,
    /// Initial operator variance of q̂; 0 for an exact eigenstate.
    #[arg(long, default_value_t = 0.0)]
    pub initial_variance: f64,
    #[arg(long, default_value_t = 3.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 30)]
    pub tau_steps: usize,
    #[arg(long, default_value_t = -2.0)]
    pub qm_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub qm_max: f64,
    #[arg(long, default_value_t = 241)]
    pub qm_points: usize,
}

#[derive(Debug, Args)]
pub struct TrajectoriesArgs {
    #[arg(long, default_value_t = 1.0)]
    pub q0: f64,
    #[arg(long, default_value_t = 3.0)]
    pub tau_f: f64,
    #[arg(long, default_value_t = 10)]
    pub n_traj: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
    #[arg(long, default_value_t = Scheme::ExactOU)]
    pub scheme: Scheme,
    /// Keep every n-th grid point.
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
}

#[derive(Debug, Args)]
pub struct SpinDistArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 5.0])]
    pub gains: Vec<f64>,
    /// Probability of spin up in the input state.
    #[arg(long, default_value_t = 0.5)]
    pub p_up: f64,
    #[arg(long, default_value_t = -2.5)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 2.5)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 501)]
    pub sigma_points: usize,
}

#[derive(Debug, Args)]
pub struct BellArgs {
    #[arg(long, default_value_t = 0.2)]
    pub g_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub g_max: f64,
    #[arg(long, default_value_t = 57)]
    pub n_g: usize,
    /// Monte Carlo samples per setting pair; 0 leaves the Monte Carlo columns empty.
    #[arg(long, default_value_t = 100_000)]
    pub n_samples: usize,
    /// Alice's two angles, `θ1,θ2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub theta: Option<Vec<f64>>,
    /// Bob's two angles, `φ1,φ2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub phi: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct DeriveFpeArgs {
    /// Hamiltonian such as `0.5i*adag^2 - 0.5i*a^2`.
    pub hamiltonian: String,
    #[arg(long, default_value_t = QuadratureConvention::OperatorQuadratures)]
    pub convention: QuadratureConvention,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 30)]
    pub dim: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compile(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Usage(_) => 3,
            CliError::Compile(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        out.push((key, v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Splice config entries into `args` right after the subcommand, skipping
/// keys already given as flags.
fn apply_config(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(usage("--config requires a path"));
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone().into(), source })?;
    let entries = parse_config(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    let given = |key: &str| {
        let flag = format!("--{key}");
        args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let injected: Vec<String> =
        entries.iter().filter(|(k, _)| !given(k)).map(|(k, v)| format!("--{k}={v}")).collect();
    let at = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())).map_or(args.len(), |i| i + 1);
    args.splice(at..at, injected);
    Ok(args)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| usage(format!("QFLOW_THREADS must be an integer, got '{v}'")))?;
    if n > 0 {
        // Fails only if a pool already exists, e.g. in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Result<Vec<String>, _> = args.into_iter().map(|a| a.into().into_string()).collect();
    let args = args.map_err(|_| usage("arguments must be valid UTF-8")).and_then(apply_config);
    let result = match args {
        Ok(args) => match Cli::try_parse_from(args) {
            Ok(cli) => configure_threads().and_then(|_| execute(&cli)),
            Err(e) => {
                let _ = e.print();
                return if e.use_stderr() { 3 } else { 0 };
            }
        },
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qflow: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::EigenDist(a) => eigen_dist(cli, a),
        Command::Trajectories(a) => trajectories(cli, a),
        Command::SpinDist(a) => spin_dist(cli, a),
        Command::Bell(a) => bell_curve(cli, a),
        Command::DeriveFpe(a) => derive_fpe(cli, a),
        Command::Verify(a) => verify(cli, a),
    }
}

fn emit(cli: &Cli, table: &Table, meta: &Metadata) -> Result<(), CliError> {
    output::write_table(table, meta, cli.format, cli.output.as_deref()).map_err(|(path, source)| CliError::Io { path, source })
}

fn convention_note(c: QuadratureConvention) -> String {
    match c {
        QuadratureConvention::OperatorQuadratures => {
            "q = α + α*, p = (α − α*)/i; vacuum Q-variance 2; x = q/2, variances scale by 1/4".into()
        }
        QuadratureConvention::AmplitudeParts => {
            "x = Re α, y = Im α; vacuum Q-variance 1/2; q = 2x, variances scale by 4".into()
        }
    }
}

fn with_convention(mut meta: Metadata, c: QuadratureConvention) -> Metadata {
    meta.convention = Some(c.as_str().into());
    meta.convention_note = Some(convention_note(c));
    meta
}

pub fn eigen_dist(cli: &Cli, a: &EigenDistArgs) -> Result<(), CliError> {
    if a.qm_points < 2 || a.qm_min >= a.qm_max {
        return Err(usage("q_m grid needs qm_min < qm_max and at least 2 points"));
    }
    let taus = if a.tau_steps == 0 { vec![0.0] } else { TimeGrid::new(0.0, a.tau_max, a.tau_steps).map_err(usage)?.times().collect() };
    let grid = linspace(a.qm_min, a.qm_max, a.qm_points);
    let mut table = Table::new(["tau", "q_m", "density"]);
    for &tau in &taus {
        let r = measurement::continuous_measurement(a.q0, a.initial_variance, tau).map_err(usage)?;
        for &q in &grid {
            table.push(vec![tau.into(), q.into(), r.q_m_distribution.pdf(q).into()]);
        }
    }
    let meta = Metadata::new(
        "eigen_dist",
        json!({
            "q0": a.q0, "initial_variance": a.initial_variance, "tau_max": a.tau_max,
            "tau_steps": a.tau_steps, "qm_min": a.qm_min, "qm_max": a.qm_max, "qm_points": a.qm_points,
        }),
    );
    emit(cli, &table, &with_convention(meta, CONTINUOUS_CONVENTION))
}

pub fn trajectories(cli: &Cli, a: &TrajectoriesArgs) -> Result<(), CliError> {
    let pde = compile_text(AMPLIFIER_HAMILTONIAN, CONTINUOUS_CONVENTION).map_err(|e| CliError::Compile(e.to_string()))?;
    let grid = TimeGrid::with_step(0.0, a.tau_f, a.dtau).map_err(usage)?;
    let config = SimulationConfig::new(grid, a.n_traj, cli.seed, a.scheme).record_every(a.record_every);
    let bc = BoundarySpec::eigenstate_measurement(a.q0, a.tau_f);
    let ens = dynamics::simulate(&pde, &bc, &config).map_err(usage)?;
    let (iq, ip) = (ens.coordinate_index("q").expect("q"), ens.coordinate_index("p").expect("p"));
    let qm = dynamics::measured_value_paths(&ens, iq);
    let times = ens.record_times();
    let mut table = Table::new(["tau", "traj_id", "q", "p", "q_m"]);
    for t in 0..ens.n_traj() {
        for (r, &tau) in times.iter().enumerate() {
            table.push(vec![
                tau.into(),
                t.into(),
                ens.value(t, r, iq).into(),
                ens.value(t, r, ip).into(),
                qm[t][r].into(),
            ]);
        }
    }
    let mut meta = Metadata::new(
        "trajectories",
        json!({
            "q0": a.q0, "tau_f": a.tau_f, "n_traj": a.n_traj, "record_every": a.record_every,
            "grid": { "tau_0": grid.tau_0(), "tau_f": grid.tau_f(), "dtau": grid.dtau(), "n_steps": grid.n_steps() },
            "hamiltonian": AMPLIFIER_HAMILTONIAN,
        }),
    );
    meta.seed = Some(cli.seed);
    meta.scheme = Some(a.scheme.as_str().into());
    emit(cli, &table, &with_convention(meta, CONTINUOUS_CONVENTION))
}

pub fn spin_dist(cli: &Cli, a: &SpinDistArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.p_up) {
        return Err(usage(format!("p_up must lie in [0, 1], got {}", a.p_up)));
    }
    if a.sigma_points < 2 || a.sigma_min >= a.sigma_max {
        return Err(usage("σ_m grid needs sigma_min < sigma_max and at least 2 points"));
    }
    let spin = SpinState::new(Complex64::from(a.p_up.sqrt()), Complex64::from((1.0 - a.p_up).sqrt())).map_err(usage)?;
    let grid = linspace(a.sigma_min, a.sigma_max, a.sigma_points);
    let mut table = Table::new(["G", "sigma_m", "density"]);
    for &g in &a.gains {
        let r = measurement::qubit_measurement(spin, g).map_err(usage)?;
        for &s in &grid {
            table.push(vec![g.into(), s.into(), r.sigma_m_distribution.pdf(s).into()]);
        }
    }
    let meta = Metadata::new(
        "spin_dist",
        json!({
            "gains": a.gains, "p_up": a.p_up, "sigma_min": a.sigma_min,
            "sigma_max": a.sigma_max, "sigma_points": a.sigma_points,
        }),
    );
    emit(cli, &table, &with_convention(meta, SPIN_CONVENTION))
}

pub fn bell_curve(cli: &Cli, a: &BellArgs) -> Result<(), CliError> {
    let default = bell::optimal_angles();
    let pair = |v: &Option<Vec<f64>>, d: [f64; 2]| v.as_ref().map_or(d, |x| [x[0], x[1]]);
    let angles = ChshAngles::new(pair(&a.theta, default.theta), pair(&a.phi, default.phi)).map_err(usage)?;
    if a.n_g == 0 || !(a.g_min > 0.0 && a.g_min <= a.g_max) {
        return Err(usage("gain sweep needs 0 < g_min ≤ g_max and n_g ≥ 1"));
    }
    let gains = if a.n_g == 1 { vec![a.g_min] } else { linspace(a.g_min, a.g_max, a.n_g) };
    let mut table = Table::new(["G", "B_analytic", "B_mc", "stderr"]);
    for &g in &gains {
        let analytic = bell::chsh_analytic(g, &angles).b;
        let (mc, se) = if a.n_samples == 0 {
            (None, None)
        } else {
            let r = bell::chsh_monte_carlo(&ChshSettings::new(angles, g, a.n_samples, cli.seed).map_err(usage)?);
            (Some(r.b), Some(r.stderr))
        };
        table.push(vec![g.into(), analytic.into(), mc.into(), se.into()]);
    }
    let mut meta = Metadata::new(
        "bell",
        json!({
            "g_min": a.g_min, "g_max": a.g_max, "n_g": a.n_g, "n_samples": a.n_samples,
            "theta": angles.theta, "phi": angles.phi,
            "violation_threshold": bell::violation_threshold(1e-12),
        }),
    );
    meta.seed = (a.n_samples > 0).then_some(cli.seed);
    meta.scheme = (a.n_samples > 0).then(|| "monte_carlo".into());
    emit(cli, &table, &with_convention(meta, SPIN_CONVENTION))
}

pub fn derive_fpe(cli: &Cli, a: &DeriveFpeArgs) -> Result<(), CliError> {
    let pde = compile_text(&a.hamiltonian, a.convention).map_err(|e| match e {
        CompileError::Parse(p) => CliError::Usage(p.to_string()),
        CompileError::Fpe(f) => CliError::Compile(f.to_string()),
    })?;
    let mut text = match cli.format {
        Format::Csv => format!("{}\n\n{}", pde.pretty(), pde.to_json()),
        Format::Json => pde.to_json(),
    };
    text.push('\n');
    write_text(cli.output.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn verify(cli: &Cli, a: &VerifyArgs) -> Result<(), CliError> {
    if a.dim < 4 {
        return Err(usage("dim must be at least 4"));
    }
    let points = fock_oracle::suite_points(a.points, cli.seed);
    let checks = fock_oracle::identity_suite(&points, a.dim);
    let mut table = Table::new(["identity", "re", "im", "error"]);
    let mut lines = String::new();
    for c in &checks {
        let ok = c.error < a.tolerance;
        lines.push_str(&format!(
            "{} {:<10} at ({:+.6}, {:+.6}): {:.3e}\n",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.point.re,
            c.point.im,
            c.error
        ));
        table.push(vec![Cell::Int(identity_code(&c.name)), c.point.re.into(), c.point.im.into(), c.error.into()]);
    }
    let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    let failed = checks.iter().filter(|c| c.error >= a.tolerance).count();
    lines.push_str(&format!("{} checks, {failed} failed, max error {worst:.3e}\n", checks.len()));
    match &cli.output {
        Some(_) => {
            let mut meta = Metadata::new(
                "verify",
                json!({ "dim": a.dim, "tolerance": a.tolerance, "points": a.points, "identities": IDENTITY_NAMES }),
            );
            meta.seed = Some(cli.seed);
            emit(cli, &table, &meta)?;
            eprint!("{lines}");
        }
        None => print!("{lines}"),
    }
    if failed > 0 {
        return Err(CliError::Tolerance(format!("{failed} identity checks exceed tolerance {:e}", a.tolerance)));
    }
    Ok(())
}

const IDENTITY_NAMES: [&str; 7] = ["a", "a_dagger", "right_a", "right_a_dagger", "spin_z", "log_spin_z", "log_number"];

fn identity_code(name: &str) -> i64 {
    IDENTITY_NAMES.iter().position(|n| *n == name).map_or(-1, |i| i as i64)
}
