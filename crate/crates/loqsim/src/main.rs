//! Command line front end: run circuit files, execute the concentration
//! protocol, sweep θ, study double-pair contamination, and cross-check the
//! engine against the permanent oracle.
//!
//! Exit codes: 0 success, 2 parse/validation/usage error, 3 runtime error.
//! `LOC_THREADS` caps the worker count for sweeps and oracle checks.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use loqsim::dsl;
use loqsim::elements::apply_circuit;
use loqsim::fock::{FockBasisVector, ModeId, Polarization, PureState};
use loqsim::measure::{BellKind, Semantics};
use loqsim::oracle::oracle_state;
use loqsim::protocol::{
    contamination_run, execute_ir, run as run_protocol, sweep, ContaminationScenario,
    MeasurementBasis, ProtocolConfig,
};
use loqsim::report::{
    sha256_hex, to_json_bytes, ContaminateReport, OracleCheckReport, ProtocolReport, RunReport,
    SweepReport, SweepRow, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "loqsim",
    version,
    about = "Linear optical circuit simulator and entanglement-concentration protocol runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Strict,
    Relaxed,
}

impl From<SemanticsArg> for Semantics {
    fn from(value: SemanticsArg) -> Self {
        match value {
            SemanticsArg::Strict => Semantics::Strict,
            SemanticsArg::Relaxed => Semantics::Relaxed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a .loc circuit file and report probabilities and fidelities.
    Run {
        circuit: PathBuf,
        /// Override every source's theta (radians unless --degrees).
        #[arg(long)]
        theta: Option<f64>,
        /// Interpret angles as degrees.
        #[arg(long)]
        degrees: bool,
        #[arg(long, value_enum, default_value = "strict")]
        semantics: SemanticsArg,
        /// Include wall-clock timing in the report (breaks byte-determinism).
        #[arg(long)]
        timing: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in concentration protocol without a circuit file.
    Protocol {
        /// Input family: phi+, phi-, psi+ or psi-.
        #[arg(long)]
        input: String,
        /// Theta in radians unless --degrees.
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        degrees: bool,
        /// Measurement basis: HV, DA or RL.
        #[arg(long, default_value = "HV")]
        basis: String,
        #[arg(long, value_enum, default_value = "strict")]
        semantics: SemanticsArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep theta over a grid and emit CSV or JSON rows.
    Sweep {
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "HV")]
        basis: String,
        #[arg(long)]
        theta_start: f64,
        #[arg(long)]
        theta_end: f64,
        /// Number of grid points (at least 2).
        #[arg(long)]
        steps: usize,
        /// Output format.
        #[arg(long, value_enum, default_value = "csv")]
        out: OutputFormat,
        #[arg(long)]
        degrees: bool,
    },
    /// Mix nominal and double-pair source branches and report fidelities.
    Contaminate {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        w_nominal: f64,
        #[arg(long)]
        w_double_a: f64,
        #[arg(long)]
        w_double_b: f64,
        #[arg(long)]
        degrees: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the rewrite engine against the permanent oracle on random
    /// inputs to a circuit.
    OracleCheck {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("LOC_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }

    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(message)) => {
            eprintln!("{message}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("{message}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(CliError::CheckFailed(message)) => {
            eprintln!("{message}");
            ExitCode::FAILURE
        }
    }
}

enum CliError {
    /// Bad file or flags: exit 2.
    Input(String),
    /// Failure while executing: exit 3.
    Runtime(String),
    /// oracle-check exceeded tolerance: exit 1.
    CheckFailed(String),
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            circuit,
            theta,
            degrees,
            semantics,
            timing,
            out,
        } => cmd_run(&circuit, theta, degrees, semantics.into(), timing, out),
        Command::Protocol {
            input,
            theta,
            degrees,
            basis,
            semantics,
            out,
        } => cmd_protocol(&input, theta, degrees, &basis, semantics.into(), out),
        Command::Sweep {
            input,
            basis,
            theta_start,
            theta_end,
            steps,
            out,
            degrees,
        } => cmd_sweep(&input, &basis, theta_start, theta_end, steps, out, degrees),
        Command::Contaminate {
            theta,
            w_nominal,
            w_double_a,
            w_double_b,
            degrees,
            out,
        } => cmd_contaminate(theta, w_nominal, w_double_a, w_double_b, degrees, out),
        Command::OracleCheck {
            circuit,
            cases,
            tolerance,
            seed,
        } => cmd_oracle_check(&circuit, cases, tolerance, seed),
    }
}

fn to_radians(value: f64, degrees: bool) -> f64 {
    if degrees {
        value.to_radians()
    } else {
        value
    }
}

fn parse_kind(s: &str) -> Result<BellKind, CliError> {
    BellKind::from_keyword(s).ok_or_else(|| {
        CliError::Input(format!(
            "unknown input kind '{s}' (expected phi+, phi-, psi+ or psi-)"
        ))
    })
}

fn parse_basis(s: &str) -> Result<MeasurementBasis, CliError> {
    MeasurementBasis::from_keyword(s)
        .ok_or_else(|| CliError::Input(format!("unknown basis '{s}' (expected HV, DA or RL)")))
}

fn load_circuit(path: &PathBuf) -> Result<(String, dsl::CircuitIR), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    match dsl::load(&text) {
        Ok(ir) => Ok((text, ir)),
        Err(diagnostics) => {
            let mut message = String::new();
            for d in &diagnostics {
                message.push_str(&format!("{}:{d}\n", path.display()));
            }
            message.pop();
            Err(CliError::Input(message))
        }
    }
}

fn emit(bytes: &[u8], out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Runtime(e.to_string()))
        }
        Some(path) => std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
    }
}

fn cmd_run(
    circuit: &PathBuf,
    theta: Option<f64>,
    degrees: bool,
    semantics: Semantics,
    timing: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (text, ir) = load_circuit(circuit)?;
    let theta_override = theta.map(|t| to_radians(t, degrees));
    let started = Instant::now();
    let run =
        execute_ir(&ir, semantics, theta_override).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut report = RunReport::from_run(&run, &text, semantics, theta_override);
    if timing {
        report.timing_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    emit(&to_json_bytes(&report), out)
}

fn cmd_protocol(
    input: &str,
    theta: f64,
    degrees: bool,
    basis: &str,
    semantics: Semantics,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let config = ProtocolConfig::new(parse_kind(input)?, to_radians(theta, degrees))
        .with_basis(parse_basis(basis)?)
        .with_semantics(semantics);
    let result = run_protocol(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = ProtocolReport {
        protocol: result,
        schema_version: SCHEMA_VERSION.to_string(),
    };
    emit(&to_json_bytes(&report), out)
}

fn cmd_sweep(
    input: &str,
    basis: &str,
    theta_start: f64,
    theta_end: f64,
    steps: usize,
    out: OutputFormat,
    degrees: bool,
) -> Result<(), CliError> {
    if steps < 2 {
        return Err(CliError::Input(format!(
            "--steps must be at least 2, got {steps}"
        )));
    }
    let kind = parse_kind(input)?;
    let basis = parse_basis(basis)?;
    let start = to_radians(theta_start, degrees);
    let end = to_radians(theta_end, degrees);
    if !(start.is_finite() && end.is_finite()) || end < start {
        return Err(CliError::Input(format!(
            "invalid theta range [{theta_start}, {theta_end}]"
        )));
    }
    let thetas: Vec<f64> = (0..steps)
        .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
        .collect();
    let results = sweep(kind, &thetas, basis).map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<SweepRow> = results.iter().map(SweepRow::from_result).collect();

    match out {
        OutputFormat::Csv => {
            let mut text = String::from(SweepRow::csv_header());
            text.push('\n');
            for row in &rows {
                text.push_str(&row.csv_line());
                text.push('\n');
            }
            emit(text.as_bytes(), None)
        }
        OutputFormat::Json => {
            let report = SweepReport {
                rows,
                schema_version: SCHEMA_VERSION.to_string(),
            };
            emit(&to_json_bytes(&report), None)
        }
    }
}

fn cmd_contaminate(
    theta: f64,
    w_nominal: f64,
    w_double_a: f64,
    w_double_b: f64,
    degrees: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let scenario = ContaminationScenario::new(
        to_radians(theta, degrees),
        w_nominal,
        w_double_a,
        w_double_b,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let result = contamination_run(&scenario).map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = ContaminateReport {
        contamination: result,
        schema_version: SCHEMA_VERSION.to_string(),
    };
    emit(&to_json_bytes(&report), out)
}

/// Random input state on a circuit's source modes: 1-3 terms, up to 4
/// photons each, deterministic per (seed, case).
fn random_input(ir: &dsl::CircuitIR, seed: u64, case: usize) -> Result<PureState, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (case as u64).wrapping_mul(0x9e37_79b9));
    let mut source_modes: Vec<ModeId> = Vec::new();
    for s in &ir.sources {
        for spatial in [&s.modes.0, &s.modes.1] {
            for pol in [Polarization::H, Polarization::V] {
                source_modes.push(ModeId::new(spatial, pol));
            }
        }
    }
    if source_modes.is_empty() {
        return Err(CliError::Input(
            "circuit has no sources to feed random states into".into(),
        ));
    }

    let spatials = ir.spatials();
    let refs: Vec<&str> = spatials.iter().map(String::as_str).collect();
    let universe = loqsim::fock::mode_set(&refs);

    let n_terms = rng.gen_range(1..=3usize);
    let mut terms = Vec::new();
    for _ in 0..n_terms {
        let photons = rng.gen_range(0..=4u32);
        let occupations: Vec<(ModeId, u8)> = (0..photons)
            .map(|_| {
                (
                    source_modes[rng.gen_range(0..source_modes.len())].clone(),
                    1,
                )
            })
            .collect();
        let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        terms.push((FockBasisVector::from_occupations(occupations), amp));
    }
    let state = PureState::from_terms(universe.clone(), terms)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    match state.normalize() {
        Ok(normalized) => Ok(normalized),
        // All amplitudes cancelled; fall back to vacuum.
        Err(_) => PureState::vacuum(universe).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn cmd_oracle_check(
    circuit: &PathBuf,
    cases: usize,
    tolerance: f64,
    seed: u64,
) -> Result<(), CliError> {
    if tolerance < 1e-12 {
        return Err(CliError::Input(format!(
            "--tolerance must be at least 1e-12, got {tolerance}"
        )));
    }
    let (text, ir) = load_circuit(circuit)?;
    let elements = ir.element_list();

    let deviations: Result<Vec<f64>, CliError> = (0..cases)
        .into_par_iter()
        .map(|case| {
            let input = random_input(&ir, seed, case)?;
            let engine = apply_circuit(&input, &elements)
                .map_err(|e| CliError::Runtime(format!("case {case}: {e}")))?;
            let oracle = oracle_state(&input, &elements)
                .map_err(|e| CliError::Runtime(format!("case {case}: {e}")))?;
            let keys: std::collections::BTreeSet<FockBasisVector> = engine
                .terms()
                .map(|(b, _)| b.clone())
                .chain(oracle.terms().map(|(b, _)| b.clone()))
                .collect();
            let worst = keys
                .iter()
                .map(|k| (engine.amplitude(k) - oracle.amplitude(k)).norm())
                .fold(0.0, f64::max);
            Ok(worst)
        })
        .collect();

    let max_deviation = deviations?.into_iter().fold(0.0, f64::max);
    let passed = max_deviation <= tolerance;
    let report = OracleCheckReport {
        cases,
        circuit_sha256: sha256_hex(text.as_bytes()),
        max_deviation,
        passed,
        schema_version: SCHEMA_VERSION.to_string(),
        seed,
        tolerance,
    };
    emit(&to_json_bytes(&report), None)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "engine/oracle deviation {max_deviation:.3e} exceeds tolerance {tolerance:.3e}"
        )))
    }
}
