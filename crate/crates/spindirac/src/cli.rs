//! Command-line front end. Every subcommand writes `<out>/<command>.json`
//! (`{schema_version, config, results, diagnostics, provenance}`), CSV tables
//! and a gnuplot script next to it.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conformal_opt::{self, OptConfig, StepPolicy, TorusVerificationSpec};
use crate::cpn_harmonic::{self as cpn, ClosedFormMap, EigenspinorMap, HomogeneousMap, Surface, VeroneseTolerances};
use crate::dirac_sphere::{self, BarSweepSpec, SphereConformalFactor};
use crate::dirac_torus::{self, FourierField};
use crate::error::Error;
use crate::exact_spectrum::{self, SpectrumReport};
use crate::lattice_spin::{validate_moduli, TorusGeometry};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_VAR: &str = "SPINDIRAC_THREADS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "spindirac", version, about = "Spectra of Dirac operators on conformal tori and spheres")]
pub struct Cli {
    /// Output directory for JSON, CSV and plot files.
    #[arg(long, global = true, default_value = "spindirac-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact spectrum of a flat torus or the round sphere.
    Spectrum(SpectrumArgs),
    /// Discretized spectrum of a conformal metric.
    Discretize(DiscretizeArgs),
    /// Descent on the normalized first eigenvalue over a torus conformal class.
    Optimize(OptimizeArgs),
    /// Random sweep of conformal factors on the sphere against the lower bound 2√π.
    VerifyBar(BarArgs),
    /// Check that descent from random perturbations returns to the flat metric.
    VerifyTorus(TorusArgs),
    /// Veronese quaternionic harmonic maps battery.
    Veronese(VeroneseArgs),
    /// Energies, degree and residuals of a named map.
    Energy(EnergyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    /// Torus moduli `a b`.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub torus: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "torus")]
    pub sphere: bool,
    /// Spin character `χ₁ χ₂`.
    #[arg(long, num_args = 2, value_names = ["C1", "C2"], default_values_t = [0u8, 0u8])]
    pub spin: Vec<u8>,
    /// Number of positive levels.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DiscretizeArgs {
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub torus: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "torus")]
    pub sphere: bool,
    #[arg(long, num_args = 2, value_names = ["C1", "C2"], default_values_t = [0u8, 0u8])]
    pub spin: Vec<u8>,
    /// Plane-wave cutoff `|ξ| ≤ cutoff` (torus).
    #[arg(long, default_value_t = 3.0)]
    pub cutoff: f64,
    /// Largest `j` of the spinor harmonics (sphere), a half-integer.
    #[arg(long, default_value_t = 7.5)]
    pub jmax: f64,
    /// Torus cosine mode `m1,m2,amplitude` (repeatable).
    #[arg(long = "cos", allow_hyphen_values = true)]
    pub cos_modes: Vec<String>,
    /// Torus sine mode `m1,m2,amplitude` (repeatable).
    #[arg(long = "sin", allow_hyphen_values = true)]
    pub sin_modes: Vec<String>,
    /// Sphere real harmonic `l,m,c` (repeatable).
    #[arg(long = "harmonic", allow_hyphen_values = true)]
    pub harmonics: Vec<String>,
    /// Random factor `band,amplitude` drawn from `--seed`.
    #[arg(long)]
    pub random: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of positive levels reported.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long, num_args = 2, value_names = ["C1", "C2"], default_values_t = [0u8, 0u8])]
    pub spin: Vec<u8>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub band: i64,
    /// Sup norm of the random starting factor.
    #[arg(long, default_value_t = 0.05)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Explicit starting cosine mode `m1,m2,amplitude` (repeatable; replaces the random start).
    #[arg(long = "cos", allow_hyphen_values = true)]
    pub cos_modes: Vec<String>,
    #[arg(long = "sin", allow_hyphen_values = true)]
    pub sin_modes: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BarArgs {
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub band: i64,
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 7.5)]
    pub jmax: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TorusArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long, num_args = 2, value_names = ["C1", "C2"], default_values_t = [0u8, 0u8])]
    pub spin: Vec<u8>,
    #[arg(long, default_value_t = 20)]
    pub perturbations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub band: i64,
    #[arg(long, default_value_t = 0.05)]
    pub amplitude: f64,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VeroneseArgs {
    /// Run `m = 1 ..= max-m`.
    #[arg(long, default_value_t = 3)]
    pub max_m: usize,
    #[arg(long, default_value_t = 48)]
    pub n_theta: usize,
    #[arg(long, default_value_t = 64)]
    pub n_phi: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EnergyArgs {
    /// One of `z^K`, `zbar^K`, `veronese:M`, `circle:K1,K2`, `theta:K`, `thetabar:K`, `eigen`.
    #[arg(long)]
    pub map: String,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub torus: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["C1", "C2"], default_values_t = [0u8, 0u8])]
    pub spin: Vec<u8>,
    /// Torus grid per direction.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 48)]
    pub n_theta: usize,
    #[arg(long, default_value_t = 64)]
    pub n_phi: usize,
}

/// Result of one subcommand before serialization.
struct Outcome {
    command: &'static str,
    config: Value,
    results: Value,
    diagnostics: Value,
    tables: Vec<Table>,
    plot: Option<String>,
    verdict: Verdict,
    summary: Vec<String>,
}

struct Table {
    name: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Verdict {
    Pass,
    Fail,
    Exploratory,
    Report,
}

#[derive(Serialize)]
struct Document<'a> {
    schema_version: u32,
    config: &'a Value,
    results: &'a Value,
    diagnostics: &'a Value,
    provenance: Value,
}

fn provenance() -> Value {
    json!({
        "toolkit": "spindirac",
        "version": env!("CARGO_PKG_VERSION"),
        "rng": "ChaCha8",
    })
}

#[derive(Serialize)]
struct Eigenvalue {
    value: f64,
    complex_mult: usize,
    quaternionic_mult: usize,
}

fn eigenvalues(report: &SpectrumReport) -> Vec<Eigenvalue> {
    report
        .entries
        .iter()
        .map(|e| Eigenvalue {
            value: e.value,
            complex_mult: e.complex_multiplicity,
            quaternionic_mult: e.quaternionic_multiplicity,
        })
        .collect()
}

/// Write `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn error_kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(['{', '(', ' ']).next().unwrap_or("Error").to_string()
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::SolverFailure(_)
        | Error::AliasingRisk { .. }
        | Error::QuadratureInsufficient { .. }
        | Error::QuadratureUnresolved { .. }
        | Error::NotAnEigenspinor { .. }
        | Error::ZeroEigenvalue => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn error_record(kind: &str, message: &str, code: i32) -> String {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": kind, "message": message },
        "exit_code": code,
    })
    .to_string()
}

fn configure_threads() -> Result<(), String> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_VAR} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err(format!("{THREADS_VAR} must be positive"));
            }
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Parse arguments, run, write artifacts and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_PASS;
            }
            eprintln!("{}", error_record("Usage", &e.to_string(), EXIT_INPUT));
            return EXIT_INPUT;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("{}", error_record("InvalidInput", &msg, EXIT_INPUT));
        return EXIT_INPUT;
    }
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            let code = exit_code_for(&e);
            eprintln!("{}", error_record(&error_kind(&e), &e.to_string(), code));
            return code;
        }
    };
    if let Err(e) = emit(&cli.out, &outcome) {
        eprintln!("{}", error_record("Io", &e.to_string(), EXIT_INPUT));
        return EXIT_INPUT;
    }
    for line in &outcome.summary {
        println!("{line}");
    }
    match outcome.verdict {
        Verdict::Fail => EXIT_ASSERTION,
        _ => EXIT_PASS,
    }
}

/// Serialize a finished outcome; identical inputs give identical bytes.
fn emit(out: &Path, o: &Outcome) -> std::io::Result<()> {
    let mut results = o.results.clone();
    if let Value::Object(map) = &mut results {
        map.insert("verdict".into(), serde_json::to_value(o.verdict).expect("verdict serializes"));
    }
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        config: &o.config,
        results: &results,
        diagnostics: &o.diagnostics,
        provenance: provenance(),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(&out.join(format!("{}.json", o.command)), text.as_bytes())?;
    for t in &o.tables {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("schema_version").chain(t.header.iter().copied()))?;
        for row in &t.rows {
            w.write_record(std::iter::once(SCHEMA_VERSION.to_string()).chain(row.iter().cloned()))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        write_atomic(&out.join(format!("{}.csv", t.name)), &bytes)?;
    }
    if let Some(plot) = &o.plot {
        write_atomic(&out.join(format!("{}.gp", o.command)), plot.as_bytes())?;
    }
    Ok(())
}

fn plot_script(title: &str, csv: &str, xlabel: &str, ylabel: &str, columns: &[(usize, usize, &str)]) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script; run from the output directory\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    let parts: Vec<String> =
        columns.iter().map(|(x, y, style)| format!("'{csv}.csv' using {x}:{y} with {style}")).collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

fn f(x: f64) -> String {
    format!("{x:.17e}")
}

fn torus_from(ab: &[f64], spin: &[u8]) -> Result<TorusGeometry, Error> {
    let geometry = TorusGeometry::from_parts(ab[0], ab[1], spin[0], spin[1])?;
    let check = validate_moduli(&geometry);
    if !check.valid {
        return Err(Error::InvalidInput(check.diagnostic));
    }
    Ok(geometry)
}

fn parse_triple(s: &str) -> Result<(i64, i64, f64), Error> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::InvalidInput(format!("expected `i,j,value`, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn parse_pair(s: &str) -> Result<(i64, f64), Error> {
    let bad = || Error::InvalidInput(format!("expected `band,amplitude`, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn torus_field(geometry: &TorusGeometry, cos: &[String], sin: &[String]) -> Result<FourierField, Error> {
    let mut w = FourierField::zero(geometry);
    for c in cos {
        let (m1, m2, a) = parse_triple(c)?;
        w = w.axpy(1.0, &FourierField::cos_mode(geometry, (m1, m2), a));
    }
    for c in sin {
        let (m1, m2, a) = parse_triple(c)?;
        w = w.axpy(1.0, &FourierField::sin_mode(geometry, (m1, m2), a));
    }
    Ok(w)
}

fn jmax2(jmax: f64) -> Result<i64, Error> {
    let j2 = (2.0 * jmax).round();
    if (2.0 * jmax - j2).abs() > 1e-9 || j2 < 1.0 || j2 as i64 % 2 == 0 {
        return Err(Error::InvalidInput(format!("jmax must be a positive half-integer, got {jmax}")));
    }
    Ok(j2 as i64)
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn execute(command: &Command) -> Result<Outcome, Error> {
    match command {
        Command::Spectrum(a) => spectrum(a),
        Command::Discretize(a) => discretize(a),
        Command::Optimize(a) => optimize(a),
        Command::VerifyBar(a) => verify_bar(a),
        Command::VerifyTorus(a) => verify_torus(a),
        Command::Veronese(a) => veronese(a),
        Command::Energy(a) => energy(a),
    }
}

fn spectrum_table(name: &str, report: &SpectrumReport) -> Table {
    Table {
        name: name.into(),
        header: vec!["value", "complex_mult", "quaternionic_mult"],
        rows: report
            .entries
            .iter()
            .map(|e| vec![f(e.value), e.complex_multiplicity.to_string(), e.quaternionic_multiplicity.to_string()])
            .collect(),
    }
}

fn spectrum(a: &SpectrumArgs) -> Result<Outcome, Error> {
    let report = match (&a.torus, a.sphere) {
        (Some(ab), _) => exact_spectrum::torus_spectrum(&torus_from(ab, &a.spin)?, a.count)?,
        (None, true) => exact_spectrum::sphere_spectrum(a.count)?,
        (None, false) => return Err(Error::InvalidInput("one of --torus A B or --sphere is required".into())),
    };
    let first = report.first_positive().ok_or(Error::ZeroEigenvalue)?;
    let lambda_bar = first * report.area.sqrt();
    Ok(Outcome {
        command: "spectrum",
        config: json!({ "command": "spectrum", "args": to_value(a) }),
        results: json!({
            "eigenvalues": eigenvalues(&report),
            "lambda_1": first,
            "lambda_bar_1": lambda_bar,
            "area": report.area,
            "kernel_quaternionic_dim": report.kernel_quaternionic_dim,
        }),
        diagnostics: json!({ "level_tolerance": exact_spectrum::LEVEL_TOLERANCE }),
        tables: vec![spectrum_table("spectrum", &report)],
        plot: Some(plot_script("spectrum", "spectrum", "eigenvalue", "quaternionic multiplicity", &[(2, 4, "impulses")])),
        verdict: Verdict::Report,
        summary: vec![format!("lambda_1 = {first:.12}  lambda_bar_1 = {lambda_bar:.12}")],
    })
}

fn truncate_report(report: &SpectrumReport, count: usize) -> SpectrumReport {
    let mut r = report.clone();
    let mut seen = 0;
    r.entries.retain(|e| {
        if e.value > 0.0 {
            seen += 1;
            seen <= count
        } else {
            true
        }
    });
    let kept_max = r.entries.iter().filter(|e| e.value > 0.0).map(|e| e.value).fold(0.0, f64::max);
    r.entries.retain(|e| e.value >= -kept_max - 1e-12);
    r
}

fn discretize(a: &DiscretizeArgs) -> Result<Outcome, Error> {
    let (report, lambda_bar, area, extra) = match (&a.torus, a.sphere) {
        (Some(ab), _) => {
            let g = torus_from(ab, &a.spin)?;
            let w = match &a.random {
                Some(r) => {
                    let (band, amp) = parse_pair(r)?;
                    conformal_opt::random_field(&g, band, amp, &mut ChaCha8Rng::seed_from_u64(a.seed))?
                }
                None => torus_field(&g, &a.cos_modes, &a.sin_modes)?,
            };
            let s = dirac_torus::solve_conformal(&g, &w, a.cutoff)?;
            let lb = s.lambda_bar()?;
            let extra = json!({
                "basis_size": s.dirac.basis.len(),
                "trusted_below": s.trusted_below,
                "omega_variance": w.variance(),
            });
            (s.report.clone(), lb, s.area, extra)
        }
        (None, true) => {
            let mut w = SphereConformalFactor::zero();
            for h in &a.harmonics {
                let (l, m, c) = parse_triple(h)?;
                w = w.add(&SphereConformalFactor::harmonic(l, m, c));
            }
            if let Some(r) = &a.random {
                let (band, amp) = parse_pair(r)?;
                w = SphereConformalFactor::random(band, amp, &mut ChaCha8Rng::seed_from_u64(a.seed));
            }
            let s = dirac_sphere::solve_conformal_sphere(&w, jmax2(a.jmax)?)?;
            let extra = json!({ "basis_size": s.values.len(), "omega_variance": w.variance() });
            (s.report.clone(), s.lambda_bar, s.area, extra)
        }
        (None, false) => return Err(Error::InvalidInput("one of --torus A B or --sphere is required".into())),
    };
    let shown = truncate_report(&report, a.count);
    Ok(Outcome {
        command: "discretize",
        config: json!({ "command": "discretize", "args": to_value(a) }),
        results: json!({
            "eigenvalues": eigenvalues(&shown),
            "lambda_bar_1": lambda_bar,
            "area": area,
            "kernel_quaternionic_dim": report.kernel_quaternionic_dim,
        }),
        diagnostics: json!({
            "cluster_tolerance": dirac_torus::CLUSTER_TOLERANCE,
            "kernel_tolerance": dirac_torus::KERNEL_TOLERANCE,
            "discretization": extra,
        }),
        tables: vec![spectrum_table("discretize", &shown)],
        plot: Some(plot_script("discretized spectrum", "discretize", "eigenvalue", "quaternionic multiplicity", &[(2, 4, "impulses")])),
        verdict: Verdict::Report,
        summary: vec![format!("lambda_bar_1 = {lambda_bar:.12}")],
    })
}

fn trace_rows(run: Option<usize>, trace: &[conformal_opt::TraceEntry]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|e| {
            let mut row = Vec::new();
            if let Some(r) = run {
                row.push(r.to_string());
            }
            row.extend([e.iteration.to_string(), f(e.lambda_bar), f(e.area), f(e.gradient_norm), f(e.variance)]);
            row
        })
        .collect()
}

fn optimize(a: &OptimizeArgs) -> Result<Outcome, Error> {
    let g = torus_from(&[a.a, a.b], &a.spin)?;
    let w0 = if a.cos_modes.is_empty() && a.sin_modes.is_empty() {
        conformal_opt::random_field(&g, a.band, a.amplitude, &mut ChaCha8Rng::seed_from_u64(a.seed))?
    } else {
        torus_field(&g, &a.cos_modes, &a.sin_modes)?
    };
    let (flat, b_s) = conformal_opt::flat_threshold(&g)?;
    let cutoff = match a.cutoff {
        Some(c) => c,
        None => conformal_opt::default_cutoff(&g, a.band)?,
    };
    let config = OptConfig { cutoff, max_steps: a.steps, tol: a.tol, band: Some(a.band), policy: StepPolicy::default() };
    let state = conformal_opt::minimize(&g, &w0, &config)?;
    let last = *state.final_entry();
    let omega: Vec<Value> = state
        .omega
        .coefficients()
        .iter()
        .map(|(m, c)| json!({ "m": [m.0, m.1], "re": c.re, "im": c.im }))
        .collect();
    Ok(Outcome {
        command: "optimize",
        config: json!({ "command": "optimize", "args": to_value(a), "resolved": { "cutoff": cutoff, "policy": to_value(&config.policy) } }),
        results: json!({
            "status": to_value(&state.status),
            "accepted_steps": state.accepted_steps,
            "final": to_value(&last),
            "flat_value": flat,
            "b_threshold": b_s,
            "exploratory": g.lattice().b() <= b_s,
            "omega": omega,
        }),
        diagnostics: json!({ "trace_length": state.trace.len() }),
        tables: vec![Table {
            name: "optimize".into(),
            header: vec!["iteration", "lambda_bar", "area", "gradient_norm", "variance"],
            rows: trace_rows(None, &state.trace),
        }],
        plot: Some(plot_script("descent", "optimize", "iteration", "lambda_bar", &[(2, 3, "linespoints")])),
        verdict: Verdict::Report,
        summary: vec![format!(
            "{:?} after {} steps: lambda_bar_1 = {:.12} (flat {:.12}), variance {:.3e}",
            state.status, state.accepted_steps, last.lambda_bar, flat, last.variance
        )],
    })
}

fn verify_bar(a: &BarArgs) -> Result<Outcome, Error> {
    let spec = BarSweepSpec {
        count: a.samples,
        band: a.band,
        amplitude: a.amplitude,
        seed: a.seed,
        jmax2: jmax2(a.jmax)?,
        include_round: true,
        tolerance: a.tolerance,
    };
    let report = dirac_sphere::bar_sweep(&spec)?;
    let round = report.samples.first().map(|s| s.lambda_bar).unwrap_or(f64::NAN);
    let round_error = (round - report.bound).abs();
    let pass = report.violations == 0 && round_error <= 1e-8;
    let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Ok(Outcome {
        command: "verify-bar",
        config: json!({ "command": "verify-bar", "args": to_value(a), "resolved": to_value(&spec) }),
        results: json!({
            "bound": report.bound,
            "violations": report.violations,
            "min_lambda_bar": report.min_lambda_bar,
            "argmin": report.argmin,
            "round_lambda_bar": round,
            "round_error": round_error,
            "samples": to_value(&report.samples),
        }),
        diagnostics: json!({ "tolerance": a.tolerance, "equality_variance": dirac_sphere::EQUALITY_VARIANCE, "round_tolerance": 1e-8 }),
        tables: vec![Table {
            name: "verify-bar".into(),
            header: vec!["index", "lambda_bar", "variance", "equality_case"],
            rows: report
                .samples
                .iter()
                .map(|s| vec![s.index.to_string(), f(s.lambda_bar), f(s.variance), s.equality_case.to_string()])
                .collect(),
        }],
        plot: Some(plot_script("lambda_bar vs variance", "verify-bar", "omega variance", "lambda_bar", &[(4, 3, "points")])),
        verdict,
        summary: vec![format!(
            "{}: {} violations of lambda_bar_1 >= 2*sqrt(pi) - {:.0e}; min {:.12}; round {:.12}",
            if pass { "PASS" } else { "FAIL" },
            report.violations,
            a.tolerance,
            report.min_lambda_bar,
            round
        )],
    })
}

fn verify_torus(a: &TorusArgs) -> Result<Outcome, Error> {
    let g = torus_from(&[a.a, a.b], &a.spin)?;
    let spec = TorusVerificationSpec {
        perturbations: a.perturbations,
        seed: a.seed,
        band: a.band,
        amplitude: a.amplitude,
        cutoff: a.cutoff,
        max_steps: a.steps,
        tol: a.tol,
    };
    let v = conformal_opt::verify_torus(&g, &spec)?;
    let verdict = match (v.exploratory, v.pass) {
        (true, _) => Verdict::Exploratory,
        (false, true) => Verdict::Pass,
        (false, false) => Verdict::Fail,
    };
    let best = v.runs.iter().map(|r| r.final_lambda_bar).fold(f64::INFINITY, f64::min);
    let runs: Vec<Value> = v
        .runs
        .iter()
        .map(|r| {
            json!({
                "run": r.run,
                "status": to_value(&r.status),
                "steps": r.steps,
                "initial_lambda_bar": r.initial_lambda_bar,
                "final_lambda_bar": r.final_lambda_bar,
                "min_lambda_bar": r.min_lambda_bar,
                "final_variance": r.final_variance,
            })
        })
        .collect();
    let mut trace = Vec::new();
    for r in &v.runs {
        trace.extend(trace_rows(Some(r.run), &r.trace));
    }
    let label = match verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        _ => "EXPLORATORY",
    };
    Ok(Outcome {
        command: "verify-torus",
        config: json!({ "command": "verify-torus", "args": to_value(a), "resolved": { "cutoff": v.cutoff } }),
        results: json!({
            "lambda_bar_star": best,
            "flat_value": v.flat_value,
            "b_threshold": v.b_threshold,
            "exploratory": v.exploratory,
            "max_final_error": v.max_final_error,
            "max_final_variance": v.max_final_variance,
            "min_iterate": v.min_iterate,
            "runs": runs,
        }),
        diagnostics: json!({
            "flat_tolerance": conformal_opt::FLAT_TOLERANCE,
            "variance_tolerance": conformal_opt::VARIANCE_TOLERANCE,
            "lower_bound_slack": conformal_opt::LOWER_BOUND_SLACK,
        }),
        tables: vec![Table {
            name: "verify-torus".into(),
            header: vec!["run", "iteration", "lambda_bar", "area", "gradient_norm", "variance"],
            rows: trace,
        }],
        plot: Some(plot_script("descent traces", "verify-torus", "iteration", "lambda_bar", &[(3, 4, "points")])),
        verdict,
        summary: vec![format!(
            "{label}: lambda_bar_1* = {best:.10} (flat {:.10}), max error {:.2e}, max variance {:.2e}",
            v.flat_value, v.max_final_error, v.max_final_variance
        )],
    })
}

fn veronese(a: &VeroneseArgs) -> Result<Outcome, Error> {
    if a.max_m == 0 {
        return Err(Error::InvalidInput("--max-m must be at least 1".into()));
    }
    let surface = Surface::sphere(a.n_theta, a.n_phi);
    let tol = VeroneseTolerances::default();
    let checks = (1..=a.max_m).map(|m| cpn::veronese_check(m, &surface, &tol)).collect::<Result<Vec<_>, _>>()?;
    let pass = checks.iter().all(|c| c.pass);
    let summary = checks
        .iter()
        .map(|c| {
            format!(
                "{}: m={} E01={:.10} degree={} harmonic={:.1e} alignment={:.1e} metric={:.1e} critical={:.1e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.m,
                c.e01,
                c.degree,
                c.harmonic_residual,
                c.alignment,
                c.metric_ratio_error,
                c.criticality_residual
            )
        })
        .collect();
    Ok(Outcome {
        command: "veronese",
        config: json!({ "command": "veronese", "args": to_value(a) }),
        results: json!({ "checks": to_value(&checks) }),
        diagnostics: json!({ "tolerances": to_value(&tol) }),
        tables: vec![Table {
            name: "veronese".into(),
            header: vec!["m", "e10", "e01", "degree", "harmonic_residual", "alignment", "metric_ratio_error", "criticality_residual"],
            rows: checks
                .iter()
                .map(|c| {
                    vec![
                        c.m.to_string(),
                        f(c.e10),
                        f(c.e01),
                        c.degree.to_string(),
                        f(c.harmonic_residual),
                        f(c.alignment),
                        f(c.metric_ratio_error),
                        f(c.criticality_residual),
                    ]
                })
                .collect(),
        }],
        plot: Some(plot_script("Veronese energies", "veronese", "m", "energy", &[(2, 4, "linespoints"), (2, 3, "linespoints")])),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        summary,
    })
}

fn named_map(a: &EnergyArgs) -> Result<(Box<dyn HomogeneousMap>, Surface), Error> {
    let sphere = || Surface::sphere(a.n_theta, a.n_phi);
    let torus = || -> Result<TorusGeometry, Error> {
        let ab = a.torus.as_ref().ok_or_else(|| Error::InvalidInput(format!("map {:?} needs --torus A B", a.map)))?;
        torus_from(ab, &a.spin)
    };
    let int = |s: &str| -> Result<u32, Error> {
        s.parse().map_err(|_| Error::InvalidInput(format!("bad integer {s:?} in --map")))
    };
    let spec = a.map.trim();
    if let Some(k) = spec.strip_prefix("zbar^") {
        return Ok((Box::new(ClosedFormMap::sphere_power(int(k)?, true)), sphere()));
    }
    if let Some(k) = spec.strip_prefix("z^") {
        return Ok((Box::new(ClosedFormMap::sphere_power(int(k)?, false)), sphere()));
    }
    if let Some(m) = spec.strip_prefix("veronese:") {
        let (_, psi) = cpn::veronese(int(m)? as usize)?;
        return Ok((Box::new(psi), sphere()));
    }
    if let Some(k) = spec.strip_prefix("thetabar:") {
        let g = torus()?;
        return Ok((Box::new(ClosedFormMap::torus_theta(&g, int(k)?.max(1), true)), Surface::torus(&g, None, a.grid, a.grid)));
    }
    if let Some(k) = spec.strip_prefix("theta:") {
        let g = torus()?;
        return Ok((Box::new(ClosedFormMap::torus_theta(&g, int(k)?.max(1), false)), Surface::torus(&g, None, a.grid, a.grid)));
    }
    if let Some(k) = spec.strip_prefix("circle:") {
        let g = torus()?;
        let (k1, k2) = k
            .split_once(',')
            .ok_or_else(|| Error::InvalidInput("circle map needs `circle:K1,K2`".into()))?;
        let parse = |s: &str| s.trim().parse::<i64>().map_err(|_| Error::InvalidInput(format!("bad index {s:?}")));
        let xi = g.dual_vector(2 * parse(k1)?, 2 * parse(k2)?);
        return Ok((Box::new(ClosedFormMap::circle_map((xi.u, xi.v))), Surface::torus(&g, None, a.grid, a.grid)));
    }
    if spec == "eigen" {
        let g = torus()?;
        let w = FourierField::zero(&g);
        let cutoff = conformal_opt::default_cutoff(&g, 0)?;
        let s = dirac_torus::solve_conformal(&g, &w, cutoff)?;
        let r = s.first_positive_cluster()?;
        let map = EigenspinorMap::from_eigenspinors(vec![s.spinors[r.start].clone()], &g, &w)?;
        return Ok((Box::new(map), Surface::torus(&g, None, a.grid, a.grid)));
    }
    Err(Error::InvalidInput(format!("unknown map {spec:?}")))
}

fn energy(a: &EnergyArgs) -> Result<Outcome, Error> {
    let (map, surface) = named_map(a)?;
    let e = cpn::energies(map.as_ref(), &surface)?;
    let harmonic = cpn::harmonic_residual(map.as_ref(), &surface);
    let weak = cpn::weak_conformality(map.as_ref(), &surface);
    let quaternionic = match cpn::quaternionic_check(map.as_ref(), &surface) {
        Ok(q) => to_value(&q),
        Err(err) => json!({ "skipped": err.to_string() }),
    };
    let index = if surface.kind == cpn::SurfaceKind::Sphere {
        match cpn::index_consistency(map.as_ref(), &surface) {
            Ok(i) => to_value(&i),
            Err(err) => json!({ "skipped": err.to_string() }),
        }
    } else {
        Value::Null
    };
    let x = (e.e10 - e.e01) / (4.0 * PI);
    Ok(Outcome {
        command: "energy",
        config: json!({ "command": "energy", "args": to_value(a) }),
        results: json!({
            "energy": to_value(&e),
            "degree_quotient": x,
            "harmonic_residual": harmonic,
            "weak_conformality": weak,
            "quaternionic": quaternionic,
            "index": index,
        }),
        diagnostics: json!({ "samples": surface.points.len(), "lift_tolerance": cpn::LIFT_TOLERANCE }),
        tables: vec![Table {
            name: "energy".into(),
            header: vec!["e10", "e01", "degree", "degree_residual", "harmonic_residual"],
            rows: vec![vec![f(e.e10), f(e.e01), e.degree.to_string(), f(e.degree_residual), f(harmonic)]],
        }],
        plot: None,
        verdict: Verdict::Report,
        summary: vec![format!("E10 = {:.10}  E01 = {:.10}  degree = {}", e.e10, e.e01, e.degree)],
    })
}
