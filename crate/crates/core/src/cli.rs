//! Command-line front end.
//!
//! Exit codes: 0 when the analysis ran, 2 when the model is invalid and 3 when
//! dissipativity or certification fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{LoadedModel, ModelConfig};
use crate::discretize::{self, DEFAULT_GRID_N};
use crate::error::{PhsError, Result};
use crate::hybrid;
use crate::model::{self, BoundaryCondition, PhsDefinition};
use crate::presets::{self, ParamValue, PresetId};
use crate::report::{self, num, RunReport};
use crate::simulate;
use crate::spectral::{self, ScanOptions};
use crate::wellposed::{self, Classification, TraceSelector, Verdict, PSD_TOL};

/// Exit code of a completed analysis.
pub const EXIT_OK: i32 = 0;
/// Exit code of an invalid model or invocation.
pub const EXIT_INVALID: i32 = 2;
/// Exit code of a failed dissipativity or certification check.
pub const EXIT_FAILED: i32 = 3;

/// Tolerance for per-step energy monotonicity.
pub const MONOTONE_TOL: f64 = 1e-10;

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// JSON report.
    Json,
    /// CSV table of the primary result.
    Csv,
}

/// Port-Hamiltonian boundary control toolkit.
#[derive(Debug, Parser)]
#[command(name = "phs", version, about)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Directory receiving report.json and CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance of the semidefiniteness checks.
    #[arg(long = "tol-psd", default_value_t = PSD_TOL, global = true)]
    pub tol_psd: f64,
    /// Seed for sampled functions and initial conditions.
    #[arg(long, default_value_t = 7, global = true)]
    pub seed: u64,
    /// Command.
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands. `<model>` is a JSON file or `preset:NAME[:key=value,...]`.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the model, certify generation and classify stability.
    Certify {
        /// Model file or preset reference.
        model: String,
        /// Accept an empty discrete imaginary-axis spectrum as asymptotic stability evidence.
        #[arg(long)]
        axis_evidence: bool,
        /// Grid used for the axis evidence.
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
    },
    /// Boundary dissipation coefficient for a trace set.
    Kappa {
        /// Model file or preset reference.
        model: String,
        /// Trace set such as "0:0,0:1,1:0" or "0:1:0".
        #[arg(long)]
        traces: String,
    },
    /// Discrete spectrum of the collocation generator.
    Spectrum {
        /// Model file or preset reference.
        model: String,
        /// Collocation degree.
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
        /// Threshold on |Re λ| for imaginary-axis candidates.
        #[arg(long, default_value_t = 1e-6)]
        tol_axis: f64,
    },
    /// Resolvent norms along the imaginary axis.
    Resolvent {
        /// Model file or preset reference.
        model: String,
        /// Largest sampled frequency.
        #[arg(long, default_value_t = 100.0)]
        omega_max: f64,
        /// Samples per half axis.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Collocation degree.
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
        /// Growth factor between the top and bottom decades.
        #[arg(long, default_value_t = spectral::DEFAULT_GROWTH_FACTOR)]
        growth_factor: f64,
    },
    /// Implicit midpoint simulation and decay-rate fit.
    Simulate {
        /// Model file or preset reference.
        model: String,
        /// Collocation degree.
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
        /// Time step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Final time.
        #[arg(long, default_value_t = 20.0)]
        t_final: f64,
    },
    /// Closed-loop pipeline for models with an I/O split and a controller.
    Hybrid {
        /// Model file or preset reference.
        model: String,
        /// Collocation degree.
        #[arg(long, default_value_t = 48)]
        grid_n: usize,
        /// Time step of the energy check.
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        /// Final time of the energy check.
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        /// Accept an empty discrete imaginary-axis spectrum as asymptotic stability evidence.
        #[arg(long)]
        axis_evidence: bool,
    },
    /// Closed-form oracles.
    Oracle {
        /// Oracle.
        #[command(subcommand)]
        which: OracleCommand,
    },
}

/// Available oracles.
#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Scaled Schrödinger resolvent value and its high-frequency limit.
    Schrodinger {
        /// Dissipation gain.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Coupling at the right end.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        /// Frequency.
        #[arg(long, default_value_t = 1e6)]
        beta: f64,
        /// Evaluation point.
        #[arg(long, default_value_t = 0.5)]
        zeta: f64,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &PhsError) -> i32 {
    match e {
        PhsError::NotDissipative { .. } | PhsError::NotPassive { .. } => EXIT_FAILED,
        PhsError::EigenSolverFailure(_)
        | PhsError::OnSpectrum { .. }
        | PhsError::SingularStep
        | PhsError::NonpositiveEnergy { .. }
        | PhsError::NearSingularDenominator { .. } => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

/// Parses `preset:NAME[:key=value,...]` or reads a model file.
pub fn load_model(model_arg: &str) -> Result<LoadedModel> {
    let cfg = if let Some(rest) = model_arg.strip_prefix("preset:") {
        let (name, params) = match rest.split_once(':') {
            Some((n, p)) => (n, p),
            None => (rest, ""),
        };
        let mut map = BTreeMap::new();
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| PhsError::BadParameter(format!("expected key=value, got '{kv}'")))?;
            let x: f64 = v.trim().parse().map_err(|_| PhsError::BadParameter(format!("parameter '{k}' is not a number")))?;
            map.insert(k.trim().to_string(), ParamValue::Scalar(x));
        }
        let id = PresetId::from_name(name, &map)?;
        let mut c = ModelConfig::from_preset(&presets::preset_model(&id)?);
        c.preset = Some(crate::config::PresetConfig { name: name.to_string(), params: map });
        c
    } else {
        ModelConfig::from_path(Path::new(model_arg))?
    };
    cfg.to_model()
}

struct Ctx<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn artifact(&mut self, name: &str, content: &str) -> Result<Option<String>> {
        match &self.cli.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| PhsError::Io(format!("{}: {e}", dir.display())))?;
                let p = dir.join(name);
                std::fs::write(&p, content).map_err(|e| PhsError::Io(format!("{}: {e}", p.display())))?;
                Ok(Some(p.display().to_string()))
            }
            None => Ok(None),
        }
    }

    fn emit(&mut self, rep: &RunReport, csv: Option<&str>) -> Result<()> {
        let text = rep.to_json();
        self.artifact("report.json", &text)?;
        let body = match (self.cli.format, csv) {
            (Format::Csv, Some(c)) => c.to_string(),
            _ => text,
        };
        self.out.write_all(body.as_bytes()).map_err(|e| PhsError::Io(e.to_string()))
    }
}

/// Runs the CLI on `argv`, writing results to `out` and diagnostics to `err`.
pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let mut ctx = Ctx { cli: &cli, out, err };
    match dispatch(&mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI with the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_io(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn dispatch(ctx: &mut Ctx) -> Result<i32> {
    match &ctx.cli.command {
        Command::Certify { model, axis_evidence, grid_n } => certify(ctx, model, *axis_evidence, *grid_n),
        Command::Kappa { model, traces } => kappa(ctx, model, traces),
        Command::Spectrum { model, grid_n, tol_axis } => spectrum(ctx, model, *grid_n, *tol_axis),
        Command::Resolvent { model, omega_max, samples, grid_n, growth_factor } => {
            resolvent(ctx, model, *omega_max, *samples, *grid_n, *growth_factor)
        }
        Command::Simulate { model, grid_n, dt, t_final } => simulate_cmd(ctx, model, *grid_n, *dt, *t_final),
        Command::Hybrid { model, grid_n, dt, t_final, axis_evidence } => hybrid_cmd(ctx, model, *grid_n, *dt, *t_final, *axis_evidence),
        Command::Oracle { which: OracleCommand::Schrodinger { k, alpha, beta, zeta } } => oracle(ctx, *k, *alpha, *beta, *zeta),
    }
}

fn validated(ctx: &mut Ctx, model_arg: &str, rep: &mut RunReport) -> Result<Option<LoadedModel>> {
    let m = load_model(model_arg)?;
    let v = model::validate_phs(&m.def);
    rep.set("validation", report::validation_section(&v));
    for n in &m.notes {
        rep.warn(n);
    }
    if !v.passed {
        let failed: Vec<&str> = v.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let _ = writeln!(ctx.err, "error: model validation failed: {}", failed.join(", "));
        return Ok(None);
    }
    m.bc.validate(&m.def)?;
    Ok(Some(m))
}

/// Whether the discrete spectrum has no eigenvalue with `|Re λ| ≤ 1e−6 (1 + |λ|)`.
fn axis_is_empty(def: &PhsDefinition, bc: &BoundaryCondition, grid_n: usize) -> Result<bool> {
    let op = discretize::assemble_discrete_generator(def, bc, &discretize::legendre_operator(grid_n))?;
    let s = spectral::compute_spectrum(&op, f64::INFINITY)?;
    Ok(!s.eigenvalues.iter().any(|z| z.re.abs() <= 1e-6 * (1.0 + z.norm())))
}

fn certify(ctx: &mut Ctx, model_arg: &str, axis_evidence: bool, grid_n: usize) -> Result<i32> {
    let mut rep = RunReport::new("certify");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let cert = wellposed::check_generation_with_tol(&m.def, &m.bc, ctx.cli.tol_psd)?;
    rep.set("generation_certificate", report::generation_section(&cert));
    if cert.verdict != Verdict::Contraction {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_FAILED);
    }
    let pm = model::build_port_map(&m.def)?;
    let residual = wellposed::verify_energy_balance(&m.def, &m.bc, 50, ctx.cli.seed)?;
    rep.set("energy_balance", json!({"samples": 50, "max_scaled_residual": report::measured(residual, 1e-8), "port_map_residual": num(pm.residual)}));
    let evidence = if axis_evidence {
        let empty = axis_is_empty(&m.def, &m.bc, grid_n)?;
        rep.warn(report::SURROGATE_AXIS);
        rep.set("axis_evidence", json!({"grid_n": grid_n, "axis_empty": empty}));
        empty
    } else {
        false
    };
    let st = wellposed::classify_stability(&m.def, &m.bc, evidence)?;
    rep.set("kappa_table", report::kappa_table(&st));
    rep.set("classification", report::classification_section(&st));
    ctx.emit(&rep, None)?;
    Ok(EXIT_OK)
}

fn kappa(ctx: &mut Ctx, model_arg: &str, traces: &str) -> Result<i32> {
    let mut rep = RunReport::new("kappa");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let sel = TraceSelector::parse(traces, m.def.n, m.def.d)?;
    let k = wellposed::boundary_dissipation_coefficient(&m.def, &m.bc, &sel)?;
    rep.set(
        "kappa",
        json!({
            "selector": sel.to_string(),
            "kappa": report::measured(k.kappa, wellposed::DISSIPATIVITY_TOL),
            "positive": k.kappa > wellposed::DISSIPATIVITY_TOL,
            "witness": k.witness.map(|w| w.iter().map(|z| json!({"re": num(z.re), "im": num(z.im)})).collect::<Vec<_>>()),
        }),
    );
    let csv = format!("selector,kappa\n\"{}\",{}\n", sel, k.kappa);
    ctx.emit(&rep, Some(&csv))?;
    Ok(EXIT_OK)
}

fn spectrum(ctx: &mut Ctx, model_arg: &str, grid_n: usize, tol_axis: f64) -> Result<i32> {
    let mut rep = RunReport::new("spectrum");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let op = discretize::assemble_discrete_generator(&m.def, &m.bc, &discretize::legendre_operator(grid_n))?;
    let s = spectral::compute_spectrum(&op, tol_axis)?;
    let csv = report::eigenvalues_csv(&s.eigenvalues);
    let path = ctx.artifact("eigenvalues.csv", &csv)?;
    rep.set("spectrum", report::spectrum_section(&s, path.as_deref()));
    rep.set("discrete_dissipativity", report::measured(discretize::discrete_dissipativity(&op)?, 1e-8));
    rep.warn(report::SURROGATE_SPECTRUM);
    ctx.emit(&rep, Some(&csv))?;
    Ok(EXIT_OK)
}

fn resolvent(ctx: &mut Ctx, model_arg: &str, omega_max: f64, samples: usize, grid_n: usize, growth_factor: f64) -> Result<i32> {
    let mut rep = RunReport::new("resolvent");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let op = discretize::assemble_discrete_generator(&m.def, &m.bc, &discretize::legendre_operator(grid_n))?;
    let sweep = spectral::gearhart_scan(&op, omega_max, samples, ScanOptions { growth_factor })?;
    let csv = report::resolvent_csv(&sweep);
    let path = ctx.artifact("resolvent.csv", &csv)?;
    rep.set("resolvent", report::resolvent_section(&sweep, growth_factor, path.as_deref()));
    rep.warn(report::SURROGATE_RESOLVENT);
    if omega_max > sweep.trust_limit {
        rep.warn(&format!("frequencies above the trust limit {} are not resolved by the grid", sweep.trust_limit));
    }
    if sweep.diagnostic_only {
        rep.warn("discrete spectral abscissa is not negative; the scan is diagnostic only");
    }
    ctx.emit(&rep, Some(&csv))?;
    Ok(EXIT_OK)
}

fn simulate_cmd(ctx: &mut Ctx, model_arg: &str, grid_n: usize, dt: f64, t_final: f64) -> Result<i32> {
    let mut rep = RunReport::new("simulate");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let op = discretize::assemble_discrete_generator(&m.def, &m.bc, &discretize::legendre_operator(grid_n))?;
    let x0 = simulate::default_initial_condition(&op, ctx.cli.seed)?;
    let trace = simulate::simulate_energy(&op, &x0, dt, t_final)?;
    let s = spectral::compute_spectrum(&op, simulate::AXIS_SKIP_TOL)?;
    let csv = report::energy_csv(&trace);
    let path = ctx.artifact("energy.csv", &csv)?;
    match simulate::fit_decay_rate(&trace, None) {
        Ok(fit) => rep.set("decay", report::decay_section(&fit, &trace, MONOTONE_TOL, path.as_deref())),
        Err(e) => {
            rep.set("decay", json!({"csv": path, "error": e.to_string()}));
        }
    }
    rep.set("spectral_abscissa", report::measured(s.spectral_abscissa, 0.0));
    rep.warn(report::SURROGATE_DECAY);
    ctx.emit(&rep, Some(&csv))?;
    Ok(EXIT_OK)
}

fn hybrid_cmd(ctx: &mut Ctx, model_arg: &str, grid_n: usize, dt: f64, t_final: f64, axis_evidence: bool) -> Result<i32> {
    let mut rep = RunReport::new("hybrid");
    let Some(m) = validated(ctx, model_arg, &mut rep)? else {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    };
    let Some((io, ctrl)) = m.hybrid.clone() else {
        let _ = writeln!(ctx.err, "error: model has no io_split and controller");
        return Ok(EXIT_INVALID);
    };
    let split = hybrid::validate_io_split(&io, m.def.nd())?;
    rep.set("io_split", serde_json::to_value(&split).unwrap_or_default());
    if !split.passed {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_INVALID);
    }
    let sip = hybrid::sip_check(&ctrl)?;
    rep.set("sip_check", serde_json::to_value(&sip).unwrap_or_default());
    let cl = hybrid::build_closed_loop(&m.def, &io, &ctrl)?;
    let margin = hybrid::closed_loop_dissipativity(&cl)?;
    rep.set("closed_loop_dissipativity", serde_json::to_value(&margin).unwrap_or_default());
    if !margin.dissipative {
        ctx.emit(&rep, None)?;
        return Ok(EXIT_FAILED);
    }
    let h = hybrid::assemble_hybrid_generator(&cl, &discretize::legendre_operator(grid_n))?;
    let s = spectral::compute_spectrum(&h.op, 1e-6)?;
    let eig_csv = report::eigenvalues_csv(&s.eigenvalues);
    let eig_path = ctx.artifact("eigenvalues.csv", &eig_csv)?;
    rep.set("spectrum", report::spectrum_section(&s, eig_path.as_deref()));
    rep.set("discrete_dissipativity", report::measured(discretize::discrete_dissipativity(&h.op)?, 1e-8));
    rep.warn(report::SURROGATE_SPECTRUM);
    let x0 = simulate::default_initial_condition(&h.op, ctx.cli.seed)?;
    let trace = simulate::simulate_energy(&h.op, &x0, dt, t_final)?;
    let csv = report::energy_csv(&trace);
    let path = ctx.artifact("energy.csv", &csv)?;
    if let Ok(fit) = simulate::fit_decay_rate(&trace, None) {
        rep.set("decay", report::decay_section(&fit, &trace, MONOTONE_TOL, path.as_deref()));
        rep.warn(report::SURROGATE_DECAY);
    }
    let evidence = axis_evidence && !s.eigenvalues.iter().any(|z| z.re.abs() <= 1e-6 * (1.0 + z.norm()));
    if axis_evidence {
        rep.warn(report::SURROGATE_AXIS);
    }
    let cert = if sip.passed {
        rep.set("controller_class", json!("strictly input passive controller"));
        hybrid::sip_stability_classify(&cl, evidence, ctx.cli.seed)?
    } else {
        rep.set("controller_class", json!("general controller with Hurwitz state matrix"));
        hybrid::general_stability_classify(&cl, evidence)?
    };
    rep.set("kappa_table", report::kappa_table(&cert));
    rep.set("classification", report::classification_section(&cert));
    ctx.emit(&rep, None)?;
    Ok(if cert.classification == Classification::Inconclusive && !sip.passed { EXIT_FAILED } else { EXIT_OK })
}

fn oracle(ctx: &mut Ctx, k: f64, alpha: f64, beta: f64, zeta: f64) -> Result<i32> {
    let mut rep = RunReport::new("oracle schrodinger");
    let table = presets::schrodinger_highfreq_limit(k, alpha, &[beta], zeta)?;
    let row = table.rows[0];
    let x = presets::schrodinger_resolvent_oracle(beta, k, alpha, &[zeta])?[0];
    rep.set(
        "oracle",
        json!({
            "k": num(k), "alpha": num(alpha), "beta": num(beta), "zeta": num(zeta),
            "x": {"re": num(x.re), "im": num(x.im)},
            "scaled_value": {"re": num(row.re), "im": num(row.im)},
            "limit": {"re": num(table.limit_re), "im": num(table.limit_im)},
            "relative_error_to_limit": num(row.rel_error),
        }),
    );
    let csv = format!("beta,zeta,re,im,limit_re,limit_im\n{beta},{zeta},{},{},{},{}\n", row.re, row.im, table.limit_re, table.limit_im);
    ctx.emit(&rep, Some(&csv))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with_io(std::iter::once("phs").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn preset_reference_certifies() {
        let (code, out, _) = run_capture(&["certify", "preset:transport"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("\"verdict\": \"contraction\""));
    }

    #[test]
    fn unknown_preset_is_invalid() {
        let (code, _, err) = run_capture(&["certify", "preset:nope"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("nope"));
    }

    #[test]
    fn kappa_csv_output() {
        let (code, out, _) = run_capture(&["--format", "csv", "kappa", "preset:transport", "--traces", "0:0"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("selector,kappa\n"));
    }
}
