//! The `mbm` command line.
//!
//! Exit codes are a stable contract: 0 on success, 1 when a computation fails
//! or a verdict does not pass, 2 for usage and configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigFile, PayoffSpec};
use crate::error::{Error, Result};
use crate::experiments::build_sampler;
use crate::format::{fmt_g17, to_json_g17};
use crate::hurst::DEFAULT_VALIDATION_GRID;
use crate::theory::{
    boundedness_constant, default_boundedness_grids, default_integral_lemma_params, exponents_from_declared,
    leading_constant, leading_constant_inner, phi, verify_boundedness_lemma, verify_integral_lemma,
    BoundednessReport, IntegralLemmaReport, RateExponents,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mbm", version, about = "Simulate mBm and check Riemann-sum convergence rates for convex payoffs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the Hurst function of a config against (A1) and (A2).
    Validate { config: PathBuf },
    /// Write one simulated path as a `t,x` CSV.
    Simulate(SimulateArgs),
    /// Run a convergence study and write report.json and errors.csv.
    Converge(ConvergeArgs),
    /// Print I(a), the leading constant and the rate exponents as JSON.
    Constant(ConstantArgs),
    /// Run the boundedness and integral-bound verifiers.
    Lemmas(LemmaArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Master seed; defaults to `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Which path of the seeded stream to emit.
    #[arg(long, default_value_t = 0)]
    path_index: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker cap. Results are identical for every value.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; defaults to `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the theoretical slope used by the verdict.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    theoretical_slope: Option<f64>,
}

#[derive(Debug, Args)]
struct ConstantArgs {
    config: PathBuf,
    /// Point at which to report I(a); defaults to the payoff's kink, or 0.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LemmaArgs {
    /// Exponent μ of the boundedness check.
    #[arg(long, default_value_t = 0.75, allow_hyphen_values = true)]
    mu: f64,
    /// Comma-separated values of a for the boundedness check, 0 < |a| <= 1.
    #[arg(long, allow_hyphen_values = true)]
    grid_a: Option<String>,
    /// Comma-separated values of s for the boundedness check, s > 0.
    #[arg(long)]
    grid_s: Option<String>,
    /// Exponent λ of the integral bound.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Exponent μ of the integral bound.
    #[arg(long, allow_hyphen_values = true)]
    integral_mu: Option<f64>,
    /// Comma-separated values of a for the integral bound, |a| >= 1.
    #[arg(long, allow_hyphen_values = true)]
    integral_grid_a: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the constant of the boundedness check.
    #[arg(long, hide = true)]
    lemma2_constant: Option<f64>,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config, out),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Converge(a) => cmd_converge(&a, out),
        Command::Constant(a) => cmd_constant(&a, out),
        Command::Lemmas(a) => cmd_lemmas(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "mbm: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<i32> {
    let cfg = ConfigFile::load(path)?;
    let h = cfg.hurst.build()?;
    let r = h.validate_assumptions(DEFAULT_VALIDATION_GRID)?;
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    writeln!(out, "hurst            {}", r.hurst)?;
    writeln!(out, "measured H_min   {}  (declared {})", fmt_g17(r.measured_min), fmt_g17(r.declared_h_min))?;
    writeln!(out, "measured H_max   {}  (declared {})", fmt_g17(r.measured_max), fmt_g17(r.declared_h_max))?;
    writeln!(
        out,
        "Hölder quotient  {}  (alpha {}, declared constant {})",
        fmt_g17(r.holder_quotient),
        fmt_g17(r.alpha),
        fmt_g17(r.holder_constant)
    )?;
    writeln!(out, "(A1)             {}", verdict(r.a1_pass))?;
    writeln!(out, "(A2)             {}", verdict(r.a2_pass))?;
    for m in &r.messages {
        writeln!(out, "  {m}")?;
    }
    Ok(if r.passed(cfg.experiment.force) { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = ConfigFile::load(&args.config)?;
    if args.n < 1 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let mut exp = cfg.experiment_config_with_payoff(cfg.payoff_or_default())?;
    exp.n_grid = vec![args.n];
    let sampler = build_sampler(&exp, args.n)?;
    let seed = args.seed.unwrap_or(cfg.experiment.seed);
    let path = sampler.sample_seeded(seed, args.path_index);

    let mut csv = String::with_capacity(40 * (args.n + 2));
    csv.push_str("t,x\n");
    for (k, x) in path.values().iter().enumerate() {
        csv.push_str(&fmt_g17(path.time(k)));
        csv.push(',');
        csv.push_str(&fmt_g17(*x));
        csv.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }

    let d = sampler.diagnostics();
    writeln!(
        err,
        "{} sampler, n = {}: max relative variance error {} (rows from index {})",
        sampler.kind().as_str(),
        args.n,
        fmt_g17(d.isometry_max_rel_error),
        d.isometry_from_index
    )?;
    if let Some(j) = d.jitter {
        writeln!(err, "covariance jitter {}", fmt_g17(j))?;
    }
    if let Some(b) = d.truncation_bias_at_one {
        writeln!(err, "truncation variance bias at t = 1: {}", fmt_g17(b))?;
    }
    Ok(EXIT_OK)
}

fn cmd_converge(args: &ConvergeArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = ConfigFile::load(&args.config)?;
    let mut exp = cfg.experiment_config()?;
    if let Some(s) = args.seed {
        exp.master_seed = s;
    }
    if args.threads.is_some() {
        exp.threads = args.threads;
    }
    exp.theoretical_slope_override = args.theoretical_slope;
    exp.validate()?;
    let report = crate::experiments::run_convergence(&exp)?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    report.write_to(&dir)?;

    writeln!(out, "{:>6}  {:>24}  {:>24}  {:>24}", "n", "mean", "stderr", "normalized")?;
    for p in &report.per_n {
        writeln!(out, "{:>6}  {:>24}  {:>24}  {:>24}", p.n, fmt_g17(p.mean), fmt_g17(p.stderr), fmt_g17(p.normalized))?;
    }
    let v = &report.verdicts;
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    writeln!(
        out,
        "slope {} vs theory {} ({}): {}",
        fmt_g17(report.fitted_slope),
        fmt_g17(report.theoretical_slope),
        v.slope.mode,
        verdict(v.slope.passed)
    )?;
    if let Some(c) = &v.constant {
        writeln!(
            out,
            "leading constant {} at n = {}, relative error {}: {}",
            fmt_g17(report.leading_constant_theory),
            c.n,
            fmt_g17(c.relative_error),
            verdict(c.passed)
        )?;
    }
    writeln!(out, "minimum gap {}: {}", fmt_g17(v.nonnegativity.min_gap), verdict(v.nonnegativity.passed))?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct ConstantReport {
    hurst: String,
    payoff: String,
    a: f64,
    phi_a: f64,
    inner_integral: f64,
    /// `φ(a) / (1 - H)` when `H` is constant.
    inner_integral_closed_form: Option<f64>,
    leading_constant: f64,
    exponents: RateExponents,
}

fn cmd_constant(args: &ConstantArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = ConfigFile::load(&args.config)?;
    let h = cfg.hurst.build()?;
    let spec = cfg.payoff_or_default();
    let payoff = spec.build()?;
    let a = args.a.unwrap_or(match spec {
        PayoffSpec::Call { a } | PayoffSpec::Abs { a } => a,
        PayoffSpec::Quadratic { .. } => 0.0,
    });
    let rel_tol = cfg.experiment.rel_tol;
    let report = ConstantReport {
        hurst: h.id(),
        payoff: payoff.name().to_string(),
        a,
        phi_a: phi(a),
        inner_integral: leading_constant_inner(&h, a, rel_tol)?,
        inner_integral_closed_form: h.is_constant().then(|| phi(a) / (1.0 - h.h_max())),
        leading_constant: leading_constant(&payoff, &h, rel_tol)?,
        exponents: exponents_from_declared(&h, cfg.experiment.delta_htilde)?,
    };
    emit(&to_json_g17(&report), args.out.as_deref(), out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LemmaReport {
    boundedness: BoundednessReport,
    integral: IntegralLemmaReport,
    /// Whether either verifier found a violation; this sets the exit code.
    violation: bool,
}

fn parse_grid(flag: &str, text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("--{flag}: cannot parse {s:?}: {e}"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Config(format!("--{flag} must list at least one value")));
    }
    Ok(values)
}

fn cmd_lemmas(args: &LemmaArgs, out: &mut dyn Write) -> Result<i32> {
    let (default_a, default_s) = default_boundedness_grids();
    let (default_lambda, default_mu, default_int_a) = default_integral_lemma_params();
    let grid_a = args.grid_a.as_deref().map(|t| parse_grid("grid-a", t)).transpose()?.unwrap_or(default_a);
    let grid_s = args.grid_s.as_deref().map(|t| parse_grid("grid-s", t)).transpose()?.unwrap_or(default_s);
    let int_a = args
        .integral_grid_a
        .as_deref()
        .map(|t| parse_grid("integral-grid-a", t))
        .transpose()?
        .unwrap_or(default_int_a);
    let constant = args.lemma2_constant.unwrap_or_else(boundedness_constant);

    let boundedness = verify_boundedness_lemma(args.mu, &grid_a, &grid_s, constant)?;
    let integral =
        verify_integral_lemma(args.lambda.unwrap_or(default_lambda), args.integral_mu.unwrap_or(default_mu), &int_a)?;
    let violation = !boundedness.passed || !integral.bounded;
    let report = LemmaReport { boundedness, integral, violation };
    emit(&to_json_g17(&report), args.out.as_deref(), out)?;
    Ok(if violation { EXIT_FAILURE } else { EXIT_OK })
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("mbm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("g", "0.1, -0.5,1").unwrap(), vec![0.1, -0.5, 1.0]);
        assert!(matches!(parse_grid("g", ""), Err(Error::Config(_))));
        assert!(matches!(parse_grid("g", "x"), Err(Error::Config(_))));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&[]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["lemmas", "--grid-a", ""]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn lemma_defaults_pass_and_unit_constant_fails() {
        let (code, out, _) = run_capture(&["lemmas"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("\"violation\": false"));
        assert_eq!(run_capture(&["lemmas", "--lemma2-constant", "1.0"]).0, EXIT_FAILURE);
    }
}
