//! Monte Carlo estimation of `E|∫ψ(X)dX - Riemann sum|` over a range of grid
//! sizes, log-log rate fitting and verdicts against the theoretical exponents.
//!
//! Path `k` at grid size `n` always consumes the random stream
//! `(master_seed, n, k)`, and per-path gaps are reduced with a fixed pairwise
//! tree, so reports are bit-identical for any number of worker threads.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::drivers::moving_average::{MovingAverageSampler, DEFAULT_TRUNCATION};
use crate::drivers::{build_kernel_weights, CholeskySampler, GaussianPathSampler, SimulatorKind, DEFAULT_OVERSAMPLE};
use crate::error::{domain, Error, Result};
use crate::format::{fmt_g17, to_json_g17};
use crate::hurst::{HurstFunction, DEFAULT_VALIDATION_GRID};
use crate::numerics::pairwise_sum;
use crate::payoff::{gap_values, ConvexPayoff};
use crate::theory::{exponents_from_declared, leading_constant, RateExponents, DEFAULT_DELTA, DEFAULT_REL_TOL};

pub const DEFAULT_SLOPE_TOL: f64 = 0.10;
pub const DEFAULT_CONST_TOL: f64 = 0.25;
pub const MIN_REPLICATIONS: usize = 100;
/// Per-path gaps below this count as a nonnegativity failure in the report.
pub const NONNEGATIVITY_SLACK: f64 = -1e-12;
/// Paths handed to one worker at a time.
const PATH_CHUNK: usize = 256;

/// Everything that defines one convergence study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub hurst: HurstFunction,
    pub payoff: ConvexPayoff,
    pub simulator: SimulatorKind,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub oversample: usize,
    /// Moving-average truncation horizon `T`.
    pub truncation: f64,
    pub delta_htilde: f64,
    pub slope_tol: f64,
    pub const_tol: f64,
    pub rel_tol: f64,
    /// Worker cap; `None` uses the global rayon pool. Never changes results.
    pub threads: Option<usize>,
    /// Accept a Hurst function whose advisory (A2) check failed.
    pub force: bool,
    /// Replaces the theoretical slope in the verdict (testing hook).
    pub theoretical_slope_override: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(hurst: HurstFunction, payoff: ConvexPayoff, simulator: SimulatorKind) -> Self {
        Self {
            hurst,
            payoff,
            simulator,
            n_grid: vec![64, 128, 256, 512],
            replications: 5000,
            master_seed: 1,
            oversample: DEFAULT_OVERSAMPLE,
            truncation: DEFAULT_TRUNCATION,
            delta_htilde: DEFAULT_DELTA,
            slope_tol: DEFAULT_SLOPE_TOL,
            const_tol: DEFAULT_CONST_TOL,
            rel_tol: DEFAULT_REL_TOL,
            threads: None,
            force: false,
            theoretical_slope_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::Config(format!("every grid size must be >= 2, got {:?}", self.n_grid)));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n_grid must be strictly ascending, got {:?}", self.n_grid)));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.oversample == 0 {
            return Err(Error::Config("oversample must be >= 1".into()));
        }
        if !(self.slope_tol >= 0.0 && self.const_tol >= 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("tolerances must be nonnegative (rel_tol positive)".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Runs `f` inside a pool capped at `threads` workers, if set.
    fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(k) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {k} worker threads: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Linear path map for grid size `n` under the configured simulator.
pub fn build_sampler(config: &ExperimentConfig, n: usize) -> Result<GaussianPathSampler> {
    Ok(match config.simulator {
        SimulatorKind::Volterra => build_kernel_weights(&config.hurst, n, config.oversample)?.into_sampler(),
        SimulatorKind::Cholesky => CholeskySampler::new(&config.hurst, n)?.into_sampler(),
        SimulatorKind::MovingAverage => {
            MovingAverageSampler::with_oversample(&config.hurst, n, config.truncation, config.oversample)?
                .into_sampler()
        }
    })
}

/// Monte Carlo summary for one grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Estimate {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min_gap: f64,
    pub paths: usize,
}

/// Mean and standard error of the discretization gap at grid size `n`.
pub fn estimate_l1_error(config: &ExperimentConfig, n: usize) -> Result<L1Estimate> {
    config.validate()?;
    if !config.n_grid.contains(&n) {
        return domain(format!("n = {n} is not in the configured grid {:?}", config.n_grid));
    }
    config.in_pool(|| {
        let sampler = build_sampler(config, n)?;
        estimate_with_sampler(config, &sampler)
    })?
}

fn estimate_with_sampler(config: &ExperimentConfig, sampler: &GaussianPathSampler) -> Result<L1Estimate> {
    let n = sampler.n();
    let m = config.replications;
    let chunks = m.div_ceil(PATH_CHUNK);
    let gaps: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let first = c * PATH_CHUNK;
            let count = PATH_CHUNK.min(m - first);
            let block = sampler.sample_block(config.master_seed, first as u64, count);
            block.chunks_exact(n + 1).map(|path| gap_values(path, &config.payoff)).collect()
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = gaps.concat();
    Ok(summarize(n, &gaps))
}

fn summarize(n: usize, gaps: &[f64]) -> L1Estimate {
    let m = gaps.len() as f64;
    let mean = pairwise_sum(gaps) / m;
    let dev: Vec<f64> = gaps.iter().map(|g| (g - mean) * (g - mean)).collect();
    let var = pairwise_sum(&dev) / (m - 1.0);
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    L1Estimate { n, mean, stderr: (var / m).sqrt(), min_gap, paths: gaps.len() }
}

/// OLS slope of `ln(mean)` against `ln(n)`.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Degenerate(format!("rate fit needs positive means, got {} at n = {}", p.1, p.0)));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("rate fit needs at least two distinct grid sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct PerN {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `n^{2H̃-1} · mean`
    pub normalized: f64,
    pub min_gap: f64,
    pub isometry_max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeVerdict {
    /// `"two_sided"` when the lower bound applies, otherwise `"upper_bound"`.
    pub mode: String,
    pub tolerance: f64,
    /// Accepted interval for the fitted slope (`lower` is `null` for the one-sided check).
    pub lower: Option<f64>,
    pub upper: f64,
    pub passed: bool,
}

/// `n^{2H̃-1} mean <= L (1 + tol)` and `n^{2H_max-1} mean >= L (1 - tol)` at
/// the largest `n`. For constant `H` both exponents agree and this is
/// `|n^{2H-1} mean / L - 1| <= tol`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantVerdict {
    pub n: usize,
    pub tolerance: f64,
    pub upper_normalized: f64,
    pub lower_normalized: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonnegativityVerdict {
    pub min_gap: f64,
    pub threshold: f64,
    pub paths: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub slope: SlopeVerdict,
    pub constant: Option<ConstantVerdict>,
    pub nonnegativity: NonnegativityVerdict,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub hurst: String,
    pub payoff: String,
    pub simulator: String,
    pub master_seed: u64,
    pub replications: usize,
    pub oversample: usize,
    pub per_n: Vec<PerN>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    pub exponents: RateExponents,
    pub leading_constant_theory: f64,
    pub verdicts: Verdicts,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.verdicts.all_passed
    }

    pub fn to_json(&self) -> String {
        to_json_g17(self)
    }

    /// `n,mean,stderr,normalized` rows in `%.17g`.
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("n,mean,stderr,normalized\n");
        for p in &self.per_n {
            out.push_str(&format!("{},{},{},{}\n", p.n, fmt_g17(p.mean), fmt_g17(p.stderr), fmt_g17(p.normalized)));
        }
        out
    }

    /// Writes `report.json` and `errors.csv` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        fs::write(dir.join("errors.csv"), self.errors_csv())?;
        Ok(())
    }
}

/// Full study: one estimate per grid size, rate fit, theory and verdicts.
pub fn run_convergence(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    let validation = config.hurst.validate_assumptions(DEFAULT_VALIDATION_GRID)?;
    if !validation.passed(config.force) {
        return Err(Error::Assumption(validation.messages.join("; ")));
    }
    let exponents = exponents_from_declared(&config.hurst, config.delta_htilde)?;
    let leading = leading_constant(&config.payoff, &config.hurst, config.rel_tol)?;

    let estimates: Vec<(L1Estimate, f64)> = config.in_pool(|| {
        config
            .n_grid
            .iter()
            .map(|&n| {
                let sampler = build_sampler(config, n)?;
                let est = estimate_with_sampler(config, &sampler)?;
                Ok((est, sampler.diagnostics().isometry_max_rel_error))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let per_n: Vec<PerN> = estimates
        .iter()
        .map(|(e, iso)| PerN {
            n: e.n,
            mean: e.mean,
            stderr: e.stderr,
            normalized: (e.n as f64).powf(exponents.leading_exponent) * e.mean,
            min_gap: e.min_gap,
            isometry_max_rel_error: *iso,
        })
        .collect();
    let points: Vec<(usize, f64)> = per_n.iter().map(|p| (p.n, p.mean)).collect();
    let fitted_slope = fit_rate(&points)?;
    let theoretical_slope = config.theoretical_slope_override.unwrap_or(exponents.theoretical_slope());

    let slope = if exponents.lower_bound_applicable {
        // the error is sandwiched between n^{1-2H_max} and n^{1-2H̃}
        let steepest = theoretical_slope.min(-exponents.lower_leading_exponent);
        let lower = steepest - config.slope_tol;
        let upper = theoretical_slope + config.slope_tol;
        SlopeVerdict {
            mode: "two_sided".into(),
            tolerance: config.slope_tol,
            lower: Some(lower),
            upper,
            passed: fitted_slope >= lower && fitted_slope <= upper,
        }
    } else {
        let upper = theoretical_slope + config.slope_tol;
        SlopeVerdict {
            mode: "upper_bound".into(),
            tolerance: config.slope_tol,
            lower: None,
            upper,
            passed: fitted_slope <= upper,
        }
    };

    let constant = exponents.lower_bound_applicable.then(|| {
        let last = &per_n[per_n.len() - 1];
        let nf = last.n as f64;
        let upper_normalized = nf.powf(exponents.leading_exponent) * last.mean;
        let lower_normalized = nf.powf(exponents.lower_leading_exponent) * last.mean;
        let over = (upper_normalized / leading - 1.0).max(0.0);
        let under = (1.0 - lower_normalized / leading).max(0.0);
        let relative_error = over.max(under);
        ConstantVerdict {
            n: last.n,
            tolerance: config.const_tol,
            upper_normalized,
            lower_normalized,
            relative_error,
            passed: relative_error <= config.const_tol,
        }
    });

    let min_gap = per_n.iter().map(|p| p.min_gap).fold(f64::INFINITY, f64::min);
    let paths = estimates.iter().map(|e| e.0.paths).sum();
    let nonnegativity =
        NonnegativityVerdict { min_gap, threshold: NONNEGATIVITY_SLACK, paths, passed: min_gap >= NONNEGATIVITY_SLACK };

    let all_passed = slope.passed && constant.as_ref().is_none_or(|c| c.passed) && nonnegativity.passed;
    Ok(RateReport {
        hurst: config.hurst.id(),
        payoff: config.payoff.name().to_string(),
        simulator: config.simulator.as_str().to_string(),
        master_seed: config.master_seed,
        replications: config.replications,
        oversample: config.oversample,
        per_n,
        fitted_slope,
        theoretical_slope,
        exponents,
        leading_constant_theory: leading,
        verdicts: Verdicts { slope, constant, nonnegativity, all_passed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::make_call_payoff;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            HurstFunction::constant(0.75).unwrap(),
            make_call_payoff(0.0),
            SimulatorKind::Cholesky,
        );
        c.n_grid = vec![8, 16, 32];
        c.replications = 300;
        c.master_seed = 11;
        c
    }

    #[test]
    fn fit_rate_exact_lines() {
        let pts: Vec<(usize, f64)> = [64, 128, 256, 512].iter().map(|&n| (n, 3.0 * (n as f64).powf(-0.5))).collect();
        assert!((fit_rate(&pts).unwrap() + 0.5).abs() < 1e-12);
        let flat: Vec<(usize, f64)> = [64, 128, 256].iter().map(|&n| (n, 2.0)).collect();
        assert!(fit_rate(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fit_rate_perturbed_line() {
        // OLS on ln n = (6 + k) ln 2 with ln(1 ± 0.1) alternating has the closed form
        // -0.5 + ln(0.9/1.1) / (5 ln 2) for k = 0..3.
        let pts: Vec<(usize, f64)> = (0..4)
            .map(|k| {
                let n = 64usize << k;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                (n, (n as f64).powf(-0.5) * (1.0 + 0.1 * sign))
            })
            .collect();
        let want = -0.5 + (0.9f64 / 1.1).ln() / (5.0 * 2f64.ln());
        let got = fit_rate(&pts).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!((got + 0.5).abs() < 0.08);
    }

    #[test]
    fn fit_rate_rejects_degenerate_input() {
        assert!(matches!(fit_rate(&[(2, 1.0), (4, 0.5)]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_rate(&[(2, 1.0), (4, 0.0), (8, 0.1)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        assert!(c.validate().is_ok());
        c.n_grid = vec![16, 8];
        assert!(c.validate().is_err());
        c.n_grid = vec![1, 8];
        assert!(c.validate().is_err());
        c = small_config();
        c.replications = 99;
        assert!(c.validate().is_err());
    }

    #[test]
    fn estimate_is_deterministic_and_thread_independent() {
        let c = small_config();
        let a = estimate_l1_error(&c, 16).unwrap();
        let b = estimate_l1_error(&c, 16).unwrap();
        assert_eq!(a, b);
        let mut c2 = c.clone();
        c2.threads = Some(3);
        assert_eq!(estimate_l1_error(&c2, 16).unwrap(), a);
        assert!(a.stderr > 0.0 && a.min_gap >= 0.0);
        assert!(estimate_l1_error(&c, 10).is_err());
    }

    #[test]
    fn override_slope_fails_verdict() {
        let mut c = small_config();
        c.theoretical_slope_override = Some(-3.0);
        let r = run_convergence(&c).unwrap();
        assert!(!r.verdicts.slope.passed && !r.passed());
    }

    #[test]
    fn csv_has_expected_header() {
        let r = run_convergence(&small_config()).unwrap();
        let csv = r.errors_csv();
        assert!(csv.starts_with("n,mean,stderr,normalized\n8,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
