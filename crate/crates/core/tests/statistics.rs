//! Monte Carlo invariants of the simulators and of convergence studies.
//! Seeds are fixed, so these are deterministic checks with statistical margins.

use mbm_core::drivers::{build_kernel_weights, CholeskySampler, GaussianPathSampler};
use mbm_core::experiments::{fit_rate, run_convergence, ExperimentConfig};
use mbm_core::payoff::{make_call_payoff, make_quadratic_payoff};
use mbm_core::{HurstFunction, SimulatorKind};

/// Log-log slope of the mean squared increment over lags `2^-9 ..= 2^-5`,
/// with increments started at every grid point of `[t0, t0 + 1/32]`.
fn variogram_slope(sampler: &GaussianPathSampler, t0: f64, paths: usize) -> f64 {
    let n = sampler.n();
    let k0 = (t0 * n as f64).round() as usize;
    let lags = [1usize, 2, 4, 8, 16];
    let block = sampler.sample_block(2024, 0, paths);
    let points: Vec<(usize, f64)> = lags
        .iter()
        .map(|&lag| {
            let mut acc = 0.0;
            let mut count = 0usize;
            for path in block.chunks_exact(n + 1) {
                for k in k0..k0 + 16 {
                    let d = path[k + lag] - path[k];
                    acc += d * d;
                    count += 1;
                }
            }
            (lag, acc / count as f64)
        })
        .collect();
    fit_rate(&points).unwrap()
}

#[test]
fn local_variogram_scaling() {
    let constant = HurstFunction::constant(0.75).unwrap();
    let chol = CholeskySampler::new(&constant, 512).unwrap().into_sampler();
    let slope = variogram_slope(&chol, 0.5, 1000);
    assert!((slope - 1.5).abs() <= 0.15, "constant H: slope {slope}");

    let sin = HurstFunction::sinusoidal(0.7, 0.1, 0.0).unwrap();
    let volterra = build_kernel_weights(&sin, 512, 2).unwrap().into_sampler();
    for t0 in [0.2, 0.5, 0.7] {
        let window: Vec<f64> = (0..=64).map(|k| sin.at(t0 + k as f64 / 512.0)).collect();
        let lo = 2.0 * window.iter().copied().fold(f64::INFINITY, f64::min) - 0.15;
        let hi = 2.0 * window.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.15;
        let slope = variogram_slope(&volterra, t0, 1000);
        assert!(slope >= lo && slope <= hi, "t0 = {t0}: slope {slope} outside [{lo}, {hi}]");
    }
}

#[test]
fn mean_gap_decreases_under_refinement() {
    let mut c = ExperimentConfig::new(
        HurstFunction::constant(0.7).unwrap(),
        make_call_payoff(0.0),
        SimulatorKind::Cholesky,
    );
    c.n_grid = vec![16, 32, 64, 128, 256];
    c.replications = 2000;
    c.master_seed = 5;
    let report = run_convergence(&c).unwrap();
    for w in report.per_n.windows(2) {
        let joint = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(w[1].mean <= w[0].mean + 2.0 * joint, "n = {} -> {}", w[0].n, w[1].n);
    }
    assert!(report.verdicts.nonnegativity.passed);
}

#[test]
fn smooth_payoff_has_the_same_rate() {
    // for Ψ = x²/2 the gap is half the realized quadratic variation, with mean n^{1-2H}/2
    let h = 0.75;
    let mut c =
        ExperimentConfig::new(HurstFunction::constant(h).unwrap(), make_quadratic_payoff(), SimulatorKind::Cholesky);
    c.n_grid = vec![64, 128, 256, 512];
    c.replications = 500;
    let report = run_convergence(&c).unwrap();
    assert!((report.fitted_slope + (2.0 * h - 1.0)).abs() <= 0.05, "slope {}", report.fitted_slope);
    assert!((report.leading_constant_theory - 0.5).abs() < 1e-7);
    for p in &report.per_n {
        assert!((p.normalized / 0.5 - 1.0).abs() < 0.02, "n = {}: {}", p.n, p.normalized);
    }
    assert!(report.passed());
}
