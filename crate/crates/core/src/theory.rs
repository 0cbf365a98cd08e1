//! Analytic side of the error expansion: the Gaussian partial expectation
//! `φ`, the leading constant, the rate exponents and numeric checks of the
//! two auxiliary bounds used to control the remainder.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::hurst::{HurstFunction, DEFAULT_VALIDATION_GRID};
use crate::numerics::adaptive_gl;
use crate::payoff::ConvexPayoff;

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_DELTA: f64 = 1e-3;
/// Curvature densities are integrated over `[-A, A] ∩ support`; beyond
/// `|a| = 8` the Gaussian factor is below `1e-14`.
pub const DENSITY_CUTOFF: f64 = 8.0;
/// Graded panels stop at `2^{-MAX_PANELS}`.
const MAX_PANELS: u32 = 60;

/// `φ(a) = E[Y 1_{Y > a}] = e^{-a²/2} / √(2π)` for standard normal `Y`.
#[inline]
pub fn phi(a: f64) -> f64 {
    (-0.5 * a * a).exp() / (2.0 * PI).sqrt()
}

/// `I(a) = ∫_0^1 s^{-H_s} φ(a s^{-H_s}) ds`.
///
/// After `s = r^q` with `q = 1/(1 - H_max)` the integrand is bounded at the
/// origin. Panels `[2^{-k-1}, 2^{-k}]` in `r` are added until the envelope
/// `φ(a) r / (1 - H_max)` of what remains falls below `rel_tol / 10` of the total.
pub fn leading_constant_inner(h: &HurstFunction, a: f64, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return domain(format!("rel_tol must be positive, got {rel_tol}"));
    }
    if !a.is_finite() {
        return domain("level a must be finite");
    }
    let h_max = h.h_max();
    if !(h_max < 1.0) {
        return domain(format!("need H_max < 1, got {h_max}"));
    }
    let envelope = phi(a) / (1.0 - h_max);
    if envelope == 0.0 {
        return Ok(0.0);
    }
    let q = 1.0 / (1.0 - h_max);
    // In logs: for H_max near 1, q is large and r^q underflows long before the
    // panels stop, while the Jacobian-weighted integrand stays bounded.
    let mut f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let ln_r = r.ln();
        let ln_s = q * ln_r;
        let hs = h.at(ln_s.exp().min(1.0));
        let weight = q * ((q - 1.0 - q * hs) * ln_r).exp();
        let arg = if a == 0.0 { 0.0 } else { a * (-hs * ln_s).exp() };
        weight * phi(arg)
    };
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..MAX_PANELS {
        let lo = 0.5 * hi;
        let rough = crate::numerics::gl(&mut f, lo, hi, 10).abs();
        let tol = 1e-3 * rel_tol * (total + rough).max(f64::MIN_POSITIVE);
        total += adaptive_gl(&mut f, lo, hi, tol, 40)
            .ok_or_else(|| Error::Quadrature(format!("I({a}) panel [{lo}, {hi}] did not converge")))?;
        hi = lo;
        if envelope * hi <= 0.1 * rel_tol * total {
            return Ok(total);
        }
    }
    Err(Error::Quadrature(format!("I({a}): graded panels exhausted at 2^-{MAX_PANELS}")))
}

/// `∫ I(a) μ(da)`: exact sum over atoms plus adaptive quadrature of the density part.
pub fn leading_constant(payoff: &ConvexPayoff, h: &HurstFunction, rel_tol: f64) -> Result<f64> {
    let mut total = 0.0;
    for &(a, w) in payoff.mu_atoms() {
        if w != 0.0 {
            total += w * leading_constant_inner(h, a, rel_tol)?;
        }
    }
    if let Some(d) = payoff.mu_density() {
        let lo = d.support.0.max(-DENSITY_CUTOFF);
        let hi = d.support.1.min(DENSITY_CUTOFF);
        if lo < hi {
            let mut err = None;
            let mut f = |a: f64| match leading_constant_inner(h, a, rel_tol) {
                Ok(v) => (d.density)(a) * v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            };
            let scale = phi(0.0) / (1.0 - h.h_max()) * (hi - lo);
            let mut cuts = vec![lo, hi];
            if lo < 0.0 && hi > 0.0 {
                cuts.insert(1, 0.0);
            }
            for w in cuts.windows(2) {
                let part = adaptive_gl(&mut f, w[0], w[1], rel_tol * scale, 30)
                    .ok_or_else(|| Error::Quadrature("density part of the leading constant did not converge".into()))?;
                total += part;
            }
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    Ok(total)
}

/// Exponents of the error bound `n^{-(2H̃-1)}` and of its remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateExponents {
    pub h_tilde: f64,
    pub leading_exponent: f64,
    pub remainder_exponent: f64,
    pub lower_bound_applicable: bool,
    pub lower_leading_exponent: f64,
}

impl RateExponents {
    /// Slope of `log E|error|` against `log n` predicted by the upper bound.
    pub fn theoretical_slope(&self) -> f64 {
        -self.leading_exponent
    }
}

/// Chooses `H̃ = H_min` when `α > H_min`, else `α - delta`, and derives the
/// exponents. Fails if `h` does not pass its (A1)/(A2) checks.
pub fn rate_exponents(h: &HurstFunction, delta: f64) -> Result<RateExponents> {
    let report = h.validate_assumptions(DEFAULT_VALIDATION_GRID)?;
    if !report.passed(false) {
        return Err(Error::Assumption(report.messages.join("; ")));
    }
    exponents_from_declared(h, delta)
}

/// [`rate_exponents`] without the grid validation, for callers that have
/// already validated (or deliberately overridden an advisory failure).
pub fn exponents_from_declared(h: &HurstFunction, delta: f64) -> Result<RateExponents> {
    let (h_min, h_max, alpha) = (h.h_min(), h.h_max(), h.alpha());
    if !(delta > 0.0 && delta < alpha - 0.5) {
        return domain(format!("delta must lie in (0, alpha - 1/2) = (0, {}), got {delta}", alpha - 0.5));
    }
    let h_tilde = if alpha > h_min { h_min } else { alpha - delta };
    let leading_exponent = 2.0 * h_tilde - 1.0;
    let remainder_exponent = (2.0 * h_tilde - h_max).min(h_min + alpha - 1.0).min(2.0 * alpha - 1.0);
    let out = RateExponents {
        h_tilde,
        leading_exponent,
        remainder_exponent,
        lower_bound_applicable: lower_bound_conditions(h),
        lower_leading_exponent: 2.0 * h_max - 1.0,
    };
    if !(h_tilde > 0.5 && h_tilde <= h_min && h_tilde < alpha) {
        return Err(Error::Invariant(format!("H̃ = {h_tilde} outside (1/2, H_min] ∩ (1/2, alpha)")));
    }
    if !(remainder_exponent > leading_exponent) {
        return Err(Error::Invariant(format!(
            "remainder exponent {remainder_exponent} does not dominate leading exponent {leading_exponent}"
        )));
    }
    Ok(out)
}

/// `α > H_max` and `3 H_max - 2 H_min < 1`, the conditions for a matching lower bound.
pub fn lower_bound_conditions(h: &HurstFunction) -> bool {
    h.alpha() > h.h_max() && 3.0 * h.h_max() - 2.0 * h.h_min() < 1.0
}

/// `C = 2 e^{-1/2}` in `φ(a/s^μ) <= C a^{-2} s^{2μ} φ(a)`.
pub fn boundedness_constant() -> f64 {
    2.0 * (-0.5f64).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub mu: f64,
    pub constant: f64,
    pub max_ratio: f64,
    pub argmax_a: f64,
    pub argmax_s: f64,
    pub points: usize,
    pub violations: usize,
    pub passed: bool,
}

/// Default grids: `a ∈ ±{0.1, ..., 1}` and `s ∈ {0.01, 0.02, ..., 1}`.
pub fn default_boundedness_grids() -> (Vec<f64>, Vec<f64>) {
    let a = (1..=10).flat_map(|k| [k as f64 / 10.0, -(k as f64) / 10.0]).collect();
    let s = (1..=100).map(|k| k as f64 / 100.0).collect();
    (a, s)
}

/// Checks `φ(a/s^μ) / (a^{-2} s^{2μ} φ(a)) <= C` on the grid. The ratio is
/// `a² s^{-2μ} exp(-a² (s^{-2μ} - 1) / 2)` and is evaluated in log space.
pub fn verify_boundedness_lemma(mu: f64, grid_a: &[f64], grid_s: &[f64], constant: f64) -> Result<BoundednessReport> {
    if grid_a.is_empty() || grid_s.is_empty() {
        return domain("boundedness check needs nonempty grids");
    }
    if let Some(a) = grid_a.iter().find(|a| !(a.abs() <= 1.0 && **a != 0.0)) {
        return domain(format!("grid values of a must satisfy 0 < |a| <= 1, got {a}"));
    }
    if let Some(s) = grid_s.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return domain(format!("grid values of s must be positive, got {s}"));
    }
    let limit = constant * (1.0 + 1e-12);
    let mut report = BoundednessReport {
        mu,
        constant,
        max_ratio: f64::NEG_INFINITY,
        argmax_a: f64::NAN,
        argmax_s: f64::NAN,
        points: grid_a.len() * grid_s.len(),
        violations: 0,
        passed: true,
    };
    for &a in grid_a {
        for &s in grid_s {
            let x = s.powf(-2.0 * mu);
            let ratio = ((a * a * x).ln() - 0.5 * a * a * (x - 1.0)).exp();
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.argmax_a = a;
                report.argmax_s = s;
            }
            if !(ratio <= limit) {
                report.violations += 1;
            }
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralLemmaReport {
    pub lambda: f64,
    pub mu: f64,
    /// `(a, F(a))` with `F(a) = ∫_0^1 s^λ φ(a/s^μ) ds / (a^{-2} φ(a))`.
    pub ratios: Vec<(f64, f64)>,
    pub sup_ratio: f64,
    /// All ratios finite and the last one not above the one before by more than 5%.
    pub bounded: bool,
    pub limit_check_a: f64,
    /// `2^{-(λ+1)/(2μ) - 1}`, the limit stated with the bound.
    pub stated_limit: f64,
    pub stated_limit_rel_error: f64,
    pub stated_limit_pass: bool,
    /// `1/μ`, the limit obtained from Laplace's method at `s = 1` (μ > 0 only).
    pub analytic_limit: Option<f64>,
    pub analytic_limit_rel_error: Option<f64>,
    pub analytic_limit_pass: Option<bool>,
}

pub const LIMIT_TOL: f64 = 0.05;

/// Default parameters: `λ = -3·0.75 - 0.001`, `μ = 0.75`, `a ∈ {1, ..., 8}`.
pub fn default_integral_lemma_params() -> (f64, f64, Vec<f64>) {
    (-3.0 * 0.75 - 1e-3, 0.75, (1..=8).map(f64::from).collect())
}

/// Evaluates `F(a)` on the grid and reports boundedness and both candidate limits.
pub fn verify_integral_lemma(lambda: f64, mu: f64, grid_a: &[f64]) -> Result<IntegralLemmaReport> {
    if mu == 0.0 || !mu.is_finite() || !lambda.is_finite() {
        return domain("integral bound needs finite λ and μ != 0");
    }
    if mu < 0.0 && lambda <= -1.0 {
        return domain(format!("∫_0^1 s^λ φ(a/s^μ) ds diverges at 0 for μ < 0 and λ = {lambda} <= -1"));
    }
    if grid_a.is_empty() {
        return domain("integral bound check needs a nonempty grid");
    }
    if let Some(a) = grid_a.iter().find(|a| !(a.abs() >= 1.0 && a.is_finite())) {
        return domain(format!("grid values of a must satisfy |a| >= 1, got {a}"));
    }
    let mut ratios = Vec::with_capacity(grid_a.len());
    for &a in grid_a {
        ratios.push((a, scaled_integral(lambda, mu, a)?));
    }
    let sup_ratio = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let mut by_size = ratios.clone();
    by_size.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
    let finite = ratios.iter().all(|r| r.1.is_finite());
    let growing = by_size.len() >= 2 && {
        let (prev, last) = (by_size[by_size.len() - 2].1, by_size[by_size.len() - 1].1);
        last > (1.0 + LIMIT_TOL) * prev
    };
    let (limit_check_a, f_last) = by_size[by_size.len() - 1];
    let stated_limit = 2f64.powf(-(lambda + 1.0) / (2.0 * mu) - 1.0);
    let stated_limit_rel_error = (f_last / stated_limit - 1.0).abs();
    let analytic_limit = (mu > 0.0).then(|| 1.0 / mu);
    let analytic_limit_rel_error = analytic_limit.map(|l| (f_last / l - 1.0).abs());
    Ok(IntegralLemmaReport {
        lambda,
        mu,
        ratios,
        sup_ratio,
        bounded: finite && !growing,
        limit_check_a: limit_check_a.abs(),
        stated_limit,
        stated_limit_rel_error,
        stated_limit_pass: stated_limit_rel_error <= LIMIT_TOL,
        analytic_limit,
        analytic_limit_rel_error,
        analytic_limit_pass: analytic_limit_rel_error.map(|e| e <= LIMIT_TOL),
    })
}

/// `a² ∫_0^1 s^λ exp(-a² (s^{-2μ} - 1) / 2) ds`, i.e. the integral divided
/// by `a^{-2} φ(a)` without forming either factor.
fn scaled_integral(lambda: f64, mu: f64, a: f64) -> Result<f64> {
    let a2 = a * a;
    let mut f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let e = -0.5 * a2 * (s.powf(-2.0 * mu) - 1.0);
        (lambda * s.ln() + e).exp()
    };
    let fail = || Error::Quadrature(format!("integral bound: quadrature failed at a = {a}"));
    // F(a) is O(1), so the unscaled integral is O(a^{-2}); that sets the absolute floor
    let floor = 1e-16 / a2;
    let mut total: f64 = 0.0;
    // towards s = 1, where the mass concentrates for μ > 0
    let mut w = 0.5;
    for _ in 0..MAX_PANELS {
        total += adaptive_gl(&mut f, 1.0 - w, 1.0 - 0.5 * w, 1e-14 * total.max(floor), 40).ok_or_else(fail)?;
        w *= 0.5;
    }
    // towards s = 0, where s^λ may be singular when μ < 0
    let mut hi = 0.5;
    for _ in 0..MAX_PANELS {
        let lo = 0.5 * hi;
        let panel = adaptive_gl(&mut f, lo, hi, 1e-14 * total.max(floor), 40).ok_or_else(fail)?;
        total += panel;
        hi = lo;
        if panel.abs() <= 1e-15 * total.abs() {
            break;
        }
    }
    // power-law tail s^λ e^{..} near 0 (only non-negligible when μ < 0)
    if mu < 0.0 {
        total += hi * f(hi) / (lambda + 1.0);
    }
    let out = a2 * total;
    if !out.is_finite() {
        return Err(fail());
    }
    Ok(out)
}
