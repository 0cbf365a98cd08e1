//! Discretized Volterra representation `X_t = ∫_0^t K_{H_t}(t, s) dW_s`.
//!
//! The noise lives on a fine grid of `m = oversample * n` cells of width
//! `Δs = 1/m`. Weight `w[i][j]` is the average of `K_{H_{t_i}}(t_i, ·)` over
//! fine cell `j`, so `X_{t_i} = Σ_j w[i][j] ΔW_j` with `Var ΔW_j = Δs`.
//!
//! The cell touching `s = 0` is the exception. There `K ~ c s^{1/2 - H}`, and
//! as `H → 1` almost all of `∫ K²` sits in that cell; an average would lose
//! most of it (the factor is `(2 - 2H) / (3/2 - H)²`). That cell gets the
//! root mean square instead. Because every row shares the `s^{1/2 - H}`
//! profile there, products of these weights also reproduce the covariances.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::numerics::gl;

use super::kernel::MolchanKernel;
use super::{GaussianPathSampler, NoiseSource, SamplePath, SamplerDiagnostics, SimulatorKind};

/// Geometric sub-cells used inside the cell touching `s = 0`.
const ORIGIN_LEVELS: u32 = 16;
/// Geometric sub-cells used inside the cell touching `s = t_i`.
const DIAGONAL_LEVELS: u32 = 6;
const GRADED_ORDER: usize = 8;
const INTERIOR_ORDER: usize = 3;
/// Relative isometry defect that signals a quadrature breakdown.
const ISOMETRY_FAILURE: f64 = 0.05;

/// Quadrature weights of the Volterra integral on the fine grid.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    sampler: GaussianPathSampler,
    oversample: usize,
    isometry: Vec<f64>,
}

impl KernelWeights {
    pub fn n(&self) -> usize {
        self.sampler.n()
    }

    /// Number of fine cells.
    pub fn m(&self) -> usize {
        self.sampler.noise_dim()
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn fine_step(&self) -> f64 {
        1.0 / self.m() as f64
    }

    /// Coefficient of `ΔW_j` in `X_{t_i}`; zero whenever `s_j >= t_i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.sampler.rows[i - 1].get(j).copied().unwrap_or(0.0)
    }

    /// Discrete isometry `Σ_j w[i][j]^2 Δs`.
    pub fn discrete_variance(&self, i: usize) -> f64 {
        self.sampler.implied_variance(i)
    }

    /// `Σ_j w[i][j]^2 Δs / t_i^{2 H_{t_i}} - 1` for `i = 1..=n`.
    pub fn isometry_rel_errors(&self) -> &[f64] {
        &self.isometry
    }

    pub fn sampler(&self) -> &GaussianPathSampler {
        &self.sampler
    }

    pub fn into_sampler(self) -> GaussianPathSampler {
        self.sampler
    }
}

/// Builds the cell-averaged Volterra weights for `h` on `n` coarse cells.
///
/// Fails with a quadrature error when the discrete isometry is off by more
/// than 5% on any row `i >= oversample` that spans at least eight fine cells.
pub fn build_kernel_weights(h: &HurstFunction, n: usize, oversample: usize) -> Result<KernelWeights> {
    if n == 0 || oversample == 0 {
        return domain("need n >= 1 and oversample >= 1");
    }
    let m = n * oversample;
    let ds = 1.0 / m as f64;
    let hs: Vec<f64> = (1..=n).map(|i| h.at(i as f64 / n as f64)).collect();
    if let Some(bad) = hs.iter().find(|&&v| !(v > 0.5 && v < 1.0)) {
        return domain(format!("Volterra representation needs H in (1/2, 1) on the grid, found {bad}"));
    }

    let rows: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / n as f64;
            let kernel = MolchanKernel::new(hs[i - 1]);
            let cells = i * oversample;
            (0..cells).map(|j| cell_average(&kernel, t, j, cells, ds)).collect()
        })
        .collect();

    let mut isometry = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let t = (i + 1) as f64 / n as f64;
        let target = t.powf(2.0 * hs[i]);
        let var: f64 = row.iter().map(|w| w * w).sum::<f64>() * ds;
        let rel = var / target - 1.0;
        if !rel.is_finite() {
            return Err(Error::Quadrature(format!("non-finite kernel weight in row {}", i + 1)));
        }
        worst = worst.max(rel.abs());
        isometry.push(rel);
    }
    if worst > ISOMETRY_FAILURE {
        return Err(Error::Quadrature(format!(
            "discrete isometry off by {:.2}% (limit {:.0}%)",
            100.0 * worst,
            100.0 * ISOMETRY_FAILURE
        )));
    }
    let diagnostics = SamplerDiagnostics {
        isometry_max_rel_error: worst,
        isometry_from_index: 1,
        ..Default::default()
    };
    let sampler = GaussianPathSampler::from_rows(SimulatorKind::Volterra, h.id(), rows, m, ds.sqrt(), diagnostics);
    Ok(KernelWeights { sampler, oversample, isometry })
}

/// Mean of `K(t, ·)` over fine cell `j` of `cells` cells ending at `t`
/// (root mean square for `j = 0`, see the module docs).
fn cell_average(kernel: &MolchanKernel, t: f64, j: usize, cells: usize, ds: f64) -> f64 {
    let a = j as f64 * ds;
    let b = if j + 1 == cells { t } else { a + ds };
    let f = |s: f64| kernel.eval(t, s);
    let beta = kernel.beta();
    let f2 = |s: f64| f(s).powi(2);
    match (j == 0, j + 1 == cells) {
        (true, true) => {
            let mid = 0.5 * (a + b);
            let energy = graded_towards_left(f2, a, mid, ORIGIN_LEVELS, -2.0 * beta)
                + graded_towards_right(f2, mid, b, DIAGONAL_LEVELS, 2.0 * beta);
            (energy / (b - a)).sqrt()
        }
        (true, false) => (graded_towards_left(f2, a, b, ORIGIN_LEVELS, -2.0 * beta) / (b - a)).sqrt(),
        (false, true) => graded_towards_right(f, a, b, DIAGONAL_LEVELS, beta) / (b - a),
        (false, false) => gl(f, a, b, INTERIOR_ORDER) / (b - a),
    }
}

/// `∫_a^b f` for `f(x) ~ c (x - a)^p` near `a`: geometric panels plus a power-law tail.
fn graded_towards_left<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: u32, p: f64) -> f64 {
    let len = b - a;
    let mut acc = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += gl(&f, a + lo, a + hi, GRADED_ORDER);
        hi = lo;
    }
    acc + hi * f(a + hi) / (1.0 + p)
}

/// Mirror image of [`graded_towards_left`] for a power-law endpoint at `b`.
fn graded_towards_right<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: u32, p: f64) -> f64 {
    let len = b - a;
    let mut acc = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += gl(&f, b - hi, b - lo, GRADED_ORDER);
        hi = lo;
    }
    acc + hi * f(b - hi) / (1.0 + p)
}

/// One path `X_{t_i} = Σ_j w[i][j] ΔW_j` with `ΔW_j = sqrt(Δs) ξ_j`.
pub fn simulate_volterra(weights: &KernelWeights, noise: &mut dyn NoiseSource) -> SamplePath {
    weights.sampler.sample(noise)
}

const COV_MAX_PANELS: u32 = 400;
const DIAGONAL_PANELS: u32 = 40;

/// `Cov(X_t, X_u) = ∫_0^{t∧u} K_{H_t}(t, s) K_{H_u}(u, s) ds` by graded
/// Gauss–Legendre with `quad_points` nodes per panel.
pub fn covariance_volterra(h: &HurstFunction, t: f64, u: f64, quad_points: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&u) {
        return domain(format!("covariance needs t, u in [0, 1], got {t}, {u}"));
    }
    if quad_points == 0 {
        return domain("quad_points must be positive");
    }
    if t == 0.0 || u == 0.0 {
        return Ok(0.0);
    }
    let (ht, hu) = (h.at(t), h.at(u));
    if !(ht > 0.5 && ht < 1.0 && hu > 0.5 && hu < 1.0) {
        return domain(format!("Volterra covariance needs H in (1/2, 1), got {ht}, {hu}"));
    }
    let (kt, ku) = (MolchanKernel::new(ht), MolchanKernel::new(hu));
    let f = |s: f64| kt.eval(t, s) * ku.eval(u, s);
    let m = t.min(u);

    // [0, m/2]: integrand ~ s^{1 - H_t - H_u}
    let p0 = 1.0 - ht - hu;
    let mut left = 0.0;
    let mut hi = 0.5 * m;
    let mut converged = false;
    for _ in 0..COV_MAX_PANELS {
        let lo = 0.5 * hi;
        let panel = gl(f, lo, hi, quad_points);
        left += panel;
        hi = lo;
        if panel.abs() <= 1e-13 * left.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Quadrature(format!("graded refinement at s = 0 did not converge (t = {t}, u = {u})")));
    }
    left += hi * f(hi) / (1.0 + p0);

    // [m/2, m]: the kernel of the earlier time vanishes like (m - s)^β there
    let p1 = if t == u { 2.0 * (ht - 0.5) } else if t < u { ht - 0.5 } else { hu - 0.5 };
    let mut right = 0.0;
    let mut hi = 0.5 * m;
    for _ in 0..DIAGONAL_PANELS {
        let lo = 0.5 * hi;
        right += gl(f, m - hi, m - lo, quad_points);
        hi = lo;
    }
    right += hi * f(m - hi) / (1.0 + p1);

    let total = left + right;
    if !total.is_finite() {
        return Err(Error::Quadrature(format!("non-finite covariance at t = {t}, u = {u}")));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causality_zero_weights() {
        let h = HurstFunction::constant(0.75).unwrap();
        let w = build_kernel_weights(&h, 8, 4).unwrap();
        for i in 0..=8 {
            for j in 0..w.m() {
                let s_j = j as f64 * w.fine_step();
                if s_j >= i as f64 / 8.0 {
                    assert_eq!(w.weight(i, j), 0.0, "i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn isometry_at_one_for_constant_h() {
        let h = HurstFunction::constant(0.75).unwrap();
        let w = build_kernel_weights(&h, 64, 8).unwrap();
        assert!((w.discrete_variance(64) - 1.0).abs() < 0.02, "{}", w.discrete_variance(64));
        for i in 1..=64 {
            assert!(w.isometry_rel_errors()[i - 1].abs() < 0.005);
        }
    }

    #[test]
    fn smallest_instance() {
        let h = HurstFunction::constant(0.75).unwrap();
        let w = build_kernel_weights(&h, 1, 1).unwrap();
        assert_eq!(w.m(), 1);
        let v = w.discrete_variance(1);
        // a single cell touches the origin, so its weight is the exact RMS
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn rejects_rough_hurst() {
        let h = HurstFunction::constant(0.4).unwrap();
        assert!(build_kernel_weights(&h, 4, 2).is_err());
        assert!(build_kernel_weights(&HurstFunction::constant(0.7).unwrap(), 0, 2).is_err());
    }

    #[test]
    fn covariance_examples() {
        let h = HurstFunction::constant(0.75).unwrap();
        assert_eq!(covariance_volterra(&h, 0.0, 0.5, 12).unwrap(), 0.0);
        let d = covariance_volterra(&h, 0.5, 0.5, 12).unwrap();
        assert!((d - 0.5f64.powf(1.5)).abs() < 1e-4 * 0.5f64.powf(1.5), "{d}");
        let c = covariance_volterra(&h, 1.0, 0.5, 12).unwrap();
        assert!((c - 0.5).abs() < 1e-4, "{c}");
    }

    #[test]
    fn covariance_diagonal_for_varying_h() {
        let h = HurstFunction::sinusoidal(0.7, 0.1, 0.0).unwrap();
        for &t in &[0.1, 0.25, 0.6, 1.0] {
            let d = covariance_volterra(&h, t, t, 12).unwrap();
            let want = t.powf(2.0 * h.at(t));
            assert!((d / want - 1.0).abs() < 1e-6, "t={t}: {d} vs {want}");
        }
    }
}
