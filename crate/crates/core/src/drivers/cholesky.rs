//! Exact-in-distribution sampling from the covariance matrix of
//! `(X_{t_1}, ..., X_{t_n})`.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;

use super::volterra::covariance_volterra;
use super::{GaussianPathSampler, NoiseSource, SamplePath, SamplerDiagnostics, SimulatorKind};

/// Diagonal shifts tried in order before giving up on factorization.
const JITTER_LADDER: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];
const DEFAULT_QUAD_POINTS: usize = 12;

/// fBm covariance `½ (t^{2H} + u^{2H} - |t - u|^{2H})`.
pub fn fbm_covariance(h: f64, t: f64, u: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (t.powf(e) + u.powf(e) - (t - u).abs().powf(e))
}

/// Covariance of the grid values `X_{t_1..t_n}`.
///
/// Constant `H` uses the fBm closed form; otherwise each entry is the
/// kernel-product integral of the Volterra representation.
pub fn covariance_matrix(h: &HurstFunction, n: usize, quad_points: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return domain("covariance matrix needs n >= 1");
    }
    let t = |i: usize| (i + 1) as f64 / n as f64;
    if h.is_constant() {
        let hv = h.h_min();
        return Ok(DMatrix::from_fn(n, n, |i, k| fbm_covariance(hv, t(i), t(k))));
    }
    let lower: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|k| covariance_volterra(h, t(i), t(k), quad_points)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, k| if k <= i { lower[i][k] } else { lower[k][i] }))
}

/// Lower-triangular factor `L` with `L Lᵀ = Σ + ε I`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    sampler: GaussianPathSampler,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(h: &HurstFunction, n: usize) -> Result<Self> {
        let cov = covariance_matrix(h, n, DEFAULT_QUAD_POINTS)?;
        Self::from_covariance(cov, h.id())
    }

    /// Factorizes an arbitrary covariance of the grid values `X_{t_1..t_n}`.
    pub fn from_covariance(cov: DMatrix<f64>, hurst_id: String) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || cov.ncols() != n {
            return domain(format!("covariance must be square and nonempty, got {}x{}", cov.nrows(), cov.ncols()));
        }
        for eps in JITTER_LADDER {
            let shifted = &cov + DMatrix::<f64>::identity(n, n) * eps;
            if let Some(ch) = Cholesky::new(shifted) {
                let factor = ch.l();
                let rows = (0..n).map(|i| (0..=i).map(|k| factor[(i, k)]).collect()).collect();
                let diagnostics = SamplerDiagnostics {
                    isometry_max_rel_error: 0.0,
                    isometry_from_index: 1,
                    jitter: Some(eps),
                    truncation_bias_at_one: None,
                };
                let sampler =
                    GaussianPathSampler::from_rows(SimulatorKind::Cholesky, hurst_id, rows, n, 1.0, diagnostics);
                return Ok(Self { sampler, factor });
            }
        }
        Err(Error::Factorization(format!(
            "covariance of size {n} is not positive definite after jitter {:e}",
            JITTER_LADDER[JITTER_LADDER.len() - 1]
        )))
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.sampler.diagnostics().jitter.unwrap_or(0.0)
    }

    pub fn sampler(&self) -> &GaussianPathSampler {
        &self.sampler
    }

    pub fn into_sampler(self) -> GaussianPathSampler {
        self.sampler
    }

    pub fn sample(&self, noise: &mut dyn NoiseSource) -> SamplePath {
        self.sampler.sample(noise)
    }
}

/// Builds the factor and draws one path; reuse [`CholeskySampler`] for many paths.
pub fn simulate_cholesky(h: &HurstFunction, n: usize, noise: &mut dyn NoiseSource) -> Result<SamplePath> {
    Ok(CholeskySampler::new(h, n)?.sample(noise))
}
