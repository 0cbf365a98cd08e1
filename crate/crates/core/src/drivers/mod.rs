//! Sample-path generators for multifractional Brownian motion on the grid
//! `t_k = k / n`.
//!
//! Every simulator here is a fixed linear map applied to i.i.d. standard
//! normals, so they share one sampler type, [`GaussianPathSampler`]. Row `i`
//! of the map only touches a prefix of the noise vector (noise is ordered in
//! time), which keeps the map causal and lets the batched product skip the
//! zero upper triangle.

pub mod cholesky;
pub mod constants;
pub mod kernel;
pub mod moving_average;
pub mod volterra;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use cholesky::{covariance_matrix, fbm_covariance, simulate_cholesky, CholeskySampler};
pub use constants::{c1, c1_gamma_ratio_form, c2, c3};
pub use kernel::molchan_kernel;
pub use moving_average::{simulate_moving_average, truncation_variance_bias, MovingAverageSampler};
pub use volterra::{build_kernel_weights, covariance_volterra, simulate_volterra, KernelWeights};

/// Default fine-grid refinement per coarse cell.
pub const DEFAULT_OVERSAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorKind {
    Volterra,
    Cholesky,
    MovingAverage,
}

impl SimulatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulatorKind::Volterra => "volterra",
            SimulatorKind::Cholesky => "cholesky",
            SimulatorKind::MovingAverage => "moving_average",
        }
    }
}

/// One trajectory `X_{t_0}, ..., X_{t_n}` with `X_{t_0} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    values: Vec<f64>,
    pub hurst_id: String,
    pub simulator_id: String,
}

impl SamplePath {
    /// Wraps hand-built values; requires at least two nodes and `values[0] == 0`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::with_ids(values, "manual", "manual")
    }

    pub fn with_ids(values: Vec<f64>, hurst_id: impl Into<String>, simulator_id: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return domain("a path needs at least two grid nodes");
        }
        if values[0] != 0.0 {
            return domain(format!("paths start at 0, got X_0 = {}", values[0]));
        }
        Ok(Self { values, hurst_id: hurst_id.into(), simulator_id: simulator_id.into() })
    }

    /// Number of subintervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid time of node `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n() as f64
    }
}

/// Supplier of i.i.d. standard normal variates.
pub trait NoiseSource {
    fn fill_standard_normal(&mut self, out: &mut [f64]);
}

/// The deterministic random stream owned by one Monte Carlo path.
///
/// The ChaCha key is derived from `(master_seed, n)` and the path index
/// selects the ChaCha stream, so every path is reproducible on its own.
pub struct PathStream {
    rng: ChaCha8Rng,
}

impl PathStream {
    pub fn new(master_seed: u64, n: usize, path_index: u64) -> Self {
        let key = splitmix64(master_seed ^ splitmix64(n as u64 ^ 0x6d62_6d5f_6772_6964));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(path_index);
        Self { rng }
    }
}

impl NoiseSource for PathStream {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.rng.sample(StandardNormal);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Degenerate stream of zeros (test mode).
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Replays a fixed list of variates, cycling when exhausted (test mode).
#[derive(Debug, Clone)]
pub struct FixedNoise {
    values: Vec<f64>,
    pos: usize,
}

impl FixedNoise {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "FixedNoise needs at least one value");
        Self { values, pos: 0 }
    }
}

impl NoiseSource for FixedNoise {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.values[self.pos];
            self.pos = (self.pos + 1) % self.values.len();
        }
    }
}

/// Summary of how well a sampler reproduces `Var X_t = t^{2 H_t}`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SamplerDiagnostics {
    /// Largest `|Var_model(t_i) / t_i^{2 H_{t_i}} - 1|` over the checked rows.
    pub isometry_max_rel_error: f64,
    /// First coarse index included in the isometry check.
    pub isometry_from_index: usize,
    /// Jitter added to the covariance diagonal before factorization.
    pub jitter: Option<f64>,
    /// Estimated variance lost to truncating the moving-average integral, at t = 1.
    pub truncation_bias_at_one: Option<f64>,
}

/// `X_{t_i} = scale * Σ_j rows[i-1][j] ξ_j` with `ξ` standard normal.
#[derive(Debug, Clone)]
pub struct GaussianPathSampler {
    kind: SimulatorKind,
    hurst_id: String,
    n: usize,
    noise_dim: usize,
    noise_scale: f64,
    rows: Vec<Vec<f64>>,
    diagnostics: SamplerDiagnostics,
}

const PATH_BLOCK: usize = 64;
const NOISE_BLOCK: usize = 512;

impl GaussianPathSampler {
    pub(crate) fn from_rows(
        kind: SimulatorKind,
        hurst_id: String,
        rows: Vec<Vec<f64>>,
        noise_dim: usize,
        noise_scale: f64,
        diagnostics: SamplerDiagnostics,
    ) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() <= noise_dim));
        Self { kind, hurst_id, n: rows.len(), noise_dim, noise_scale, rows, diagnostics }
    }

    pub fn kind(&self) -> SimulatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn hurst_id(&self) -> &str {
        &self.hurst_id
    }

    pub fn diagnostics(&self) -> &SamplerDiagnostics {
        &self.diagnostics
    }

    /// Number of noise variates that `X_{t_i}` depends on (causality structure).
    pub fn support_len(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.rows[i - 1].len()
        }
    }

    /// Model variance of `X_{t_i}` implied by the linear map.
    pub fn implied_variance(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let ss: f64 = self.rows[i - 1].iter().map(|w| w * w).sum();
        ss * self.noise_scale * self.noise_scale
    }

    /// Model covariance of `X_{t_i}` and `X_{t_k}`.
    pub fn implied_covariance(&self, i: usize, k: usize) -> f64 {
        if i == 0 || k == 0 {
            return 0.0;
        }
        let (a, b) = (&self.rows[i - 1], &self.rows[k - 1]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot * self.noise_scale * self.noise_scale
    }

    /// Draws one path from `noise`.
    pub fn sample(&self, noise: &mut dyn NoiseSource) -> SamplePath {
        let mut xi = vec![0.0; self.noise_dim];
        noise.fill_standard_normal(&mut xi);
        let values = self.combine(&xi, 1);
        self.wrap(values)
    }

    /// Path `path_index` of the stream family `(master_seed, n)`.
    pub fn sample_seeded(&self, master_seed: u64, path_index: u64) -> SamplePath {
        self.sample(&mut PathStream::new(master_seed, self.n, path_index))
    }

    /// Paths `first .. first + count` of `(master_seed, n)`, flattened with
    /// stride `n + 1`. Bit-identical to calling [`Self::sample_seeded`] per path.
    pub fn sample_block(&self, master_seed: u64, first: u64, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count * (self.n + 1));
        let mut start = 0;
        while start < count {
            let batch = PATH_BLOCK.min(count - start);
            let mut xi = vec![0.0; batch * self.noise_dim];
            for (b, chunk) in xi.chunks_mut(self.noise_dim).enumerate() {
                PathStream::new(master_seed, self.n, first + (start + b) as u64).fill_standard_normal(chunk);
            }
            out.extend(self.combine(&xi, batch));
            start += batch;
        }
        out
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> SamplePath {
        SamplePath { values, hurst_id: self.hurst_id.clone(), simulator_id: self.kind.as_str().to_string() }
    }

    /// Applies the map to `batch` noise vectors stored path-major. Each output
    /// accumulates its terms in ascending noise index regardless of `batch`,
    /// which makes results independent of how paths are grouped.
    fn combine(&self, xi: &[f64], batch: usize) -> Vec<f64> {
        let (n, m) = (self.n, self.noise_dim);
        let mut z = vec![0.0; m * batch];
        for b in 0..batch {
            for j in 0..m {
                z[j * batch + b] = self.noise_scale * xi[b * m + j];
            }
        }
        let mut acc = vec![0.0; n * batch];
        let mut j0 = 0;
        while j0 < m {
            let j1 = (j0 + NOISE_BLOCK).min(m);
            for (row, out) in self.rows.iter().zip(acc.chunks_mut(batch)) {
                let end = row.len().min(j1);
                for j in j0..end {
                    let w = row[j];
                    let zj = &z[j * batch..(j + 1) * batch];
                    for (o, zz) in out.iter_mut().zip(zj) {
                        *o += w * zz;
                    }
                }
            }
            j0 = j1;
        }
        let mut values = vec![0.0; (n + 1) * batch];
        for b in 0..batch {
            for i in 0..n {
                values[b * (n + 1) + i + 1] = acc[i * batch + b];
            }
        }
        values
    }
}
