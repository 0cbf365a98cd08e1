//! Truncated moving-average representation
//!
//! ```text
//! X_t = C1(H_t) ∫_{-∞}^t [(t - s)_+^{H_t - 1/2} - (-s)_+^{H_t - 1/2}] dW_s
//! ```
//!
//! discretized on `[-T, 1]`. Noise on `[-1, 1]` uses the uniform fine grid of
//! width `1/(n * oversample)`; the far past `[-T, -1]` uses geometric cells
//! because the integrand there is smooth and decays like `|s|^{H - 3/2}`.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::hurst::HurstFunction;
use crate::numerics::gl;

use super::constants::c1_unchecked;
use super::{GaussianPathSampler, NoiseSource, SamplePath, SamplerDiagnostics, SimulatorKind, DEFAULT_OVERSAMPLE};

/// Default truncation horizon. Far larger than strictly needed for rate
/// experiments, but the geometric past grid makes it almost free and it keeps
/// the variance deficit well below Monte Carlo error.
pub const DEFAULT_TRUNCATION: f64 = 1e6;
/// Geometric past cells per doubling of `|s|`.
const PAST_CELLS_PER_OCTAVE: f64 = 16.0;
const PAST_ORDER: usize = 4;

#[derive(Debug, Clone)]
pub struct MovingAverageSampler {
    sampler: GaussianPathSampler,
    truncation: f64,
    past_cells: usize,
}

impl MovingAverageSampler {
    pub fn new(h: &HurstFunction, n: usize, truncation: f64) -> Result<Self> {
        Self::with_oversample(h, n, truncation, DEFAULT_OVERSAMPLE)
    }

    pub fn with_oversample(h: &HurstFunction, n: usize, truncation: f64, oversample: usize) -> Result<Self> {
        if n == 0 || oversample == 0 {
            return domain("need n >= 1 and oversample >= 1");
        }
        if !(truncation >= 1.0 && truncation.is_finite()) {
            return domain(format!("truncation horizon must be a finite T >= 1, got {truncation}"));
        }
        let hs: Vec<f64> = (1..=n).map(|i| h.at(i as f64 / n as f64)).collect();
        if let Some(bad) = hs.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return domain(format!("moving-average representation needs H in (0, 1), found {bad}"));
        }

        let past = past_edges(truncation);
        let m = n * oversample;
        let uniform_edge = |j: usize| (j as f64 - m as f64) / m as f64;
        let noise_dim = past.len() - 1 + 2 * m;

        let rows: Vec<Vec<f64>> = (1..=n)
            .into_par_iter()
            .map(|i| {
                let t = i as f64 / n as f64;
                let beta = hs[i - 1] - 0.5;
                let c = c1_unchecked(hs[i - 1]);
                let mut row = Vec::with_capacity(past.len() - 1 + m + i * oversample);
                for w in past.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let integral = gl(|s: f64| past_integrand(beta, t, s), a, b, PAST_ORDER);
                    row.push(c * integral / (b - a).sqrt());
                }
                for j in 0..m + i * oversample {
                    let (a, b) = (uniform_edge(j), uniform_edge(j + 1));
                    row.push(c * near_integral(beta, t, a, b) / (b - a).sqrt());
                }
                row
            })
            .collect();

        let from = oversample.min(n);
        let mut worst: f64 = 0.0;
        for i in from..=n {
            let target = (i as f64 / n as f64).powf(2.0 * hs[i - 1]);
            let var: f64 = rows[i - 1].iter().map(|w| w * w).sum();
            worst = worst.max((var / target - 1.0).abs());
        }
        let diagnostics = SamplerDiagnostics {
            isometry_max_rel_error: worst,
            isometry_from_index: from,
            jitter: None,
            truncation_bias_at_one: Some(truncation_variance_bias(hs[n - 1], 1.0, truncation)),
        };
        let sampler =
            GaussianPathSampler::from_rows(SimulatorKind::MovingAverage, h.id(), rows, noise_dim, 1.0, diagnostics);
        Ok(Self { sampler, truncation, past_cells: past.len() - 1 })
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Number of geometric noise cells on `[-T, -1]`.
    pub fn past_cells(&self) -> usize {
        self.past_cells
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

/// Builds the map and draws one path.
pub fn simulate_moving_average(
    h: &HurstFunction,
    n: usize,
    truncation: f64,
    noise: &mut dyn NoiseSource,
) -> Result<SamplePath> {
    Ok(MovingAverageSampler::new(h, n, truncation)?.sample(noise))
}

/// Leading-order variance lost by cutting the integral at `-T`:
/// `C1² β² t² T^{2β-1} / (1 - 2β)` with `β = H - 1/2`.
pub fn truncation_variance_bias(h: f64, t: f64, truncation: f64) -> f64 {
    let beta = h - 0.5;
    let c = c1_unchecked(h);
    c * c * beta * beta * t * t * truncation.powf(2.0 * beta - 1.0) / (1.0 - 2.0 * beta)
}

/// Cell edges `-T = e_0 < ... < e_K = -1`, geometric in `|s|`.
fn past_edges(truncation: f64) -> Vec<f64> {
    let octaves = truncation.log2();
    let cells = (octaves * PAST_CELLS_PER_OCTAVE).ceil().max(1.0) as usize;
    if truncation == 1.0 {
        return vec![-1.0];
    }
    let ratio = truncation.powf(1.0 / cells as f64);
    let mut edges: Vec<f64> = (0..=cells).map(|k| -truncation / ratio.powi(k as i32)).collect();
    edges[0] = -truncation;
    edges[cells] = -1.0;
    edges
}

/// `(t - s)^β - (-s)^β` for `s < 0`, written to avoid cancellation when `|s| ≫ t`.
fn past_integrand(beta: f64, t: f64, s: f64) -> f64 {
    let u = -s;
    u.powf(beta) * (beta * (t / u).ln_1p()).exp_m1()
}

/// `∫_a^b [(t - s)_+^β - (-s)_+^β] ds` for `-1 <= a < b <= t`.
fn near_integral(beta: f64, t: f64, a: f64, b: f64) -> f64 {
    let p = beta + 1.0;
    let pos = |x: f64| if x > 0.0 { x.powf(p) } else { 0.0 };
    (pos(t - a) - pos(t - b) - pos(-a) + pos(-b)) / p
}
