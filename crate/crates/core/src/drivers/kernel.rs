//! The Molchan kernel
//!
//! ```text
//! K_H(t, s) = C2(H) s^{1/2-H} ∫_s^t (v - s)^{H-3/2} v^{H-1/2} dv,   0 < s < t,  H in (1/2, 1).
//! ```
//!
//! With `β = H - 1/2` and `v = s / x` the inner integral becomes
//! `s^{2β} ∫_{s/t}^1 (1-x)^{β-1} x^{-1-2β} dx`. On `x < 1/2` the factor
//! `(1-x)^{β-1}` is expanded in its binomial series and integrated term by
//! term; on `x >= 1/2` the substitution `y = (1-x)^β` removes the endpoint
//! singularity and leaves a smooth integrand for Gauss–Legendre.

use crate::error::{domain, Result};
use crate::numerics::gl;

use super::constants::c1_unchecked;

const SERIES_MAX_TERMS: usize = 160;
const TAIL_ORDER: usize = 16;

/// `K_H(t, s)`; requires `1/2 < H < 1` and `0 < s < t <= 1`.
pub fn molchan_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return domain(format!("Molchan kernel needs H in (1/2, 1), got {h}"));
    }
    if !(s > 0.0 && s < t && t <= 1.0) {
        return domain(format!("Molchan kernel needs 0 < s < t <= 1, got t = {t}, s = {s}"));
    }
    Ok(molchan_unchecked(h, t, s))
}

/// Kernel without argument checks; `s >= t` yields 0.
#[inline]
pub(crate) fn molchan_unchecked(h: f64, t: f64, s: f64) -> f64 {
    MolchanKernel::new(h).eval(t, s)
}

/// `K_H` for one fixed `H` with the normalization constant precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MolchanKernel {
    beta: f64,
    c2: f64,
}

impl MolchanKernel {
    pub(crate) fn new(h: f64) -> Self {
        let beta = h - 0.5;
        Self { beta, c2: c1_unchecked(h) * beta }
    }

    pub(crate) fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub(crate) fn eval(&self, t: f64, s: f64) -> f64 {
        if s >= t || s <= 0.0 {
            return 0.0;
        }
        self.c2 * s.powf(-self.beta) * inner_integral(self.beta, t, s)
    }
}

/// `∫_s^t (v - s)^{β-1} v^β dv` for `0 < s < t`.
pub(crate) fn inner_integral(beta: f64, t: f64, s: f64) -> f64 {
    let z = s / t;
    let s2b = s.powf(2.0 * beta);
    if z >= 0.5 {
        return s2b * near_diagonal_part(beta, z);
    }
    // Σ_k c_k ∫_z^{1/2} x^{k-1-2β} dx with c_k the binomial coefficients of (1-x)^{β-1},
    // multiplied through by s^{2β} so that nothing overflows as z -> 0.
    let p = (2.0 * s).powf(2.0 * beta);
    let q = t.powf(2.0 * beta);
    let mut coeff = 1.0;
    let mut half_pow = 1.0;
    let mut z_pow = 1.0;
    let mut series = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        let term = coeff * (p * half_pow - q * z_pow) / (kf - 2.0 * beta);
        series += term;
        if k > 0 && term.abs() <= 1e-17 * series.abs() {
            break;
        }
        coeff *= (kf + 1.0 - beta) / (kf + 1.0);
        half_pow *= 0.5;
        z_pow *= z;
    }
    series + s2b * near_diagonal_part(beta, 0.5)
}

/// `∫_{x0}^1 (1-x)^{β-1} x^{-1-2β} dx` for `x0 >= 1/2`, via `y = (1-x)^β`.
fn near_diagonal_part(beta: f64, x0: f64) -> f64 {
    let upper = (1.0 - x0).powf(beta);
    let inv_beta = 1.0 / beta;
    let exponent = -1.0 - 2.0 * beta;
    let f = |y: f64| (1.0 - y.powf(inv_beta)).powf(exponent);
    // y^{1/β} is only finitely smooth at 0; grade the panels towards it.
    let cuts = [0.0, upper / 64.0, upper / 8.0, upper / 2.0];
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += gl(f, w[0], w[1], TAIL_ORDER);
    }
    // for small β, y^{1/β} climbs steeply near the upper end
    let panels = (0.25 * inv_beta).ceil().max(1.0) as usize;
    let width = 0.5 * upper / panels as f64;
    for j in 0..panels {
        let a = 0.5 * upper + j as f64 * width;
        acc += gl(f, a, a + width, TAIL_ORDER);
    }
    acc * inv_beta
}
