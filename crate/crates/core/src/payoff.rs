//! Convex payoffs, the left-point Riemann sum, the chain-rule value and the
//! gap between them.
//!
//! For a convex `Ψ` with left derivative `ψ`, the gap over one step is the
//! Bregman term `Ψ(x) - Ψ(y) - ψ(y)(x - y) >= 0`. Summing those terms instead
//! of subtracting the two (large, nearly equal) totals keeps every path gap
//! nonnegative up to rounding of individual terms.

use std::fmt;
use std::sync::Arc;

use crate::drivers::SamplePath;
use crate::error::{domain, Error, Result};
use crate::numerics::{adaptive_gl, CompensatedSum};
use crate::theory::phi;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Gaps below this are treated as a broken convexity assumption.
pub const GAP_FAILURE: f64 = -1e-9;
/// Default support of the quadratic payoff's curvature density.
pub const QUADRATIC_SUPPORT: (f64, f64) = (-8.0, 8.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffKind {
    /// `(x - a)^+`
    Call { a: f64 },
    /// `|x - a|`
    Abs { a: f64 },
    /// `x² / 2`, curvature density `½` on `[lo, hi]`
    Quadratic { lo: f64, hi: f64 },
    Custom,
}

/// Nonnegative curvature density on a bounded support.
#[derive(Clone)]
pub struct MuDensity {
    pub density: RealFn,
    pub support: (f64, f64),
}

/// Convex `Ψ` with left derivative `ψ` and curvature measure `μ`.
///
/// `μ` follows the convention `Ψ(x) - Ψ(y) - ψ(y)(x - y) =
/// 2 ∫ [(x - a)^+ - (y - a)^+ - 1_{y > a}(x - y)] μ(da)`, i.e. it is half of
/// the distributional second derivative.
#[derive(Clone)]
pub struct ConvexPayoff {
    kind: PayoffKind,
    name: String,
    psi: RealFn,
    psi_left: RealFn,
    mu_atoms: Vec<(f64, f64)>,
    mu_density: Option<MuDensity>,
}

impl fmt::Debug for ConvexPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexPayoff")
            .field("name", &self.name)
            .field("mu_atoms", &self.mu_atoms)
            .field("mu_density_support", &self.mu_density.as_ref().map(|d| d.support))
            .finish()
    }
}

pub fn make_call_payoff(a0: f64) -> ConvexPayoff {
    ConvexPayoff {
        kind: PayoffKind::Call { a: a0 },
        name: format!("call(a={a0})"),
        psi: Arc::new(move |x| (x - a0).max(0.0)),
        psi_left: Arc::new(move |x| if x > a0 { 1.0 } else { 0.0 }),
        mu_atoms: vec![(a0, 0.5)],
        mu_density: None,
    }
}

pub fn make_abs_payoff(a0: f64) -> ConvexPayoff {
    ConvexPayoff {
        kind: PayoffKind::Abs { a: a0 },
        name: format!("abs(a={a0})"),
        psi: Arc::new(move |x| (x - a0).abs()),
        psi_left: Arc::new(move |x| if x > a0 { 1.0 } else { -1.0 }),
        mu_atoms: vec![(a0, 1.0)],
        mu_density: None,
    }
}

/// `Ψ(x) = x²/2` with curvature density `½` on [`QUADRATIC_SUPPORT`].
pub fn make_quadratic_payoff() -> ConvexPayoff {
    make_quadratic_payoff_on(QUADRATIC_SUPPORT.0, QUADRATIC_SUPPORT.1).expect("default support is valid")
}

/// `Ψ(x) = x²/2` with curvature density `½` on `[lo, hi]` only. The
/// convexity identity, and hence the leading constant, describes paths that
/// stay inside `[lo, hi]`; keep the support wide relative to the path range.
pub fn make_quadratic_payoff_on(lo: f64, hi: f64) -> Result<ConvexPayoff> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return domain(format!("quadratic payoff support must be a finite interval, got [{lo}, {hi}]"));
    }
    Ok(ConvexPayoff {
        kind: PayoffKind::Quadratic { lo, hi },
        name: format!("quadratic(support=[{lo},{hi}])"),
        psi: Arc::new(|x| 0.5 * x * x),
        psi_left: Arc::new(|x| x),
        mu_atoms: Vec::new(),
        mu_density: Some(MuDensity { density: Arc::new(|_| 0.5), support: (lo, hi) }),
    })
}

impl ConvexPayoff {
    /// A user-defined payoff. Atoms need nonnegative weights; convexity
    /// itself is only checked numerically (see [`Self::left_derivative_is_monotone`]).
    pub fn custom(
        name: impl Into<String>,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi_left: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mu_atoms: Vec<(f64, f64)>,
        mu_density: Option<MuDensity>,
    ) -> Result<Self> {
        if mu_atoms.iter().any(|&(a, w)| !a.is_finite() || !(w >= 0.0)) {
            return domain("curvature atoms need finite locations and nonnegative weights");
        }
        if let Some(d) = &mu_density {
            if !(d.support.0 < d.support.1) {
                return domain("curvature density needs a nonempty support");
            }
        }
        Ok(Self {
            kind: PayoffKind::Custom,
            name: name.into(),
            psi: Arc::new(psi),
            psi_left: Arc::new(psi_left),
            mu_atoms,
            mu_density,
        })
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn psi(&self, x: f64) -> f64 {
        (self.psi)(x)
    }

    pub fn psi_left(&self, x: f64) -> f64 {
        (self.psi_left)(x)
    }

    pub fn mu_atoms(&self) -> &[(f64, f64)] {
        &self.mu_atoms
    }

    pub fn mu_density(&self) -> Option<&MuDensity> {
        self.mu_density.as_ref()
    }

    /// `Ψ(x) - Ψ(y) - ψ(y)(x - y)`, in a cancellation-free form for the
    /// built-in payoffs.
    #[inline]
    pub fn bregman(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            PayoffKind::Call { a } => call_bregman(a, x, y),
            PayoffKind::Abs { a } => 2.0 * call_bregman(a, x, y),
            PayoffKind::Quadratic { .. } => 0.5 * (x - y) * (x - y),
            PayoffKind::Custom => self.psi(x) - self.psi(y) - self.psi_left(y) * (x - y),
        }
    }

    /// Right-hand side of the convexity identity,
    /// `2 ∫ [(x - a)^+ - (y - a)^+ - 1_{y > a}(x - y)] μ(da)`.
    pub fn convexity_integral(&self, x: f64, y: f64) -> Result<f64> {
        let mut total = 0.0;
        for &(a, w) in &self.mu_atoms {
            total += 2.0 * w * call_bregman(a, x, y);
        }
        if let Some(d) = &self.mu_density {
            // the integrand is piecewise linear in a with kinks at x and y
            let (lo, hi) = d.support;
            let mut cuts = vec![lo, hi];
            cuts.extend([x, y].into_iter().filter(|c| *c > lo && *c < hi));
            cuts.sort_by(f64::total_cmp);
            let mut f = |a: f64| (d.density)(a) * call_bregman(a, x, y);
            for w in cuts.windows(2) {
                total += 2.0
                    * adaptive_gl(&mut f, w[0], w[1], 1e-13, 30)
                        .ok_or_else(|| Error::Quadrature("curvature density integral did not converge".into()))?;
            }
        }
        Ok(total)
    }

    /// `|Ψ(x) - Ψ(y) - ψ(y)(x - y) - convexity_integral(x, y)|`, using the
    /// naive left-hand side so the two sides are computed independently.
    pub fn convexity_identity_residual(&self, x: f64, y: f64) -> Result<f64> {
        let lhs = self.psi(x) - self.psi(y) - self.psi_left(y) * (x - y);
        Ok((lhs - self.convexity_integral(x, y)?).abs())
    }

    /// `∫ φ dμ`; finite for every built-in payoff.
    pub fn mu_phi_integral(&self) -> Result<f64> {
        let mut total: f64 = self.mu_atoms.iter().map(|&(a, w)| w * phi(a)).sum();
        if let Some(d) = &self.mu_density {
            let (lo, hi) = d.support;
            let mut f = |a: f64| (d.density)(a) * phi(a);
            total += adaptive_gl(&mut f, lo, hi, 1e-13, 30)
                .ok_or_else(|| Error::Quadrature("∫φ dμ did not converge".into()))?;
        }
        Ok(total)
    }

    /// Convexity surrogate: `ψ` nondecreasing on `points` equally spaced
    /// nodes of `[lo, hi]`.
    pub fn left_derivative_is_monotone(&self, lo: f64, hi: f64, points: usize) -> bool {
        let step = (hi - lo) / (points.max(2) - 1) as f64;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..points.max(2) {
            let v = self.psi_left(lo + k as f64 * step);
            if v < prev {
                return false;
            }
            prev = v;
        }
        true
    }
}

/// `(x - a)^+ - (y - a)^+ - 1_{y > a}(x - y)`, written as the one nonzero
/// branch so no cancellation occurs.
#[inline]
fn call_bregman(a: f64, x: f64, y: f64) -> f64 {
    if y > a {
        (a - x).max(0.0)
    } else {
        (x - a).max(0.0)
    }
}

/// `Σ_k ψ(X_{t_{k-1}}) (X_{t_k} - X_{t_{k-1}})`.
pub fn riemann_sum(path: &SamplePath, payoff: &ConvexPayoff) -> f64 {
    riemann_sum_values(path.values(), payoff)
}

/// `Ψ(X_1) - Ψ(X_0)`.
pub fn exact_integral(path: &SamplePath, payoff: &ConvexPayoff) -> f64 {
    exact_integral_values(path.values(), payoff)
}

/// Exact value minus Riemann sum, accumulated term by term.
pub fn discretization_gap(path: &SamplePath, payoff: &ConvexPayoff) -> Result<f64> {
    gap_values(path.values(), payoff)
}

pub(crate) fn riemann_sum_values(values: &[f64], payoff: &ConvexPayoff) -> f64 {
    values.windows(2).map(|w| payoff.psi_left(w[0]) * (w[1] - w[0])).collect::<CompensatedSum>().value()
}

pub(crate) fn exact_integral_values(values: &[f64], payoff: &ConvexPayoff) -> f64 {
    payoff.psi(values[values.len() - 1]) - payoff.psi(values[0])
}

pub(crate) fn gap_values(values: &[f64], payoff: &ConvexPayoff) -> Result<f64> {
    let gap = values.windows(2).map(|w| payoff.bregman(w[1], w[0])).collect::<CompensatedSum>().value();
    if gap < GAP_FAILURE || gap.is_nan() {
        return Err(Error::Invariant(format!("discretization gap {gap} is negative; is the payoff convex?")));
    }
    Ok(gap)
}
