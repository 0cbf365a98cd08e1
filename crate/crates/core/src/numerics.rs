//! Quadrature rules and summation helpers shared by the numerical modules.

use std::f64::consts::FRAC_1_SQRT_2;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const MAX_CACHED_ORDER: usize = 64;

static RULES: [OnceLock<Vec<(f64, f64)>>; MAX_CACHED_ORDER + 1] =
    [const { OnceLock::new() }; MAX_CACHED_ORDER + 1];

/// Gauss–Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(order: usize) -> &'static [(f64, f64)] {
    let order = order.clamp(1, MAX_CACHED_ORDER);
    RULES[order].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 1"));
        rule.as_node_weight_pairs().to_vec()
    })
}

/// Fixed-order Gauss–Legendre on [a, b].
pub fn gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = 0.0;
    for &(x, w) in gauss_legendre(order) {
        acc += w * f(mid + half * x);
    }
    half * acc
}

/// Bisection-adaptive Gauss–Legendre. Returns `None` when `max_depth` is
/// exhausted before the local error estimate meets `abs_tol`.
///
/// Each child panel gets `abs_tol / √2` rather than half of it: near an
/// integrable endpoint singularity only one child keeps refining, and a
/// halving budget would demand accuracy far below what the panel can deliver.
pub fn adaptive_gl<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Option<f64> {
    let whole = gl(&mut *f, a, b, 10);
    adaptive_step(f, a, b, whole, abs_tol, max_depth)
}

fn adaptive_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let left = gl(&mut *f, a, m, 10);
    let right = gl(&mut *f, m, b, 10);
    let refined = left + right;
    if (refined - whole).abs() <= abs_tol || (refined - whole).abs() <= 1e-15 * refined.abs() {
        return Some(refined);
    }
    if depth == 0 {
        return None;
    }
    Some(
        adaptive_step(f, a, m, left, abs_tol * FRAC_1_SQRT_2, depth - 1)?
            + adaptive_step(f, m, b, right, abs_tol * FRAC_1_SQRT_2, depth - 1)?,
    )
}

/// Neumaier's compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Pairwise (tree) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // order 4 is exact up to degree 7
        let v = gl(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 4);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = adaptive_gl(&mut |x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 40).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        let s: CompensatedSum = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }
}
