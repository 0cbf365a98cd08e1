//! Normalization constants of the three classical mBm representations.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{domain, Result};

fn check_open(h: f64, lo: f64, name: &str) -> Result<()> {
    if !(h > lo && h < 1.0) {
        return domain(format!("{name}: H = {h} outside ({lo}, 1)"));
    }
    Ok(())
}

/// Moving-average (Mandelbrot–van Ness) constant
/// `C1(H) = (2H Γ(2H) sin(πH))^{1/2} / Γ(H + 1/2)`.
pub fn c1(h: f64) -> Result<f64> {
    check_open(h, 0.0, "c1")?;
    Ok(c1_unchecked(h))
}

#[inline]
pub(crate) fn c1_unchecked(h: f64) -> f64 {
    (2.0 * h * gamma(2.0 * h) * (PI * h).sin()).sqrt() / gamma(h + 0.5)
}

/// The equivalent form `(2H Γ(3/2 - H) / (Γ(H + 1/2) Γ(2 - 2H)))^{1/2}`.
pub fn c1_gamma_ratio_form(h: f64) -> Result<f64> {
    check_open(h, 0.0, "c1")?;
    Ok((2.0 * h * gamma(1.5 - h) / (gamma(h + 0.5) * gamma(2.0 - 2.0 * h))).sqrt())
}

/// Molchan-kernel constant `C2(H) = C1(H) (H - 1/2)`.
pub fn c2(h: f64) -> Result<f64> {
    check_open(h, 0.5, "c2")?;
    Ok(c1_unchecked(h) * (h - 0.5))
}

/// Harmonizable constant `C3(H) = (H Γ(2H) sin(πH) / π)^{1/2}`.
pub fn c3(h: f64) -> Result<f64> {
    check_open(h, 0.0, "c3")?;
    Ok((h * gamma(2.0 * h) * (PI * h).sin() / PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values computed with mpmath at 30 digits
    const C1_075: f64 = 1.069_644_635_031_990_3;
    const C1_06: f64 = 1.076_005_184_131_807_2;
    const C1_09: f64 = 0.811_220_648_143_352_4;
    const C3_075: f64 = 0.386_785_929_359_558_34;

    #[test]
    fn c1_at_half_is_one() {
        assert!((c1(0.5).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn c1_matches_high_precision_values() {
        for (h, want) in [(0.75, C1_075), (0.6, C1_06), (0.9, C1_09)] {
            let got = c1(h).unwrap();
            assert!((got / want - 1.0).abs() < 1e-13, "H={h}: {got} vs {want}");
        }
    }

    #[test]
    fn both_c1_forms_agree() {
        for k in 1..100 {
            let h = k as f64 / 100.0;
            let a = c1(h).unwrap();
            let b = c1_gamma_ratio_form(h).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "H={h}: {a} vs {b}");
        }
    }

    #[test]
    fn c2_examples() {
        assert!((c2(0.75).unwrap() - 0.267_411_158_757_997_6).abs() < 1e-13);
        assert!((c2(0.9).unwrap() - c1(0.9).unwrap() * 0.4).abs() < 1e-15);
        assert!(c2(0.5 + 1e-9).unwrap() < 1e-8);
        assert!(c2(0.5).is_err());
        assert!(c2(0.3).is_err());
    }

    #[test]
    fn c3_examples() {
        let want = (1.0 / (2.0 * PI)).sqrt();
        assert!((c3(0.5).unwrap() - want).abs() < 1e-14);
        assert!((c3(0.75).unwrap() / C3_075 - 1.0).abs() < 1e-13);
        assert!(c3(0.25).unwrap() > 0.0);
        assert!(c3(0.0).is_err() && c3(1.0).is_err());
    }
}
