use std::f64::consts::PI;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Beyond this |z| the tail is taken from the continued fraction.
const SERIES_LIMIT: f64 = 3.0;
const TAIL_CF_TERMS: usize = 60;

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Upper tail `Q(x) = 1 - Phi(x)` for `x >= SERIES_LIMIT`, from the Laplace
/// continued fraction `phi(x) / (x + 1/(x + 2/(x + 3/(x + ...))))`.
/// 60 terms reach full double precision at x = 3.
fn upper_tail_cf(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=TAIL_CF_TERMS).rev() {
        t = x + k as f64 / t;
    }
    std_normal_pdf(x) / t
}

/// `Phi(z) - 1/2` by the odd Taylor series `phi(z) * sum z^(2k+1) / (2k+1)!!`.
fn central_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 1.0;
    loop {
        term *= z2 / (2.0 * k + 1.0);
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
        k += 1.0;
    }
    std_normal_pdf(z) * sum
}

/// Standard normal CDF, absolute error below 1e-15 and small relative error
/// in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.abs() <= SERIES_LIMIT {
        0.5 + central_series(z)
    } else if z < 0.0 {
        upper_tail_cf(-z)
    } else {
        1.0 - upper_tail_cf(z)
    }
}

/// Upper tail `1 - Phi(z)` without cancellation for large `z`.
pub fn std_normal_sf(z: f64) -> f64 {
    std_normal_cdf(-z)
}

/// Inverse of [`std_normal_cdf`].
///
/// Starts from the Abramowitz–Stegun 26.2.23 rational approximation
/// (|error| < 4.5e-4) and polishes with Halley steps on the lower tail.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile probability {p} outside (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work with the smaller tail so the residual keeps relative precision.
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let t = (-2.0 * q.ln()).sqrt();
    let num = 2.515_517 + t * (0.802_853 + t * 0.010_328);
    let den = 1.0 + t * (1.432_788 + t * (0.189_269 + t * 0.001_308));
    // x approximates the lower-tail quantile, x < 0.
    let mut x = -(t - num / den);
    for _ in 0..50 {
        let err = std_normal_cdf(x) - q;
        let u = err / std_normal_pdf(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * -x)
}

/// Stirling series for `ln Gamma(x)`, accurate to double precision for x >= 10.
fn ln_gamma_stirling(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return f64::NAN;
    }
    if x >= 10.0 {
        return ln_gamma_stirling(x);
    }
    if x < 0.5 {
        // Reflection keeps the shift product away from tiny factors.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 10.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    ln_gamma_stirling(shifted) - prod.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log density of Beta(a, b) at `x`; `-inf` outside the support.
pub fn ln_beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * (1.0 - x).ln() };
    let v = left + right - ln_beta(a, b);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// `ln C(n, k)`.
pub fn log_binomial_coefficient(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("binomial coefficient with k = {k} > n = {n}")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= 64 {
        let base = (n - k) as f64;
        return Ok((1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum());
    }
    let (n, k) = (n as f64, k as f64);
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 20_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, the CDF of Beta(a, b) at `x`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("incomplete beta shape ({a}, {b}) must be positive")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp();
    // The fraction converges fast on the side of the mode nearer the origin.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((front * beta_cf(a, b, x) / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - front * beta_cf(b, a, 1.0 - x) / b).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 40-digit reference values from mpmath (ncdf, erfinv, betainc, loggamma).
    const CDF_REFERENCE: [(f64, f64); 10] = [
        (2.676, 0.996_274_667_743_470_6),
        (1.644_853, 0.949_999_935_338_925),
        (-3.0, 0.001_349_898_031_630_094_5),
        (-5.0, 2.866_515_718_791_939e-7),
        (-8.0, 6.220_960_574_271_784e-16),
        (3.5, 0.999_767_370_920_964_5),
        (-10.0, 7.619_853_024_160_526e-24),
        (-20.0, 2.753_624_118_606_233_7e-89),
        (0.5, 0.691_462_461_274_013_1),
        (-1.5, 0.066_807_201_268_858_07),
    ];

    #[test]
    fn cdf_matches_reference() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        for (z, want) in CDF_REFERENCE {
            let got = std_normal_cdf(z);
            assert!((got - want).abs() <= 1e-14, "Phi({z}) = {got}, want {want}");
            if z < 0.0 {
                assert!(((got - want) / want).abs() < 1e-12, "relative tail error at {z}");
            }
        }
    }

    #[test]
    fn cdf_paper_values() {
        // one-sided tail at the easy-data z-score
        assert!((std_normal_sf(2.676) - 0.00372).abs() < 1e-5);
        assert!((std_normal_cdf(1.644_853) - 0.95).abs() < 1e-6);
    }

    #[test]
    fn cdf_is_monotone_across_branch_switch() {
        let mut prev = 0.0;
        let mut z = -9.0;
        while z <= 9.0 {
            let v = std_normal_cdf(z);
            assert!(v >= prev, "non-monotone at {z}");
            prev = v;
            z += 0.001;
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert!((std_normal_quantile(0.95).unwrap() - 1.644_853_626_951_472_7).abs() < 1e-12);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(1e-10).unwrap() + 6.361_340_902_404_056).abs() < 1e-10);
    }

    #[test]
    fn quantile_agrees_with_bisection() {
        // independent route: bisection on the CDF
        let target = 0.975;
        let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if std_normal_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((std_normal_quantile(target).unwrap() - lo).abs() < 1e-9);
        assert!((lo - 1.959_964).abs() < 1e-6);
    }

    #[test]
    fn quantile_domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(std_normal_quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn ln_gamma_reference() {
        assert!((ln_gamma(0.5) - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert!((ln_gamma(100.0) - 359.134_205_369_575_4).abs() < 1e-11);
        assert!((ln_gamma(3.7) - 1.428_072_326_665_388).abs() < 1e-14);
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        for x in [0.0, 0.1, 0.37, 0.5, 0.99, 1.0] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-14);
        }
        assert!((regularized_incomplete_beta(2.0, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(regularized_incomplete_beta(3.0, 4.0, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(3.0, 4.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn incomplete_beta_reference() {
        let cases = [
            (1722.0, 656.0, 0.70, 0.004_717_922_946_470_339),
            (0.5, 2.5, 0.3, 0.796_889_336_279_945_1),
            (5.0, 3.5, 0.9, 0.988_474_633_631_061_6),
        ];
        for (a, b, x, want) in cases {
            let got = regularized_incomplete_beta(a, b, x).unwrap();
            assert!((got - want).abs() < 1e-10, "I({a},{b},{x}) = {got}, want {want}");
        }
    }

    #[test]
    fn incomplete_beta_normal_cross_check() {
        // Beta(1722, 656): mean 0.7240, sd 0.00917; 0.70 sits ~2.6 sd below.
        let (a, b) = (1722.0_f64, 656.0_f64);
        let mean = a / (a + b);
        let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
        let approx = std_normal_cdf((0.70 - mean) / sd);
        let got = regularized_incomplete_beta(a, b, 0.70).unwrap();
        assert!((got - approx).abs() < 1.5e-3);
    }

    #[test]
    fn incomplete_beta_domain() {
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, -1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn log_binomial_values() {
        assert!((log_binomial_coefficient(24, 7).unwrap() - 346_104_f64.ln()).abs() < 1e-12);
        assert_eq!(log_binomial_coefficient(17, 0).unwrap(), 0.0);
        assert_eq!(log_binomial_coefficient(17, 17).unwrap(), 0.0);
        assert!(log_binomial_coefficient(3, 4).is_err());
        // ln C(200, 100) from mpmath
        let want = 135.753_236_081_278_5;
        let got = log_binomial_coefficient(200, 100).unwrap();
        assert!(((got - want) / want).abs() < 1e-12, "{got}");
    }

    proptest! {
        #[test]
        fn cdf_symmetry(z in -8.0_f64..8.0) {
            prop_assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn quantile_inverts_cdf(z in -5.0_f64..5.0) {
            let back = std_normal_quantile(std_normal_cdf(z)).unwrap();
            prop_assert!((back - z).abs() <= 1e-8, "{} -> {}", z, back);
        }

        #[test]
        fn incomplete_beta_reflection(a in 0.2_f64..200.0, b in 0.2_f64..200.0, x in 0.0_f64..=1.0) {
            let lhs = regularized_incomplete_beta(a, b, x).unwrap();
            let rhs = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
