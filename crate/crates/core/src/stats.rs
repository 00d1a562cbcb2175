//! Special functions and distribution tests used by model validation.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper incomplete gamma ratio by the modified Lentz continued fraction.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn check_chi2_args(x: f64, df: u32) -> Result<()> {
    if df < 1 {
        return Err(Error::validation("df", "degrees of freedom must be >= 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::validation("x", format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// CDF of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_cdf(x: f64, df: u32) -> Result<f64> {
    check_chi2_args(x, df)?;
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_p(df as f64 / 2.0, x / 2.0))
}

/// Survival function `1 − chi2_cdf(x, df)`, accurate in the far tail.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    check_chi2_args(x, df)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

/// Outcome of a Kolmogorov–Smirnov comparison against a reference CDF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub n: usize,
    /// `sup (F(x) − F_n(x))`, large when the sample sits above the reference.
    pub d_upper: f64,
    /// `sup (F_n(x) − F(x))`, large when the sample sits below the reference.
    pub d_lower: f64,
    /// Exact one-sided p-value for `d_upper`.
    pub p_upper: f64,
    /// Asymptotic two-sided p-value for `max(d_upper, d_lower)`.
    pub p_two_sided: f64,
}

/// Kolmogorov–Smirnov statistics of `sample` against `cdf`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::validation("sample", "KS test needs at least one value"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let (mut d_upper, mut d_lower) = (0.0f64, 0.0f64);
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d_upper = d_upper.max(f - i as f64 / nf);
        d_lower = d_lower.max((i + 1) as f64 / nf - f);
    }
    let d = d_upper.max(d_lower);
    Ok(KsResult {
        n,
        d_upper,
        d_lower,
        p_upper: smirnov_one_sided_sf(n, d_upper),
        p_two_sided: kolmogorov_sf(n, d),
    })
}

/// Exact `P(D_n^+ >= d)` (Birnbaum–Tingey).
pub fn smirnov_one_sided_sf(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let jmax = (nf * (1.0 - d)).floor() as usize;
    let ln_fact = |k: usize| ln_gamma(k as f64 + 1.0);
    let mut sum = 0.0;
    for j in 0..=jmax {
        let jf = j as f64;
        let a = 1.0 - d - jf / nf;
        let b = d + jf / nf;
        if a <= 0.0 {
            continue;
        }
        let ln_binom = ln_fact(n) - ln_fact(j) - ln_fact(n - j);
        sum += (ln_binom + (nf - jf) * a.ln() + (jf - 1.0) * b.ln()).exp();
    }
    (d * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sided Kolmogorov p-value with Stephens' small-sample scaling.
pub fn kolmogorov_sf(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chi2_df2_closed_form() {
        let p = chi2_cdf(7.0, 2).unwrap();
        assert!((p - (1.0 - (-3.5f64).exp())).abs() < 1e-12);
        assert!((p - 0.96980).abs() < 5e-6);
        for i in 0..400 {
            let x = i as f64 * 0.1;
            assert!((chi2_cdf(x, 2).unwrap() - (1.0 - (-x / 2.0).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn chi2_edge_values() {
        assert_eq!(chi2_cdf(0.0, 3).unwrap(), 0.0);
        assert!((chi2_cdf(3.841, 1).unwrap() - 0.95).abs() < 1e-4);
        for df in 1..=20 {
            assert!((chi2_cdf(1e3 * df as f64, df).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(chi2_cdf(-1.0, 2).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
    }

    #[test]
    fn chi2_matches_independent_oracle() {
        for df in [1u32, 2, 3, 5, 7, 12, 30] {
            let oracle = ChiSquared::new(df as f64).unwrap();
            for i in 0..300 {
                let x = i as f64 * 0.25;
                let ours = chi2_cdf(x, df).unwrap();
                let theirs = oracle.cdf(x);
                assert!((ours - theirs).abs() < 1e-10, "df {df} x {x}: {ours} vs {theirs}");
                let sf = chi2_sf(x, df).unwrap();
                assert!((sf - (1.0 - theirs)).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn chi2_is_monotone(x in 0.0f64..200.0, dx in 0.0f64..10.0, df in 1u32..40) {
            prop_assert!(chi2_cdf(x + dx, df).unwrap() >= chi2_cdf(x, df).unwrap());
        }
    }

    #[test]
    fn smirnov_matches_asymptotic_for_large_n() {
        // P(D+ >= d) ~ exp(-2 n d^2) for large n.
        let n = 2000;
        let d = 0.03;
        let exact = smirnov_one_sided_sf(n, d);
        let approx = (-2.0 * n as f64 * d * d).exp();
        assert!((exact - approx).abs() < 0.01, "{exact} vs {approx}");
    }

    #[test]
    fn smirnov_small_n_exact() {
        // n = 1: P(D+ >= d) = 1 - d.
        assert!((smirnov_one_sided_sf(1, 0.3) - 0.7).abs() < 1e-12);
        // n = 2, d = 0.6: only the j = 0 term survives.
        let d = 0.6f64;
        let expected = d * (1.0 - d).powi(2) / d;
        assert!((smirnov_one_sided_sf(2, d) - expected).abs() < 1e-12);
    }

    #[test]
    fn ks_on_uniform_grid_does_not_reject() {
        let sample: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
        let r = ks_test(&sample, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.d_upper <= 0.011 && r.d_lower <= 0.011);
        assert!(r.p_upper > 0.9 && r.p_two_sided > 0.9);
        let shifted: Vec<f64> = sample.iter().map(|x| x * 0.3).collect();
        let r = ks_test(&shifted, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_two_sided < 1e-6);
        assert!(r.d_lower > 0.6);
    }
}
