//! Poisson probabilities in log space.
//!
//! Means up to ~1e4 and beyond are handled without overflow: tails are
//! accumulated as ratios relative to the largest term of the tail.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Relative size below which further tail terms are dropped.
const STOP_RATIO: f64 = 1e-16;
/// Largest admissible truncation error of a tail sum.
const TAIL_BOUND: f64 = 1e-12;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln k! with exact small values.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

pub fn ln_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k)
}

pub fn pmf(k: u64, mean: f64) -> f64 {
    ln_pmf(k, mean).exp()
}

/// Both tails at `k`: `(Pr(Y <= k), Pr(Y > k))`.
///
/// The smaller tail is summed directly, the other is its complement.
pub fn tails(k: u64, mean: f64) -> Result<(f64, f64)> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::InvalidParameter(format!("Poisson mean {mean} must be finite and >= 0")));
    }
    if mean == 0.0 {
        return Ok((1.0, 0.0));
    }
    if (k as f64) + 1.0 < mean {
        let lower = lower_tail(k, mean)?;
        Ok((lower, (1.0 - lower).max(0.0)))
    } else {
        let upper = upper_tail(k, mean)?;
        Ok(((1.0 - upper).max(0.0), upper))
    }
}

pub fn cdf(k: u64, mean: f64) -> Result<f64> {
    tails(k, mean).map(|t| t.0)
}

/// Pr(Y > k).
pub fn sf(k: u64, mean: f64) -> Result<f64> {
    tails(k, mean).map(|t| t.1)
}

/// Σ_{j<=k} pmf(j), summed downward from the largest term (k + 1 < mean).
fn lower_tail(k: u64, mean: f64) -> Result<f64> {
    let lead = ln_pmf(k, mean);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut j = k;
    while j > 0 {
        let ratio = j as f64 / mean;
        term *= ratio;
        sum += term;
        j -= 1;
        let next_ratio = j as f64 / mean;
        if term < STOP_RATIO * sum && next_ratio < 1.0 {
            let bound = term * next_ratio / (1.0 - next_ratio) * lead.exp();
            if bound > TAIL_BOUND {
                return Err(Error::PoissonTail { mean, k, bound });
            }
            break;
        }
    }
    Ok((lead + sum.ln()).exp().min(1.0))
}

/// Σ_{j>k} pmf(j), summed upward from j = k+1 (k >= mean).
fn upper_tail(k: u64, mean: f64) -> Result<f64> {
    let first = k + 1;
    let lead = ln_pmf(first, mean);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut j = first;
    loop {
        j += 1;
        let ratio = mean / j as f64;
        term *= ratio;
        sum += term;
        if term < STOP_RATIO * sum {
            let r = mean / (j + 1) as f64;
            let bound = term * r / (1.0 - r) * lead.exp();
            if bound > TAIL_BOUND {
                return Err(Error::PoissonTail { mean, k, bound });
            }
            break;
        }
    }
    Ok((lead + sum.ln()).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_cdf(k: u64, mean: f64) -> f64 {
        // plain recurrence, fine for small means
        let mut term = (-mean).exp();
        let mut sum = term;
        for j in 1..=k {
            term *= mean / j as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn ln_gamma_known_values() {
        let mut fact = 1.0f64;
        for n in 1..30u64 {
            fact *= n as f64;
            assert!((ln_gamma(n as f64 + 1.0) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(0.25) - 1.288_022_524_698_077_5).abs() < 1e-13);
        // Stirling with two corrections at 1e6
        let x = 1e6f64;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x);
        assert!((ln_gamma(x) - stirling).abs() < 1e-9);
    }

    #[test]
    fn matches_direct_summation_for_small_means() {
        for &mean in &[0.01, 0.7, 3.0, 10.0, 42.5] {
            for k in 0..120 {
                let (lo, hi) = tails(k, mean).unwrap();
                let d = direct_cdf(k, mean);
                assert!((lo - d).abs() < 1e-13, "mean {mean} k {k}: {lo} vs {d}");
                assert!((lo + hi - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn small_tails_keep_relative_accuracy() {
        // Pr(Y = 0) for mean 10 is the whole lower tail
        assert!((cdf(0, 10.0).unwrap() / (-10.0f64).exp() - 1.0).abs() < 1e-13);
        // Pr(Y > 0) for tiny mean is 1 - e^-mu
        let mu = 1e-9;
        assert!((sf(0, mu).unwrap() / (-(-mu).exp_m1()) - 1.0).abs() < 1e-9);
        let deep = sf(100, 10.0).unwrap();
        let lead = pmf(101, 10.0);
        assert!(deep > lead && deep < 1.2 * lead);
    }

    #[test]
    fn large_means_do_not_overflow() {
        for &mean in &[1e3, 1e4, 5e4, 1e6] {
            let k = mean as u64;
            let (lo, hi) = tails(k, mean).unwrap();
            assert!(lo.is_finite() && hi.is_finite());
            // median of a Poisson lies within mean +- ln 2
            assert!(lo > 0.5 && lo < 0.51, "mean {mean} cdf {lo}");
            let far = cdf((mean - 10.0 * mean.sqrt()) as u64, mean).unwrap();
            assert!(far > 0.0 && far < 1e-20);
        }
    }

    #[test]
    fn zero_mean_is_degenerate() {
        assert_eq!(tails(0, 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(pmf(0, 0.0), 1.0);
        assert_eq!(pmf(3, 0.0), 0.0);
        assert!(tails(0, -1.0).is_err());
        assert!(tails(0, f64::NAN).is_err());
    }
}
