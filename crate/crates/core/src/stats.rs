//! Thin wrappers over `statrs` distributions.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    if df > 1e6 {
        return normal_two_sided_p(t);
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Critical value `t` with `P(|T| > t) = alpha`.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    if df > 1e6 {
        return Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0);
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    dist.inverse_cdf(1.0 - alpha / 2.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

/// Two-sided p-value of a standard normal score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    (2.0 * n.sf(z.abs())).min(1.0)
}

/// Median of a slice (average of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert!((t_critical(0.05, 1e9) - 1.959964).abs() < 1e-5);
        assert!((t_critical(0.05, 10.0) - 2.228139).abs() < 1e-5);
        assert!((normal_two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        assert!((t_two_sided_p(2.228139, 10.0) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
