//! Two-sample distribution comparison.

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Largest gap between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value.
    pub p_value: f64,
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, AnalyticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalyticsError::InvalidArgument("both samples must be non-empty".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecdf_gap_oracle(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        let r = ks_two_sample(&a, &[10.0, 11.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.2);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn matches_ecdf_oracle() {
        let a = [0.3, 1.2, 1.2, 5.0, 2.2, 0.0];
        let b = [1.2, 3.3, 0.1, 4.4];
        assert!((ks_two_sample(&a, &b).unwrap().statistic - ecdf_gap_oracle(&a, &b)).abs() < 1e-15);
    }
}
