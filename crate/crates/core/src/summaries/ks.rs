//! Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsStatistic {
    pub statistic: f64,
    pub p_value: f64,
}

/// `D = sup |F_a - F_b|` over the pooled sample, with
/// `p = Q_KS(sqrt(m n / (m + n)) * D)` where `Q_KS` is the Kolmogorov survival
/// function. The asymptotic form is used at every sample size.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsStatistic> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidConfig("samples must not contain NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < m && j < n {
        let x = a[i].min(b[j]);
        while i < m && a[i] <= x {
            i += 1;
        }
        while j < n && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let en = (m * n) as f64 / (m + n) as f64;
    Ok(KsStatistic { statistic: d, p_value: kolmogorov_sf(en.sqrt() * d) })
}

/// Survival function of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // 1 - sqrt(2 pi)/x * sum_{k odd} exp(-k^2 pi^2 / (8 x^2)), accurate for small x.
        let pi2 = std::f64::consts::PI.powi(2);
        let w = (2.0 * std::f64::consts::PI).sqrt() / x;
        let mut cdf = 0.0;
        for k in (1..200).step_by(2) {
            let term = (-(k * k) as f64 * pi2 / (8.0 * x * x)).exp();
            cdf += term;
            if term < 1e-300 {
                break;
            }
        }
        (1.0 - w * cdf).clamp(0.0, 1.0)
    } else {
        // 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2).
        let mut sf = 0.0;
        for k in 1..200 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ecdf() {
        let r = ks_two_sample(&[0.1, 0.4, 0.5], &[0.2, 0.3, 0.5]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-12);
        let r = ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn identical_samples() {
        let r = ks_two_sample(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(ks_two_sample(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn series_branches_agree_at_the_split() {
        let below = kolmogorov_sf(1.18 - 1e-12);
        let above = kolmogorov_sf(1.18);
        assert!((below - above).abs() < 1e-10);
    }
}
