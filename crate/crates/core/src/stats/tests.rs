//! Goodness-of-fit and serial-correlation tests on pooled increments.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// P(K > x) for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        s += if j as i64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against N(0, 1), asymptotic p-value with Stephens'
/// small-sample correction.
pub fn ks_standard_normal(samples: &[f64]) -> TestResult {
    let n = samples.len();
    if n == 0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n,
        };
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let norm = Normal::new(0.0, 1.0).expect("standard normal");
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = norm.cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sq = nf.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d),
        n,
    }
}

/// Ljung-Box type test pooled over independent series:
/// Q = sum_l N_l rho_l^2 with rho_l the pooled lag-l autocorrelation and N_l
/// the number of lag-l pairs; chi-square with `lags` degrees of freedom.
pub fn ljung_box_pooled(series: &[Vec<f64>], lags: usize) -> TestResult {
    let total: usize = series.iter().map(Vec::len).sum();
    if lags == 0 || total == 0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n: total,
        };
    }
    let mean = series.iter().flatten().sum::<f64>() / total as f64;
    let var = series.iter().flatten().map(|x| (x - mean) * (x - mean)).sum::<f64>() / total as f64;
    let mut q = 0.0;
    for l in 1..=lags {
        let (mut s, mut pairs) = (0.0, 0usize);
        for x in series {
            if x.len() > l {
                for j in 0..x.len() - l {
                    s += (x[j] - mean) * (x[j + l] - mean);
                }
                pairs += x.len() - l;
            }
        }
        if pairs > 0 && var > 0.0 {
            let rho = s / pairs as f64 / var;
            q += pairs as f64 * rho * rho;
        }
    }
    let chi = ChiSquared::new(lags as f64).expect("positive dof");
    TestResult {
        statistic: q,
        p_value: 1.0 - chi.cdf(q),
        n: total,
    }
}

/// Least-squares slope of log(y) on log(x).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_known_values() {
        // Tabulated critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn log_log_slope_of_power() {
        let x = [1e-2, 5e-3, 2.5e-3];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ljung_box_flags_ar1() {
        let mut x = vec![0.0; 2000];
        let mut s: u64 = 12345;
        let mut prev = 0.0;
        for v in x.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            prev = 0.5 * prev + u;
            *v = prev;
        }
        assert!(ljung_box_pooled(&[x], 10).p_value < 1e-6);
    }
}
