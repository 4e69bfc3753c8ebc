use serde::Serialize;

/// Sample mean with its standard error sd / sqrt(n).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSe {
    /// |mean - target| in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

/// Two-pass mean and standard deviation.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe::default();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    MeanSe {
        mean,
        se: sd / (n as f64).sqrt(),
        sd,
        n,
    }
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Simple regression y = a + b x with HC1 heteroskedasticity-robust errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ols {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub n: usize,
}

/// None when x has (numerically) no spread.
pub fn ols(x: &[f64], y: &[f64]) -> Option<Ols> {
    let n = x.len().min(y.len());
    if n < 3 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx) * (v - mx)).sum();
    let scale = x[..n].iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if !(sxx > 1e-20 * n as f64 * scale * scale) {
        return None;
    }
    let sxy: f64 = (0..n).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Sandwich (X'X)^-1 X' diag(e^2) X (X'X)^-1 in centered coordinates.
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let e = y[i] - intercept - slope * x[i];
        let e2 = e * e;
        let d = x[i] - mx;
        m00 += e2;
        m01 += e2 * d;
        m11 += e2 * d * d;
    }
    let hc1 = n as f64 / (n - 2) as f64;
    let nf = n as f64;
    let var_slope = hc1 * m11 / (sxx * sxx);
    // intercept = mean_y_hat - slope * mx with centered design.
    let var_c = hc1 * m00 / (nf * nf);
    let cov_c_slope = hc1 * m01 / (nf * sxx);
    let var_intercept = var_c - 2.0 * mx * cov_c_slope + mx * mx * var_slope;
    Some(Ols {
        intercept,
        slope,
        se_intercept: var_intercept.max(0.0).sqrt(),
        se_slope: var_slope.sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_of_known_sample() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.se - m.sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let r = ols(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-14 && (r.intercept - 1.0).abs() < 1e-14);
        assert!(r.se_slope < 1e-12);
        assert!(ols(&[1.0; 5], &[0.0, 1.0, 2.0, 3.0, 4.0]).is_none());
    }

    #[test]
    fn ols_hc1_matches_direct_sandwich() {
        // Direct (X'X)^-1 X' diag(e^2) X (X'X)^-1 with the uncentered design.
        let x = [0.3, 1.1, 2.0, 2.2, 3.9, 5.0];
        let y = [1.0, 2.5, 2.9, 4.4, 6.1, 9.0];
        let r = ols(&x, &y).unwrap();
        let n = x.len() as f64;
        let (sx, sxx): (f64, f64) = (x.iter().sum(), x.iter().map(|v| v * v).sum());
        let det = n * sxx - sx * sx;
        let inv = [[sxx / det, -sx / det], [-sx / det, n / det]];
        let mut meat = [[0.0; 2]; 2];
        for i in 0..x.len() {
            let e = y[i] - r.intercept - r.slope * x[i];
            let row = [1.0, x[i]];
            for a in 0..2 {
                for b in 0..2 {
                    meat[a][b] += e * e * row[a] * row[b];
                }
            }
        }
        let mut v = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        v[a][b] += inv[a][c] * meat[c][d] * inv[d][b];
                    }
                }
            }
        }
        let hc1 = n / (n - 2.0);
        assert!((r.se_intercept - (hc1 * v[0][0]).sqrt()).abs() < 1e-12);
        assert!((r.se_slope - (hc1 * v[1][1]).sqrt()).abs() < 1e-12);
    }
}
