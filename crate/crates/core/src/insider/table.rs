//! Drift tables theta(t, y) read from CSV, interpolated bilinearly and
//! clamped at the edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTable {
    pub times: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `times.len()` rows of `ys.len()` values.
    pub theta: Vec<f64>,
}

/// Bound on every table entry, which keeps interpolation free of overflow.
pub const MAX_ENTRY: f64 = 1e12;

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl DriftTable {
    /// Parse CSV with header `t,y,theta`. Every (t, y) pair of the implied
    /// rectangular grid must appear exactly once.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols != ["t", "y", "theta"] {
            return Err(Error::config(format!(
                "drift table header must be t,y,theta, got {}",
                cols.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                let s = rec.get(j).unwrap_or("");
                match s.parse::<f64>() {
                    // + 0.0 folds -0 into 0 so grid lookups match.
                    Ok(v) if v.abs() <= MAX_ENTRY => Ok(v + 0.0),
                    _ => Err(Error::config(format!(
                        "drift table row {}: '{s}' is not a number within +/-{MAX_ENTRY:e}",
                        i + 1
                    ))),
                }
            };
            rows.push((num(0)?, num(1)?, num(2)?));
        }
        if rows.is_empty() {
            return Err(Error::config("drift table has no rows"));
        }
        let times = sorted_unique(rows.iter().map(|r| r.0).collect());
        let ys = sorted_unique(rows.iter().map(|r| r.1).collect());
        if times.len().checked_mul(ys.len()) != Some(rows.len()) {
            return Err(Error::config(format!(
                "drift table must cover a full grid: {} rows for {} times x {} levels",
                rows.len(),
                times.len(),
                ys.len()
            )));
        }
        let mut theta = vec![f64::NAN; rows.len()];
        for (t, y, th) in rows {
            let i = times.binary_search_by(|x| x.total_cmp(&t)).expect("collected");
            let j = ys.binary_search_by(|x| x.total_cmp(&y)).expect("collected");
            let slot = &mut theta[i * ys.len() + j];
            if !slot.is_nan() {
                return Err(Error::config(format!("drift table repeats (t, y) = ({t}, {y})")));
            }
            *slot = th;
        }
        Ok(DriftTable { times, ys, theta })
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        let (i, a) = locate(&self.times, t);
        let (j, b) = locate(&self.ys, y);
        let m = self.ys.len();
        let at = |i: usize, j: usize| self.theta[i * m + j];
        let i1 = (i + 1).min(self.times.len() - 1);
        let j1 = (j + 1).min(m - 1);
        (1.0 - a) * ((1.0 - b) * at(i, j) + b * at(i, j1)) + a * ((1.0 - b) * at(i1, j) + b * at(i1, j1))
    }
}

/// Left bracket index and weight of `x` in sorted `knots`, clamped.
fn locate(knots: &[f64], x: f64) -> (usize, f64) {
    let n = knots.len();
    if n == 1 || !(x > knots[0]) {
        return (0, 0.0);
    }
    if x >= knots[n - 1] {
        return (n - 1, 0.0);
    }
    let i = knots.partition_point(|&k| k <= x) - 1;
    (i, (x - knots[i]) / (knots[i + 1] - knots[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_and_clamped() {
        let t = DriftTable::parse_csv("t,y,theta\n0,0,0\n0,1,1\n1,0,2\n1,1,3\n").unwrap();
        assert_eq!(t.eval(0.5, 0.5), 1.5);
        assert_eq!(t.eval(-1.0, 5.0), 1.0);
        let z = DriftTable::parse_csv("t,y,theta\n0,-0,1\n0,1,2\n").unwrap();
        assert_eq!(z.eval(0.0, 0.0), 1.0);
        assert_eq!(z.eval(0.0, f64::NAN), 1.0);
        assert!(DriftTable::parse_csv("t,y,theta\n0,0,1e13\n").is_err());
        assert_eq!(t.eval(2.0, -3.0), 2.0);
    }

    #[test]
    fn rejects_holes_and_repeats() {
        assert!(DriftTable::parse_csv("t,y,theta\n0,0,0\n0,1,1\n1,0,2\n").is_err());
        assert!(DriftTable::parse_csv("t,y,theta\n0,0,0\n0,0,1\n").is_err());
        assert!(DriftTable::parse_csv("t,x,theta\n0,0,0\n").is_err());
        assert!(DriftTable::parse_csv("t,y,theta\n0,0,nan\n").is_err());
    }
}
