//! Hodrick-Prescott trend extraction, two-sided and one-sided.
//!
//! The two-sided trend solves (I + lambda * D'D) x = y where D takes second
//! differences. The matrix is symmetric positive definite with bandwidth 2,
//! so a banded Cholesky factorization solves it in O(n).
//!
//! The one-sided variant re-runs the two-sided filter on every prefix and
//! keeps only the last point, so the trend at time t never uses data after t.

use crate::error::{Error, Result};

/// One-sided trend plus the number of leading warm-up points.
///
/// The recursive solve needs at least 4 observations, so the first
/// `warmup` points (at most 3) carry the raw series value and should be
/// treated as low-confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedTrend {
    pub trend: Vec<f64>,
    pub warmup: usize,
}

fn validate(series: &[f64], lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param(
            "lambda",
            format!("must be a positive real, got {lambda}"),
        ));
    }
    for (i, &v) in series.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                position: i,
                context: "hp filter input",
            });
        }
    }
    Ok(())
}

/// Banded LDL' factorization with two subdiagonals and unit lower diagonal.
struct BandedLdl {
    diag: Vec<f64>,
    sub1: Vec<f64>,
    sub2: Vec<f64>,
}

impl BandedLdl {
    /// Factors A = I + lambda * D'D given only n and lambda; the band of
    /// D'D is accumulated from its rank-one rows (1, -2, 1).
    fn factor(n: usize, lambda: f64) -> Result<Self> {
        let mut d0 = vec![1.0; n];
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        let coeff = [1.0, -2.0, 1.0];
        for j in 0..n.saturating_sub(2) {
            for a in 0..3 {
                d0[j + a] += lambda * coeff[a] * coeff[a];
            }
            for a in 0..2 {
                d1[j + a + 1] += lambda * coeff[a] * coeff[a + 1];
            }
            d2[j + 2] += lambda * coeff[0] * coeff[2];
        }
        // d1[i] holds A[i][i-1], d2[i] holds A[i][i-2].
        let mut diag = vec![0.0; n];
        let mut sub1 = vec![0.0; n];
        let mut sub2 = vec![0.0; n];
        for i in 0..n {
            if i >= 2 {
                sub2[i] = d2[i] / diag[i - 2];
            }
            if i >= 1 {
                let mut v = d1[i];
                if i >= 2 {
                    v -= sub2[i] * sub1[i - 1] * diag[i - 2];
                }
                sub1[i] = v / diag[i - 1];
            }
            let mut v = d0[i];
            if i >= 1 {
                v -= sub1[i] * sub1[i] * diag[i - 1];
            }
            if i >= 2 {
                v -= sub2[i] * sub2[i] * diag[i - 2];
            }
            if v <= 0.0 {
                return Err(Error::Numeric(
                    "HP system lost positive definiteness".to_string(),
                ));
            }
            diag[i] = v;
        }
        Ok(BandedLdl { diag, sub1, sub2 })
    }

    /// Solves A x = y via the LDL' factorization computed in `factor`.
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut v = y[i];
            if i >= 1 {
                v -= self.sub1[i] * z[i - 1];
            }
            if i >= 2 {
                v -= self.sub2[i] * z[i - 2];
            }
            z[i] = v;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = z[i] / self.diag[i];
            if i + 1 < n {
                v -= self.sub1[i + 1] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.sub2[i + 2] * x[i + 2];
            }
            x[i] = v;
        }
        x
    }
}

/// Two-sided HP trend of the whole series.
pub fn hp_trend_two_sided(series: &[f64], lambda: f64) -> Result<Vec<f64>> {
    validate(series, lambda)?;
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let ldl = BandedLdl::factor(series.len(), lambda)?;
    Ok(ldl.solve(series))
}

/// One-sided (real-time) HP trend: the value at t is the last point of the
/// two-sided trend fitted on the prefix up to and including t.
pub fn hp_trend_one_sided(series: &[f64], lambda: f64) -> Result<OneSidedTrend> {
    validate(series, lambda)?;
    let n = series.len();
    let warmup = n.min(3);
    let mut trend = series[..warmup].to_vec();
    trend.reserve(n - warmup);
    for t in warmup..n {
        let prefix = hp_trend_two_sided(&series[..=t], lambda)?;
        trend.push(*prefix.last().expect("prefix is non-empty"));
    }
    Ok(OneSidedTrend { trend, warmup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn dense_hp_oracle(series: &[f64], lambda: f64) -> Vec<f64> {
        let n = series.len();
        let mut a = DMatrix::<f64>::identity(n, n);
        for j in 0..n - 2 {
            let mut row = DVector::<f64>::zeros(n);
            row[j] = 1.0;
            row[j + 1] = -2.0;
            row[j + 2] = 1.0;
            a += lambda * &row * row.transpose();
        }
        let y = DVector::from_column_slice(series);
        let x = a.lu().solve(&y).expect("HP system is SPD");
        x.iter().copied().collect()
    }

    #[test]
    fn constant_series_is_its_own_trend() {
        let series = vec![3.25; 30];
        let two = hp_trend_two_sided(&series, 1600.0).unwrap();
        let one = hp_trend_one_sided(&series, 400_000.0).unwrap();
        for (&t2, &t1) in two.iter().zip(&one.trend) {
            assert_abs_diff_eq!(t2, 3.25, epsilon = 1e-9);
            assert_abs_diff_eq!(t1, 3.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn linear_series_is_its_own_trend() {
        let series: Vec<f64> = (0..40).map(|t| 1.5 + 0.25 * t as f64).collect();
        let two = hp_trend_two_sided(&series, 400_000.0).unwrap();
        let one = hp_trend_one_sided(&series, 1600.0).unwrap();
        for t in 0..series.len() {
            assert_abs_diff_eq!(two[t], series[t], epsilon = 1e-7);
            assert_abs_diff_eq!(one.trend[t], series[t], epsilon = 1e-7);
        }
    }

    #[test]
    fn banded_solver_matches_dense_oracle() {
        let series: Vec<f64> = (0..40)
            .map(|t| (t as f64 / 8.0).sin() + t as f64 / 20.0)
            .collect();
        let banded = hp_trend_two_sided(&series, 1600.0).unwrap();
        let dense = dense_hp_oracle(&series, 1600.0);
        for (b, d) in banded.iter().zip(&dense) {
            assert_abs_diff_eq!(b, d, epsilon = 1e-8);
        }
        let one = hp_trend_one_sided(&series, 1600.0).unwrap();
        assert_abs_diff_eq!(one.trend[39], dense[39], epsilon = 1e-8);
    }

    #[test]
    fn trend_preserves_the_series_mean() {
        let series: Vec<f64> = (0..60)
            .map(|t| (t as f64 / 5.0).cos() * 2.0 + 0.03 * t as f64)
            .collect();
        let trend = hp_trend_two_sided(&series, 400_000.0).unwrap();
        let sum_y: f64 = series.iter().sum();
        let sum_x: f64 = trend.iter().sum();
        assert_abs_diff_eq!(sum_x, sum_y, epsilon = 1e-6);
    }

    #[test]
    fn one_sided_trend_ignores_the_future() {
        let mut series: Vec<f64> = (0..50)
            .map(|t| (t as f64 / 7.0).sin() + 0.02 * t as f64)
            .collect();
        let full = hp_trend_one_sided(&series, 1600.0).unwrap();
        series.truncate(30);
        let cut = hp_trend_one_sided(&series, 1600.0).unwrap();
        for t in 0..30 {
            assert_abs_diff_eq!(full.trend[t], cut.trend[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn short_series_carry_raw_values() {
        let one = hp_trend_one_sided(&[1.0, 2.0], 1600.0).unwrap();
        assert_eq!(one.trend, vec![1.0, 2.0]);
        assert_eq!(one.warmup, 2);
        let three = hp_trend_one_sided(&[1.0, 4.0, 9.0], 1600.0).unwrap();
        assert_eq!(three.warmup, 3);
        assert_eq!(three.trend, vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(hp_trend_two_sided(&[1.0, f64::NAN], 1600.0).is_err());
        assert!(hp_trend_two_sided(&[1.0, 2.0], 0.0).is_err());
        assert!(hp_trend_two_sided(&[1.0, 2.0], f64::INFINITY).is_err());
    }
}
