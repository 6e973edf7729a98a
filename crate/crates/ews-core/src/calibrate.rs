//! Percentile calibration of classifier output.
//!
//! Raw model outputs live on method-specific scales. Mapping each value to
//! its percentile in the in-sample output distribution puts every method on
//! a common [0, 1] scale, so thresholds are comparable across methods and
//! aggregation is meaningful. The map is non-decreasing, hence in-sample
//! rank statistics (AUC, usefulness at the optimal threshold) are unchanged.

use crate::error::{Error, Result};

/// Empirical CDF of an in-sample output distribution.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// Fits the ECDF on in-sample outputs; all values must be finite.
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptyInput("ecdf sample"));
        }
        for (i, &v) in sample.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    position: i,
                    context: "ecdf sample",
                });
            }
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    /// Percentile of `value`: the share of in-sample outputs <= value.
    pub fn apply(&self, value: f64) -> f64 {
        let below = self.sorted.partition_point(|&s| s <= value);
        below as f64 / self.sorted.len() as f64
    }

    pub fn apply_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_auc;
    use approx::assert_abs_diff_eq;

    #[test]
    fn percentiles_count_values_at_or_below() {
        let ecdf = Ecdf::fit(&[0.1, 0.4, 0.4, 0.8]).unwrap();
        assert_abs_diff_eq!(ecdf.apply(0.05), 0.0);
        assert_abs_diff_eq!(ecdf.apply(0.1), 0.25);
        assert_abs_diff_eq!(ecdf.apply(0.4), 0.75);
        assert_abs_diff_eq!(ecdf.apply(0.5), 0.75);
        assert_abs_diff_eq!(ecdf.apply(0.8), 1.0);
        assert_abs_diff_eq!(ecdf.apply(2.0), 1.0);
    }

    #[test]
    fn calibration_is_monotone() {
        let sample: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0).collect();
        let ecdf = Ecdf::fit(&sample).unwrap();
        let mut probe: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        probe.extend_from_slice(&sample);
        probe.sort_by(f64::total_cmp);
        let out = ecdf.apply_all(&probe);
        for w in out.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(out.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn in_sample_auc_is_invariant_under_calibration() {
        let scores: Vec<f64> = (0..40).map(|i| (((i * 23) % 40) as f64).sin()).collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let ecdf = Ecdf::fit(&scores).unwrap();
        let calibrated = ecdf.apply_all(&scores);
        let raw_auc = roc_auc(&scores, &labels).unwrap();
        let cal_auc = roc_auc(&calibrated, &labels).unwrap();
        assert_abs_diff_eq!(raw_auc, cal_auc, epsilon = 1e-15);
    }

    #[test]
    fn rejects_empty_or_non_finite_samples() {
        assert!(Ecdf::fit(&[]).is_err());
        assert!(Ecdf::fit(&[1.0, f64::NAN]).is_err());
    }
}
