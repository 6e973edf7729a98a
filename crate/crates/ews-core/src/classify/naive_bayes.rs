//! Gaussian naive Bayes: independent per-feature normal likelihoods.

use crate::classify::{check_both_classes, logistic, FamilyFit, FeatureMatrix, Model};
use crate::error::Result;

const VARIANCE_FLOOR: f64 = 1e-9;

struct ClassStats {
    log_prior: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl ClassStats {
    fn log_likelihood(&self, x: &[f64]) -> f64 {
        let mut ll = self.log_prior;
        for ((&v, &m), &s2) in x.iter().zip(&self.mean).zip(&self.var) {
            ll += -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - m) * (v - m) / (2.0 * s2);
        }
        ll
    }
}

struct NaiveBayesModel {
    class0: ClassStats,
    class1: ClassStats,
}

impl Model for NaiveBayesModel {
    fn predict(&self, x: &[f64]) -> f64 {
        logistic(self.class1.log_likelihood(x) - self.class0.log_likelihood(x))
    }
}

fn class_stats(x: &FeatureMatrix, y: &[bool], class: bool, n_total: usize) -> ClassStats {
    let g = x.ncols();
    let mut mean = vec![0.0; g];
    let mut count = 0usize;
    for (row, &label) in x.rows().zip(y) {
        if label == class {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0; g];
    for (row, &label) in x.rows().zip(y) {
        if label == class {
            for ((s, &m), &v) in var.iter_mut().zip(&mean).zip(row) {
                *s += (v - m) * (v - m);
            }
        }
    }
    for s in &mut var {
        *s = (*s / count as f64).max(VARIANCE_FLOOR);
    }
    ClassStats {
        log_prior: (count as f64 / n_total as f64).ln(),
        mean,
        var,
    }
}

pub(crate) fn fit(x: &FeatureMatrix, y: &[bool]) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let n = x.nrows();
    Ok(FamilyFit::clean(Box::new(NaiveBayesModel {
        class0: class_stats(x, y, false, n),
        class1: class_stats(x, y, true, n),
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MethodSpec;
    use crate::eval::Preference;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_classes_give_half() {
        // Identical class-conditional distributions and equal priors.
        let rows = vec![
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![1.0, 2.0],
            vec![3.0, 4.0],
        ];
        let y = vec![true, true, false, false];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = MethodSpec::NaiveBayes.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert_abs_diff_eq!(model.predict_proba(&[2.0, 3.0]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(model.predict_proba(&[0.0, 0.0]), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn shifted_means_move_the_posterior() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let label = i % 2 == 0;
            let base = if label { 2.0 } else { -2.0 };
            rows.push(vec![base + (i % 5) as f64 * 0.1]);
            y.push(label);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = MethodSpec::NaiveBayes.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert!(model.predict_proba(&[2.0]) > 0.95);
        assert!(model.predict_proba(&[-2.0]) < 0.05);
    }

    #[test]
    fn constant_feature_hits_variance_floor_without_blowup() {
        let rows = vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0], vec![4.0, 7.0]];
        let y = vec![false, false, true, true];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = MethodSpec::NaiveBayes.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        let p = model.predict_proba(&[2.5, 7.0]);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}
