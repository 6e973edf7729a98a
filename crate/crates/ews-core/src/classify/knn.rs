//! K-nearest-neighbour classification under a Minkowski metric.
//!
//! The probability is the share of the k nearest training points labeled 1.
//! Distance ties are broken by training order, so prediction is fully
//! deterministic. Features are standardized on the training set.

use crate::classify::{check_both_classes, FamilyFit, FeatureMatrix, Model, Standardizer};
use crate::error::Result;

struct KnnModel {
    standardizer: Standardizer,
    train: FeatureMatrix,
    labels: Vec<bool>,
    k: usize,
    order: f64,
}

/// Monotone surrogate of the Minkowski distance of the given order (the
/// final root is skipped; it does not change neighbour ranking).
fn minkowski_power(a: &[f64], b: &[f64], order: f64) -> f64 {
    let mut acc = 0.0;
    if order == 1.0 {
        for (x, y) in a.iter().zip(b) {
            acc += (x - y).abs();
        }
    } else if order == 2.0 {
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += d * d;
        }
    } else {
        for (x, y) in a.iter().zip(b) {
            acc += (x - y).abs().powf(order);
        }
    }
    acc
}

impl Model for KnnModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.transform_row(x);
        // Bounded insertion keeps the k best (distance, index) pairs in
        // lexicographic order; index order settles distance ties.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, row) in self.train.rows().enumerate() {
            let d = minkowski_power(&xs, row, self.order);
            let key = (d, i);
            if best.len() < self.k || key < *best.last().expect("non-empty") {
                let pos = best.partition_point(|e| *e < key);
                best.insert(pos, key);
                best.truncate(self.k);
            }
        }
        let hits = best.iter().filter(|(_, i)| self.labels[*i]).count();
        hits as f64 / best.len() as f64
    }
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[bool],
    k: usize,
    order: f64,
) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let standardizer = Standardizer::fit(x);
    let train = standardizer.transform(x);
    Ok(FamilyFit::clean(Box::new(KnnModel {
        standardizer,
        train,
        labels: y.to_vec(),
        k: k.min(x.nrows()),
        order,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MethodSpec;
    use crate::eval::Preference;
    use approx::assert_abs_diff_eq;

    fn toy() -> (FeatureMatrix, Vec<bool>) {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.1],
        ];
        let y = vec![false, false, false, true, true, true];
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn unanimous_neighbourhoods_give_extreme_probabilities() {
        let (x, y) = toy();
        let spec = MethodSpec::Knn { k: 3, distance: 2.0 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert_abs_diff_eq!(model.predict_proba(&[5.05, 5.05]), 1.0);
        assert_abs_diff_eq!(model.predict_proba(&[0.05, 0.05]), 0.0);
    }

    #[test]
    fn benchmark_parameters_are_valid_and_fractional() {
        let (x, y) = toy();
        let spec = MethodSpec::Knn { k: 2, distance: 1.0 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        let p = model.predict_proba(&[2.5, 2.5]);
        // With k = 2 the probability is one of {0, 0.5, 1}.
        assert!([0.0, 0.5, 1.0].iter().any(|v| (p - v).abs() < 1e-12));
    }

    #[test]
    fn distance_ties_break_by_training_order() {
        // Two training points equidistant from the probe carry different
        // labels; the earlier one must win the single-neighbour vote.
        let rows = vec![vec![1.0], vec![-1.0], vec![3.0], vec![-3.0]];
        let y = vec![true, false, true, false];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let spec = MethodSpec::Knn { k: 1, distance: 2.0 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert_abs_diff_eq!(model.predict_proba(&[0.0]), 1.0);
    }

    #[test]
    fn minkowski_orders_change_the_metric() {
        let a = [0.0, 0.0];
        let b = [3.0, 4.0];
        assert_abs_diff_eq!(minkowski_power(&a, &b, 1.0), 7.0);
        assert_abs_diff_eq!(minkowski_power(&a, &b, 2.0), 25.0);
        assert_abs_diff_eq!(minkowski_power(&a, &b, 3.0), 27.0 + 64.0);
    }

    #[test]
    fn k_larger_than_training_set_is_clamped() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![false, true, true];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let spec = MethodSpec::Knn { k: 50, distance: 1.0 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert_abs_diff_eq!(model.predict_proba(&[1.0]), 2.0 / 3.0, epsilon = 1e-12);
    }
}
