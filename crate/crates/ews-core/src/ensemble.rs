//! Aggregation of method outputs into ensemble signals.
//!
//! Four procedures: best-of picks the method with the best in-sample
//! relative usefulness and passes its outputs through; voting signals when
//! a strict majority of methods signal; the arithmetic and weighted means
//! combine calibrated probabilities into one series that is then
//! thresholded exactly like a single method's output. Weights always come
//! from in-sample performance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateKind {
    BestOf,
    Vote,
    Mean,
    WeightedMean,
}

impl AggregateKind {
    pub fn name(self) -> &'static str {
        match self {
            AggregateKind::BestOf => "best_of",
            AggregateKind::Vote => "vote",
            AggregateKind::Mean => "mean",
            AggregateKind::WeightedMean => "weighted_mean",
        }
    }

    pub fn all() -> [AggregateKind; 4] {
        [
            AggregateKind::BestOf,
            AggregateKind::Vote,
            AggregateKind::Mean,
            AggregateKind::WeightedMean,
        ]
    }
}

/// Index of the method with the best in-sample relative usefulness; ties go
/// to the earliest list position.
pub fn best_of_index(in_sample_ur: &[f64]) -> Result<usize> {
    if in_sample_ur.is_empty() {
        return Err(Error::EmptyInput("best-of over zero methods"));
    }
    let mut best = 0;
    for (i, &ur) in in_sample_ur.iter().enumerate().skip(1) {
        if ur > in_sample_ur[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Per-observation share of methods that signal.
pub fn vote_share(signals: &[Vec<bool>]) -> Result<Vec<f64>> {
    let m = signals.len();
    if m == 0 {
        return Err(Error::EmptyInput("vote over zero methods"));
    }
    let n = signals[0].len();
    for s in signals {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                left: s.len(),
                right: n,
                context: "vote signal series",
            });
        }
    }
    Ok((0..n)
        .map(|i| signals.iter().filter(|s| s[i]).count() as f64 / m as f64)
        .collect())
}

/// Majority vote: signal when strictly more than half of the methods signal,
/// so an exact split stays silent.
pub fn vote(signals: &[Vec<bool>]) -> Result<Vec<bool>> {
    Ok(vote_share(signals)?.into_iter().map(|s| s > 0.5).collect())
}

/// Normalized aggregation weights from in-sample usefulness: methods with
/// negative usefulness are dropped, the rest renormalized to sum to one.
/// When nothing positive remains (all negative, or all kept weights zero)
/// every method gets equal weight.
pub fn normalize_weights(in_sample_ur: &[f64]) -> Result<Vec<f64>> {
    let m = in_sample_ur.len();
    if m == 0 {
        return Err(Error::EmptyInput("weights over zero methods"));
    }
    for (i, &w) in in_sample_ur.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::NonFinite {
                position: i,
                context: "aggregation weight",
            });
        }
    }
    let kept_sum: f64 = in_sample_ur.iter().filter(|&&w| w >= 0.0).sum();
    if kept_sum <= 0.0 {
        return Ok(vec![1.0 / m as f64; m]);
    }
    Ok(in_sample_ur
        .iter()
        .map(|&w| if w >= 0.0 { w / kept_sum } else { 0.0 })
        .collect())
}

/// Convex combination of per-method probability series under the given
/// weights (which must sum to one, as produced by [`normalize_weights`]).
pub fn combine_probs(probs: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("aggregate over zero methods"));
    }
    if probs.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: weights.len(),
            context: "method series vs weights",
        });
    }
    let n = probs[0].len();
    let mut out = vec![0.0; n];
    for (series, &w) in probs.iter().zip(weights) {
        if series.len() != n {
            return Err(Error::LengthMismatch {
                left: series.len(),
                right: n,
                context: "aggregate probability series",
            });
        }
        for (o, &p) in out.iter_mut().zip(series) {
            *o += w * p;
        }
    }
    Ok(out)
}

/// Equal weights over `m` methods.
pub fn uniform_weights(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn best_of_ties_go_to_list_order() {
        assert_eq!(best_of_index(&[0.3, 0.7]).unwrap(), 1);
        assert_eq!(best_of_index(&[0.5, 0.5, 0.4]).unwrap(), 0);
        assert_eq!(best_of_index(&[-0.2]).unwrap(), 0);
        assert!(best_of_index(&[]).is_err());
    }

    #[test]
    fn vote_requires_strict_majority() {
        let signals = vec![vec![true, true, false], vec![true, false, false]];
        // Exact 1-of-2 split at position 1 must stay silent.
        assert_eq!(vote(&signals).unwrap(), vec![true, false, false]);

        let twelve: Vec<Vec<bool>> = (0..12).map(|m| vec![m < 7]).collect();
        assert_eq!(vote(&twelve).unwrap(), vec![true]);
        let six: Vec<Vec<bool>> = (0..12).map(|m| vec![m < 6]).collect();
        assert_eq!(vote(&six).unwrap(), vec![false]);
    }

    #[test]
    fn vote_equals_thresholded_mean_of_signals() {
        let signals = vec![
            vec![true, false, true, true],
            vec![false, false, true, true],
            vec![true, false, false, true],
        ];
        let share = vote_share(&signals).unwrap();
        let expected: Vec<bool> = share.iter().map(|&s| s > 0.5).collect();
        assert_eq!(vote(&signals).unwrap(), expected);
    }

    #[test]
    fn negative_weights_are_dropped_and_renormalized() {
        let w = normalize_weights(&[0.2, -0.1, 0.4]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(w[2], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn all_negative_weights_fall_back_to_equal() {
        let w = normalize_weights(&[-0.5, -0.1, -0.9]).unwrap();
        assert_eq!(w, vec![1.0 / 3.0; 3]);
        // All-zero usefulness also has nothing to renormalize.
        let z = normalize_weights(&[0.0, 0.0]).unwrap();
        assert_eq!(z, vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_combination_is_the_arithmetic_mean() {
        let probs = vec![vec![0.2, 0.8], vec![0.4, 0.6], vec![0.9, 0.1]];
        let mean = combine_probs(&probs, &uniform_weights(3)).unwrap();
        assert_abs_diff_eq!(mean[0], (0.2 + 0.4 + 0.9) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mean[1], (0.8 + 0.6 + 0.1) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn combinations_stay_in_unit_interval() {
        let probs = vec![vec![0.0, 1.0, 0.3], vec![1.0, 1.0, 0.9]];
        let w = normalize_weights(&[0.3, 0.7]).unwrap();
        for p in combine_probs(&probs, &w).unwrap() {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
