//! Signal extraction: a univariate threshold rule on one indicator.
//!
//! The method watches a single indicator column and signals when its value
//! crosses a threshold. The signaling direction (high values alarming, or
//! low values) is chosen by in-sample usefulness. The raw model output is
//! the oriented indicator value; the probability handed to ensembles is its
//! in-sample percentile.

use serde::{Deserialize, Serialize};

use crate::calibrate::Ecdf;
use crate::classify::{FamilyFit, FeatureMatrix, Model};
use crate::error::Result;
use crate::eval::{optimize_threshold, Preference};

/// Which side of the threshold raises the alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Large indicator values signal a coming crisis.
    Greater,
    /// Small indicator values signal a coming crisis.
    Less,
}

struct SignalModel {
    indicator: usize,
    direction: Direction,
}

impl Model for SignalModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let v = x[self.indicator];
        match self.direction {
            Direction::Greater => v,
            Direction::Less => -v,
        }
    }
}

/// In-sample usefulness of one oriented indicator, measured at the optimal
/// threshold on the percentile scale.
fn direction_ur(
    values: &[f64],
    y: &[bool],
    direction: Direction,
    pref: Preference,
) -> Result<f64> {
    let oriented: Vec<f64> = match direction {
        Direction::Greater => values.to_vec(),
        Direction::Less => values.iter().map(|v| -v).collect(),
    };
    let percentiles = Ecdf::fit(&oriented)?.apply_all(&oriented);
    Ok(optimize_threshold(&percentiles, y, pref, None)?.usefulness_relative)
}

fn best_direction(values: &[f64], y: &[bool], pref: Preference) -> Result<(Direction, f64)> {
    let greater = direction_ur(values, y, Direction::Greater, pref)?;
    let less = direction_ur(values, y, Direction::Less, pref)?;
    if less > greater {
        Ok((Direction::Less, less))
    } else {
        Ok((Direction::Greater, greater))
    }
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[bool],
    indicator: usize,
    pref: Preference,
) -> Result<FamilyFit> {
    let values = x.column(indicator);
    let (direction, _) = best_direction(&values, y, pref)?;
    Ok(FamilyFit::clean(Box::new(SignalModel { indicator, direction })))
}

/// One row of the per-indicator ranking table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorRank {
    pub indicator: usize,
    pub direction: Direction,
    pub usefulness_relative: f64,
}

/// Ranks every indicator column by the in-sample usefulness of its best
/// oriented threshold rule, best first; ties keep column order.
pub fn rank_indicators(
    x: &FeatureMatrix,
    y: &[bool],
    pref: Preference,
) -> Result<Vec<IndicatorRank>> {
    let mut table = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let values = x.column(j);
        let (direction, ur) = best_direction(&values, y, pref)?;
        table.push(IndicatorRank {
            indicator: j,
            direction,
            usefulness_relative: ur,
        });
    }
    table.sort_by(|a, b| {
        b.usefulness_relative
            .total_cmp(&a.usefulness_relative)
            .then(a.indicator.cmp(&b.indicator))
    });
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MethodSpec;
    use approx::assert_abs_diff_eq;

    fn perfect_data() -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, -(i as f64), ((i * 13) % 7) as f64])
            .collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 15).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn perfect_indicator_reaches_full_usefulness() {
        let (x, y) = perfect_data();
        let ranks = rank_indicators(&x, &y, Preference::benchmark()).unwrap();
        assert_eq!(ranks[0].indicator, 0);
        assert_eq!(ranks[0].direction, Direction::Greater);
        assert_abs_diff_eq!(ranks[0].usefulness_relative, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_flip_recovers_usefulness_with_less_direction() {
        let (x, y) = perfect_data();
        let ranks = rank_indicators(&x, &y, Preference::benchmark()).unwrap();
        let flipped = ranks.iter().find(|r| r.indicator == 1).unwrap();
        assert_eq!(flipped.direction, Direction::Less);
        assert_abs_diff_eq!(flipped.usefulness_relative, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_indicator_ranks_at_zero_usefulness() {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![2.0]).collect();
        let y: Vec<bool> = (0..10).map(|i| i >= 7).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let ranks = rank_indicators(&x, &y, Preference::benchmark()).unwrap();
        assert!(ranks[0].usefulness_relative <= 0.0);
    }

    #[test]
    fn fitted_model_outputs_percentile_probabilities() {
        let (x, y) = perfect_data();
        let spec = MethodSpec::SignalExtraction { indicator: 0 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        let p_hi = model.predict_proba(&[19.0, 0.0, 0.0]);
        let p_lo = model.predict_proba(&[0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p_hi, 1.0, epsilon = 1e-12);
        assert!(p_lo <= 0.05 + 1e-12);
        assert!(p_hi > p_lo);
    }
}
