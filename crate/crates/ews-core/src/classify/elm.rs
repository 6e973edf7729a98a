//! Extreme learning machine: a random hidden layer with a least-squares
//! readout.
//!
//! Input weights and biases are drawn uniformly from [-1, 1] and never
//! trained; only the linear output layer is estimated, by ridge-regularized
//! least squares on the tan-sigmoid hidden activations. Raw outputs are
//! clipped to [0, 1] before calibration.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::classify::{check_both_classes, FamilyFit, FeatureMatrix, Model, Standardizer};
use crate::error::{Error, Result};
use crate::rng::rng_from;

const RIDGE: f64 = 1e-8;

struct ElmModel {
    standardizer: Standardizer,
    /// hidden x G input weights.
    w_in: DMatrix<f64>,
    bias: DVector<f64>,
    beta: DVector<f64>,
}

impl ElmModel {
    fn hidden_row(&self, xs: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(xs);
        let mut h = &self.w_in * x + &self.bias;
        h.apply(|v| *v = v.tanh());
        h
    }
}

impl Model for ElmModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.transform_row(x);
        let h = self.hidden_row(&xs);
        h.dot(&self.beta).clamp(0.0, 1.0)
    }
}

struct Design {
    standardizer: Standardizer,
    w_in: DMatrix<f64>,
    bias: DVector<f64>,
    h: DMatrix<f64>,
}

fn build_design(x: &FeatureMatrix, hidden: usize, seed: u64) -> Design {
    let n = x.nrows();
    let g = x.ncols();
    let mut rng = rng_from(seed);
    // Row-major weight draws first, then biases; the order is part of the
    // reproducibility contract.
    let w_in = DMatrix::from_fn(hidden, g, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let bias = DVector::from_fn(hidden, |_, _| rng.random::<f64>() * 2.0 - 1.0);

    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let mut h = DMatrix::zeros(n, hidden);
    for (i, row) in xs.rows().enumerate() {
        for j in 0..hidden {
            let mut z = bias[j];
            for (k, &v) in row.iter().enumerate() {
                z += w_in[(j, k)] * v;
            }
            h[(i, j)] = z.tanh();
        }
    }
    Design { standardizer, w_in, bias, h }
}

fn solve_output_layer(h: &DMatrix<f64>, y: &[bool]) -> Result<DVector<f64>> {
    let targets = DVector::from_iterator(y.len(), y.iter().map(|&v| v as u8 as f64));
    let mut normal = h.tr_mul(h);
    for j in 0..normal.nrows() {
        normal[(j, j)] += RIDGE;
    }
    let rhs = h.tr_mul(&targets);
    Ok(Cholesky::new(normal)
        .ok_or_else(|| Error::Numeric("elm normal equations not positive definite".into()))?
        .solve(&rhs))
}

/// The hidden-layer activation matrix and the solved output weights for a
/// given draw. This is the exact design and solution the fitted model uses,
/// exposed so the least-squares property of the readout can be checked
/// externally.
pub fn design_and_weights(
    x: &FeatureMatrix,
    y: &[bool],
    hidden: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_both_classes(y)?;
    let design = build_design(x, hidden, seed);
    let beta = solve_output_layer(&design.h, y)?;
    Ok((design.h, beta))
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[bool],
    hidden: usize,
    seed: u64,
) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let design = build_design(x, hidden, seed);
    let beta = solve_output_layer(&design.h, y)?;
    Ok(FamilyFit::clean(Box::new(ElmModel {
        standardizer: design.standardizer,
        w_in: design.w_in,
        bias: design.bias,
        beta,
    })))
}
