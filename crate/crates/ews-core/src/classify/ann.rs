//! Single-hidden-layer neural network trained by full-batch gradient
//! descent with an adaptive step.
//!
//! Logistic activations throughout, cross-entropy loss plus L2 decay on all
//! weights and biases. Initial weights are uniform in [-0.5, 0.5] from the
//! seed. The step doubles down gently on success and halves on failure, and
//! rejected steps still consume an iteration, so the budget is honest.

use rand::Rng;

use crate::classify::{check_both_classes, logistic, FamilyFit, FeatureMatrix, Model, Standardizer};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Number of parameters of a net with the given input width and hidden size:
/// a bias per hidden unit and per output.
pub fn param_count(features: usize, hidden: usize) -> usize {
    hidden * (features + 1) + hidden + 1
}

fn forward(params: &[f64], hidden: usize, row: &[f64], activations: &mut [f64]) -> f64 {
    let g = row.len();
    let w1_len = hidden * (g + 1);
    for h in 0..hidden {
        let w = &params[h * (g + 1)..(h + 1) * (g + 1)];
        let mut z = w[g];
        for (wi, &xi) in w[..g].iter().zip(row) {
            z += wi * xi;
        }
        activations[h] = logistic(z);
    }
    let w2 = &params[w1_len..];
    let mut z = w2[hidden];
    for (wi, &ai) in w2[..hidden].iter().zip(activations.iter()) {
        z += wi * ai;
    }
    logistic(z)
}

/// Cross-entropy plus L2 decay objective on standardized features.
pub fn objective(
    params: &[f64],
    x: &FeatureMatrix,
    y: &[bool],
    hidden: usize,
    decay: f64,
) -> f64 {
    assert_eq!(params.len(), param_count(x.ncols(), hidden), "parameter layout");
    let mut activations = vec![0.0; hidden];
    let mut loss = 0.0;
    for (row, &yi) in x.rows().zip(y) {
        let o = forward(params, hidden, row, &mut activations).clamp(1e-12, 1.0 - 1e-12);
        loss -= if yi { o.ln() } else { (1.0 - o).ln() };
    }
    loss + 0.5 * decay * params.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`objective`] by backpropagation.
pub fn gradient(
    params: &[f64],
    x: &FeatureMatrix,
    y: &[bool],
    hidden: usize,
    decay: f64,
) -> Vec<f64> {
    assert_eq!(params.len(), param_count(x.ncols(), hidden), "parameter layout");
    let g = x.ncols();
    let w1_len = hidden * (g + 1);
    let w2 = &params[w1_len..];
    let mut grad = vec![0.0; params.len()];
    let mut activations = vec![0.0; hidden];
    for (row, &yi) in x.rows().zip(y) {
        let o = forward(params, hidden, row, &mut activations);
        let delta_out = o - (yi as u8 as f64);
        let gw2 = &mut grad[w1_len..];
        for (gh, &ah) in gw2[..hidden].iter_mut().zip(activations.iter()) {
            *gh += delta_out * ah;
        }
        gw2[hidden] += delta_out;
        for h in 0..hidden {
            let delta_h = delta_out * w2[h] * activations[h] * (1.0 - activations[h]);
            let gw1 = &mut grad[h * (g + 1)..(h + 1) * (g + 1)];
            for (gi, &xi) in gw1[..g].iter_mut().zip(row) {
                *gi += delta_h * xi;
            }
            gw1[g] += delta_h;
        }
    }
    for (gi, wi) in grad.iter_mut().zip(params) {
        *gi += decay * wi;
    }
    grad
}

struct AnnModel {
    standardizer: Standardizer,
    params: Vec<f64>,
    hidden: usize,
}

impl Model for AnnModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.transform_row(x);
        let mut activations = vec![0.0; self.hidden];
        forward(&self.params, self.hidden, &xs, &mut activations)
    }
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[bool],
    hidden: usize,
    iterations: usize,
    decay: f64,
    seed: u64,
) -> Result<FamilyFit> {
    check_both_classes(y)?;
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("ann features"));
    }
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let mut rng = rng_from(seed);
    let mut params: Vec<f64> = (0..param_count(x.ncols(), hidden))
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();

    let mut value = objective(&params, &xs, y, hidden, decay);
    let mut step = 0.5;
    let mut converged = false;
    for _ in 0..iterations {
        let grad = gradient(&params, &xs, y, hidden, decay);
        let grad_norm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        if grad_norm < 1e-5 {
            converged = true;
            break;
        }
        let trial: Vec<f64> = params
            .iter()
            .zip(&grad)
            .map(|(w, g)| w - step * g)
            .collect();
        let trial_value = objective(&trial, &xs, y, hidden, decay);
        if trial_value <= value {
            params = trial;
            value = trial_value;
            step *= 1.1;
        } else {
            step *= 0.5;
        }
    }
    Ok(FamilyFit {
        model: Box::new(AnnModel {
            standardizer,
            params,
            hidden,
        }),
        converged,
        warning: None,
    })
}
