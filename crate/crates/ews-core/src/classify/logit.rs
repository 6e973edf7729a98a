//! Logistic regression, plain and L1-penalized.
//!
//! The plain fit maximizes the Bernoulli likelihood by iteratively
//! reweighted least squares. The LASSO variant minimizes the average
//! negative log-likelihood plus lambda times the L1 norm of the slope
//! coefficients (intercept unpenalized) by cyclic coordinate descent inside
//! the IRLS quadratic approximation, on internally standardized features.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::classify::{check_both_classes, logistic, FamilyFit, FeatureMatrix, Model, Standardizer};
use crate::error::{Error, Result};

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const LASSO_TOL: f64 = 1e-7;
const WEIGHT_FLOOR: f64 = 1e-10;

fn deviance(probs: &[f64], y: &[bool]) -> f64 {
    let mut d = 0.0;
    for (&p, &yi) in probs.iter().zip(y) {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        d += if yi { p.ln() } else { (1.0 - p).ln() };
    }
    -2.0 * d
}

struct LogitModel {
    intercept: f64,
    coef: Vec<f64>,
}

impl Model for LogitModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let z = self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        logistic(z)
    }
}

/// IRLS coefficients on the original feature scale, intercept first.
/// The second element reports convergence within the iteration budget.
pub fn logit_coefficients(x: &FeatureMatrix, y: &[bool]) -> Result<(Vec<f64>, bool)> {
    check_both_classes(y)?;
    let n = x.nrows();
    let g = x.ncols();
    let mut design = DMatrix::zeros(n, g + 1);
    for (i, row) in x.rows().enumerate() {
        design[(i, 0)] = 1.0;
        for (j, &v) in row.iter().enumerate() {
            design[(i, j + 1)] = v;
        }
    }
    let mut beta = DVector::zeros(g + 1);
    let mut best = beta.clone();
    let mut best_dev = f64::INFINITY;
    let mut prev_dev = f64::INFINITY;
    let mut converged = false;

    for _ in 0..IRLS_MAX_ITER {
        let eta = &design * &beta;
        let probs: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let mut weighted = design.clone();
        let mut rhs = DVector::zeros(g + 1);
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(WEIGHT_FLOOR);
            let z = eta[i] + ((y[i] as u8 as f64) - probs[i]) / w;
            for j in 0..=g {
                rhs[j] += design[(i, j)] * w * z;
            }
            for j in 0..=g {
                weighted[(i, j)] *= w;
            }
        }
        let mut normal = design.tr_mul(&weighted);
        let solved = match Cholesky::new(normal.clone()) {
            Some(c) => c.solve(&rhs),
            None => {
                let ridge = 1e-10 * normal.trace() / (g + 1) as f64;
                for j in 0..=g {
                    normal[(j, j)] += ridge;
                }
                match Cholesky::new(normal) {
                    Some(c) => c.solve(&rhs),
                    None => break,
                }
            }
        };
        beta = solved;

        let eta = &design * &beta;
        let probs: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let dev = deviance(&probs, y);
        if dev < best_dev {
            best_dev = dev;
            best = beta.clone();
        }
        if (prev_dev - dev).abs() < IRLS_TOL {
            converged = true;
            break;
        }
        prev_dev = dev;
    }
    Ok((best.iter().copied().collect(), converged))
}

pub(crate) fn fit_logit(x: &FeatureMatrix, y: &[bool]) -> Result<FamilyFit> {
    let (coef, converged) = logit_coefficients(x, y)?;
    Ok(FamilyFit {
        model: Box::new(LogitModel {
            intercept: coef[0],
            coef: coef[1..].to_vec(),
        }),
        converged,
        warning: None,
    })
}

struct LassoModel {
    standardizer: Standardizer,
    intercept: f64,
    coef: Vec<f64>,
}

impl Model for LassoModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.transform_row(x);
        let z = self.intercept + self.coef.iter().zip(&xs).map(|(c, v)| c * v).sum::<f64>();
        logistic(z)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct LassoFit {
    intercept: f64,
    coef: Vec<f64>,
    converged: bool,
}

/// Penalized objective: average negative log-likelihood + lambda * ||beta||_1.
fn lasso_objective(
    xs: &FeatureMatrix,
    y: &[bool],
    intercept: f64,
    coef: &[f64],
    lambda: f64,
) -> f64 {
    let n = xs.nrows() as f64;
    let mut nll = 0.0;
    for (row, &yi) in xs.rows().zip(y) {
        let z = intercept + coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>();
        let p = logistic(z).clamp(1e-12, 1.0 - 1e-12);
        nll -= if yi { p.ln() } else { (1.0 - p).ln() };
    }
    nll / n + lambda * coef.iter().map(|c| c.abs()).sum::<f64>()
}

fn fit_lasso_standardized(
    xs: &FeatureMatrix,
    y: &[bool],
    lambda: f64,
) -> LassoFit {
    let n = xs.nrows();
    let g = xs.ncols();
    let nf = n as f64;
    let pos = y.iter().filter(|&&v| v).count() as f64;
    let mut intercept = logistic_inverse(pos / nf);
    let mut coef = vec![0.0; g];
    let mut converged = false;
    let mut prev_obj = lasso_objective(xs, y, intercept, &coef, lambda);

    for _ in 0..IRLS_MAX_ITER {
        // Quadratic approximation at the current estimate.
        let mut weights = vec![0.0; n];
        let mut resid = vec![0.0; n]; // z - intercept - x'beta, weighted residual
        for (i, row) in xs.rows().enumerate() {
            let eta = intercept + coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>();
            let p = logistic(eta);
            let w = (p * (1.0 - p)).max(WEIGHT_FLOOR);
            weights[i] = w;
            resid[i] = ((y[i] as u8 as f64) - p) / w;
        }
        let denom: Vec<f64> = (0..g)
            .map(|j| {
                let mut s = 0.0;
                for (i, row) in xs.rows().enumerate() {
                    s += weights[i] * row[j] * row[j];
                }
                s / nf
            })
            .collect();
        let wsum: f64 = weights.iter().sum();

        // Cyclic coordinate descent on the weighted least squares problem.
        for _ in 0..1000 {
            let mut max_delta: f64 = 0.0;
            for j in 0..g {
                if denom[j] <= 0.0 {
                    continue;
                }
                let mut rho = 0.0;
                for (i, row) in xs.rows().enumerate() {
                    rho += weights[i] * row[j] * resid[i];
                }
                rho = rho / nf + denom[j] * coef[j];
                let new = soft_threshold(rho, lambda) / denom[j];
                let delta = new - coef[j];
                if delta != 0.0 {
                    for (i, row) in xs.rows().enumerate() {
                        resid[i] -= delta * row[j];
                    }
                    coef[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            let shift: f64 = weights
                .iter()
                .zip(&resid)
                .map(|(w, r)| w * r)
                .sum::<f64>()
                / wsum;
            if shift != 0.0 {
                intercept += shift;
                for r in &mut resid {
                    *r -= shift;
                }
                max_delta = max_delta.max(shift.abs());
            }
            if max_delta < LASSO_TOL {
                break;
            }
        }

        let obj = lasso_objective(xs, y, intercept, &coef, lambda);
        if (prev_obj - obj).abs() < LASSO_TOL {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    LassoFit {
        intercept,
        coef,
        converged,
    }
}

fn logistic_inverse(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// LASSO coefficients mapped back to the original feature scale,
/// intercept first.
pub fn lasso_coefficients(x: &FeatureMatrix, y: &[bool], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be >= 0"));
    }
    check_both_classes(y)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let fit = fit_lasso_standardized(&xs, y, lambda);
    let mut out = vec![0.0; x.ncols() + 1];
    let mut intercept = fit.intercept;
    for (j, (&c, (&m, &s))) in fit
        .coef
        .iter()
        .zip(standardizer.mean.iter().zip(&standardizer.scale))
        .enumerate()
    {
        out[j + 1] = c / s;
        intercept -= c * m / s;
    }
    out[0] = intercept;
    Ok(out)
}

pub(crate) fn fit_lasso(x: &FeatureMatrix, y: &[bool], lambda: f64) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let fit = fit_lasso_standardized(&xs, y, lambda);
    Ok(FamilyFit {
        model: Box::new(LassoModel {
            standardizer,
            intercept: fit.intercept,
            coef: fit.coef,
        }),
        converged: fit.converged,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MethodSpec;
    use crate::eval::Preference;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn logistic_dgp(n: usize, beta0: f64, beta1: f64, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = crate::rng::rng_from(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random::<f64>() * 4.0 - 2.0;
            let p = logistic(beta0 + beta1 * x);
            rows.push(vec![x]);
            y.push(rng.random::<f64>() < p);
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    /// Gradient ascent with backtracking on the exact log-likelihood; slow
    /// but independent of the IRLS algebra.
    fn gradient_ascent_oracle(x: &FeatureMatrix, y: &[bool]) -> Vec<f64> {
        let n = x.nrows();
        let g = x.ncols();
        let ll = |beta: &[f64]| -> f64 {
            let mut total = 0.0;
            for (row, &yi) in x.rows().zip(y) {
                let z = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
                let p = logistic(z).clamp(1e-15, 1.0 - 1e-15);
                total += if yi { p.ln() } else { (1.0 - p).ln() };
            }
            total
        };
        let grad = |beta: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; g + 1];
            for (row, &yi) in x.rows().zip(y) {
                let z = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
                let e = (yi as u8 as f64) - logistic(z);
                out[0] += e;
                for (o, &v) in out[1..].iter_mut().zip(row) {
                    *o += e * v;
                }
            }
            out
        };
        let mut beta = vec![0.0; g + 1];
        let mut value = ll(&beta);
        let mut step = 1.0 / n as f64;
        for _ in 0..200_000 {
            let dir = grad(&beta);
            let norm = dir.iter().fold(0.0f64, |a, &d| a.max(d.abs()));
            if norm < 1e-10 {
                break;
            }
            let mut local = step;
            loop {
                let cand: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + local * d).collect();
                let cand_value = ll(&cand);
                if cand_value > value {
                    beta = cand;
                    value = cand_value;
                    step = local * 1.5;
                    break;
                }
                local /= 2.0;
                if local < 1e-18 {
                    return beta;
                }
            }
        }
        beta
    }

    #[test]
    fn irls_matches_gradient_ascent_oracle() {
        let (x, y) = logistic_dgp(200, 0.5, 1.5, 303);
        let (coef, converged) = logit_coefficients(&x, &y).unwrap();
        assert!(converged);
        let oracle = gradient_ascent_oracle(&x, &y);
        for (c, o) in coef.iter().zip(&oracle) {
            assert_abs_diff_eq!(c, o, epsilon = 1e-4);
        }
    }

    #[test]
    fn uninformative_features_give_class_frequency() {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0, 0.0]).collect();
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = MethodSpec::Logit.fit(&x, &y, Preference::benchmark(), 0).unwrap();
        assert_abs_diff_eq!(model.predict_proba(&[0.0, 0.0]), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn lasso_at_zero_penalty_matches_logit() {
        let (x, y) = logistic_dgp(150, -0.3, 1.1, 909);
        let (logit_coef, _) = logit_coefficients(&x, &y).unwrap();
        let lasso_coef = lasso_coefficients(&x, &y, 0.0).unwrap();
        for (a, b) in logit_coef.iter().zip(&lasso_coef) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-3);
        }
    }

    #[test]
    fn heavy_penalty_zeroes_all_slopes() {
        let (x, y) = logistic_dgp(100, 0.2, 1.0, 77);
        let coef = lasso_coefficients(&x, &y, 10.0).unwrap();
        for c in &coef[1..] {
            assert_eq!(*c, 0.0);
        }
    }

    #[test]
    fn lasso_is_invariant_to_feature_scaling() {
        let (x, y) = logistic_dgp(120, 0.1, 0.9, 41);
        let scaled_rows: Vec<Vec<f64>> = x.rows().map(|r| vec![r[0] * 1000.0]).collect();
        let xs = FeatureMatrix::from_rows(&scaled_rows).unwrap();
        let spec = MethodSpec::LogitLasso { lambda: 0.0012 };
        let pref = Preference::benchmark();
        let m1 = spec.fit(&x, &y, pref, 0).unwrap();
        let m2 = spec.fit(&xs, &y, pref, 0).unwrap();
        for row in x.rows() {
            let p1 = m1.predict_proba(row);
            let p2 = m2.predict_proba(&[row[0] * 1000.0]);
            assert_abs_diff_eq!(p1, p2, epsilon = 1e-6);
        }
    }

    #[test]
    fn benchmark_lambda_shrinks_but_keeps_signal() {
        let (x, y) = logistic_dgp(400, 0.5, 1.5, 5150);
        let (logit_coef, _) = logit_coefficients(&x, &y).unwrap();
        let lasso_coef = lasso_coefficients(&x, &y, 0.0012).unwrap();
        assert!(lasso_coef[1].abs() > 0.5);
        assert!(lasso_coef[1].abs() < logit_coef[1].abs());
    }
}
