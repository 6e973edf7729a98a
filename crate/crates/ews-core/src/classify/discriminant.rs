//! Linear and quadratic discriminant analysis.
//!
//! Both model the class-conditional feature distributions as multivariate
//! Gaussians with maximum-likelihood estimates. LDA pools one covariance
//! across classes, which makes the log posterior odds linear in x; QDA
//! keeps per-class covariances and needs more data, which is why its
//! recursive analysis starts later than the other methods.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::classify::{check_both_classes, logistic, FamilyFit, FeatureMatrix, Model};
use crate::error::{Error, Result};

fn class_mean(x: &FeatureMatrix, y: &[bool], class: bool) -> DVector<f64> {
    let g = x.ncols();
    let mut mean = DVector::zeros(g);
    let mut n = 0.0;
    for (row, &label) in x.rows().zip(y) {
        if label == class {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            n += 1.0;
        }
    }
    mean / n
}

/// Adds scatter of the given class around `mean` into `acc`, returning the
/// class count.
fn accumulate_scatter(
    x: &FeatureMatrix,
    y: &[bool],
    class: bool,
    mean: &DVector<f64>,
    acc: &mut DMatrix<f64>,
) -> usize {
    let g = x.ncols();
    let mut n = 0;
    let mut d = DVector::zeros(g);
    for (row, &label) in x.rows().zip(y) {
        if label == class {
            for (e, (&v, m)) in d.iter_mut().zip(row.iter().zip(mean.iter())) {
                *e = v - m;
            }
            acc.ger(1.0, &d, &d, 1.0);
            n += 1;
        }
    }
    n
}

/// Cholesky that also rejects numerically near-singular matrices: a factor
/// whose smallest pivot is below 1e-6 of the largest means the inverse
/// would amplify rounding noise past any useful precision.
fn guarded_cholesky(cov: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(cov)?;
    let diag = chol.l_dirty().diagonal();
    let dmax = diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d));
    let dmin = diag.iter().fold(f64::INFINITY, |a, &d| a.min(d));
    if dmin.is_finite() && dmin > dmax * 1e-6 {
        Some(chol)
    } else {
        None
    }
}

/// Covariance factorization with the fallback shared by LDA and QDA: when
/// the matrix is singular or near-singular, eps * trace/G is added to the
/// diagonal once and the fit carries a warning.
fn factor_covariance(
    mut cov: DMatrix<f64>,
    context: &str,
) -> Result<(Cholesky<f64, Dyn>, Option<String>)> {
    match guarded_cholesky(cov.clone()) {
        Some(c) => Ok((c, None)),
        None => {
            let g = cov.nrows() as f64;
            let eps = 1e-6 * cov.trace() / g;
            for i in 0..cov.nrows() {
                cov[(i, i)] += eps;
            }
            match guarded_cholesky(cov) {
                Some(c) => Ok((
                    c,
                    Some(format!("{context}: near-singular covariance, added {eps:.3e} ridge")),
                )),
                None => Err(Error::Numeric(format!(
                    "{context}: covariance not positive definite even after regularization"
                ))),
            }
        }
    }
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

struct LdaModel {
    weights: DVector<f64>,
    bias: f64,
}

impl Model for LdaModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let score: f64 = self
            .weights
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias;
        logistic(score)
    }
}

pub(crate) fn fit_lda(x: &FeatureMatrix, y: &[bool]) -> Result<FamilyFit> {
    let (n_pos, n_neg) = check_both_classes(y)?;
    let n = x.nrows();
    let g = x.ncols();
    let mean0 = class_mean(x, y, false);
    let mean1 = class_mean(x, y, true);
    let mut scatter = DMatrix::zeros(g, g);
    accumulate_scatter(x, y, false, &mean0, &mut scatter);
    accumulate_scatter(x, y, true, &mean1, &mut scatter);
    let cov = scatter / n as f64;
    let (chol, warning) = factor_covariance(cov, "lda")?;

    // Linear posterior log odds: w = Sigma^-1 (mu1 - mu0),
    // b = -(mu1' w1 - mu0' w0)/2 + ln(pi1/pi0) with wk = Sigma^-1 mu_k.
    let weights = chol.solve(&(&mean1 - &mean0));
    let w1 = chol.solve(&mean1);
    let w0 = chol.solve(&mean0);
    let prior_ratio = (n_pos as f64 / n as f64).ln() - (n_neg as f64 / n as f64).ln();
    let bias = -0.5 * (mean1.dot(&w1) - mean0.dot(&w0)) + prior_ratio;
    Ok(FamilyFit {
        model: Box::new(LdaModel { weights, bias }),
        converged: true,
        warning,
    })
}

struct ClassGaussian {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_prior: f64,
    log_det: f64,
}

impl ClassGaussian {
    fn log_score(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(
            self.mean.len(),
            x.iter().zip(self.mean.iter()).map(|(v, m)| v - m),
        );
        let solved = self.chol.solve(&d);
        self.log_prior - 0.5 * self.log_det - 0.5 * d.dot(&solved)
    }
}

struct QdaModel {
    class0: ClassGaussian,
    class1: ClassGaussian,
}

impl Model for QdaModel {
    fn predict(&self, x: &[f64]) -> f64 {
        logistic(self.class1.log_score(x) - self.class0.log_score(x))
    }
}

pub(crate) fn fit_qda(x: &FeatureMatrix, y: &[bool]) -> Result<FamilyFit> {
    let (n_pos, n_neg) = check_both_classes(y)?;
    let g = x.ncols();
    if n_pos <= g || n_neg <= g {
        return Err(Error::DegenerateClasses(format!(
            "qda needs more than {g} observations per class, got {n_pos} positives / {n_neg} negatives"
        )));
    }
    let n = x.nrows() as f64;
    let mut warnings = Vec::new();
    let mut build = |class: bool, count: usize| -> Result<ClassGaussian> {
        let mean = class_mean(x, y, class);
        let mut scatter = DMatrix::zeros(g, g);
        accumulate_scatter(x, y, class, &mean, &mut scatter);
        let cov = scatter / count as f64;
        let (chol, warning) = factor_covariance(cov, "qda")?;
        if let Some(w) = warning {
            warnings.push(w);
        }
        let log_det = log_det(&chol);
        Ok(ClassGaussian {
            mean,
            chol,
            log_prior: (count as f64 / n).ln(),
            log_det,
        })
    };
    let class0 = build(false, n_neg)?;
    let class1 = build(true, n_pos)?;
    Ok(FamilyFit {
        model: Box::new(QdaModel { class0, class1 }),
        converged: true,
        warning: if warnings.is_empty() {
            None
        } else {
            Some(warnings.join("; "))
        },
    })
}
