//! Twelve classifier families under one fit/predict contract.
//!
//! Every family consumes a row-major feature matrix and boolean labels and
//! produces a [`FittedModel`]: an opaque predictor together with its
//! in-sample outputs and the ECDF that converts any output to an in-sample
//! percentile. Raw outputs are probabilities in [0, 1] for all families
//! except signal extraction, whose raw score is the oriented indicator
//! value; its probability is defined as the percentile itself.
//!
//! Training is deterministic given the spec and a seed; families without
//! randomness ignore the seed.

pub mod ann;
pub mod discriminant;
pub mod elm;
pub mod knn;
pub mod logit;
pub mod naive_bayes;
pub mod signal;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::calibrate::Ecdf;
use crate::error::{Error, Result};
use crate::eval::Preference;

/// Dense row-major feature matrix; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    cols: usize,
}

impl FeatureMatrix {
    pub fn zeros(cols: usize) -> Self {
        FeatureMatrix { data: Vec::new(), cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = FeatureMatrix::zeros(cols);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: self.cols,
                context: "feature row width",
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Copies the given rows into a new matrix.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix { data, cols: self.cols }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row(i)[j]).collect()
    }
}

/// Per-feature affine map to zero mean and unit standard deviation on the
/// training set. Constant features keep scale 1 so they map to zero.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let (n, g) = (x.nrows(), x.ncols());
        let mut mean = vec![0.0; g];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; g];
        for row in x.rows() {
            for ((v, &m), &xv) in var.iter_mut().zip(&mean).zip(row) {
                *v += (xv - m) * (xv - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / (n as f64 - 1.0).max(1.0)).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(x.ncols());
        for row in x.rows() {
            out.push_row(&self.transform_row(row)).expect("same width");
        }
        out
    }
}

/// A fitted predictor. `predict` returns the family's raw output.
pub trait Model: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    fn predict_all(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

/// Classifier family plus its free parameters, as declared in configuration.
///
/// Defaults reproduce the benchmark parameter choices of the horse race.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    /// Univariate threshold rule on one indicator column.
    SignalExtraction {
        #[serde(default)]
        indicator: usize,
    },
    Lda,
    Qda,
    Logit,
    LogitLasso {
        #[serde(default = "defaults::lasso_lambda")]
        lambda: f64,
    },
    NaiveBayes,
    Knn {
        #[serde(default = "defaults::knn_k")]
        k: usize,
        #[serde(default = "defaults::knn_distance")]
        distance: f64,
    },
    Tree {
        #[serde(default = "defaults::tree_min_leaf")]
        min_leaf: usize,
    },
    RandomForest {
        #[serde(default = "defaults::forest_trees")]
        trees: usize,
        #[serde(default = "defaults::forest_mtry")]
        mtry: usize,
        #[serde(default = "defaults::forest_min_leaf")]
        min_leaf: usize,
    },
    Ann {
        #[serde(default = "defaults::ann_hidden")]
        hidden: usize,
        #[serde(default = "defaults::ann_iterations")]
        iterations: usize,
        #[serde(default = "defaults::ann_decay")]
        decay: f64,
    },
    Elm {
        #[serde(default = "defaults::elm_hidden")]
        hidden: usize,
    },
    Svm {
        #[serde(default = "defaults::svm_gamma")]
        gamma: f64,
        #[serde(default = "defaults::svm_cost")]
        cost: f64,
    },
}

mod defaults {
    pub fn lasso_lambda() -> f64 {
        0.0012
    }
    pub fn knn_k() -> usize {
        2
    }
    pub fn knn_distance() -> f64 {
        1.0
    }
    pub fn tree_min_leaf() -> usize {
        5
    }
    pub fn forest_trees() -> usize {
        180
    }
    pub fn forest_mtry() -> usize {
        5
    }
    pub fn forest_min_leaf() -> usize {
        1
    }
    pub fn ann_hidden() -> usize {
        8
    }
    pub fn ann_iterations() -> usize {
        200
    }
    pub fn ann_decay() -> f64 {
        0.005
    }
    pub fn elm_hidden() -> usize {
        300
    }
    pub fn svm_gamma() -> f64 {
        0.4
    }
    pub fn svm_cost() -> f64 {
        1.0
    }
}

impl MethodSpec {
    /// Stable identifier used in reports and artifact files.
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::SignalExtraction { .. } => "signal_extraction",
            MethodSpec::Lda => "lda",
            MethodSpec::Qda => "qda",
            MethodSpec::Logit => "logit",
            MethodSpec::LogitLasso { .. } => "logit_lasso",
            MethodSpec::NaiveBayes => "naive_bayes",
            MethodSpec::Knn { .. } => "knn",
            MethodSpec::Tree { .. } => "tree",
            MethodSpec::RandomForest { .. } => "random_forest",
            MethodSpec::Ann { .. } => "ann",
            MethodSpec::Elm { .. } => "elm",
            MethodSpec::Svm { .. } => "svm",
        }
    }

    /// All twelve families at their benchmark parameters. Signal extraction
    /// watches `signal_indicator`.
    pub fn benchmark_race(signal_indicator: usize) -> Vec<MethodSpec> {
        vec![
            MethodSpec::SignalExtraction { indicator: signal_indicator },
            MethodSpec::Lda,
            MethodSpec::Qda,
            MethodSpec::Logit,
            MethodSpec::LogitLasso { lambda: defaults::lasso_lambda() },
            MethodSpec::NaiveBayes,
            MethodSpec::Knn { k: defaults::knn_k(), distance: defaults::knn_distance() },
            MethodSpec::Tree { min_leaf: defaults::tree_min_leaf() },
            MethodSpec::RandomForest {
                trees: defaults::forest_trees(),
                mtry: defaults::forest_mtry(),
                min_leaf: defaults::forest_min_leaf(),
            },
            MethodSpec::Ann {
                hidden: defaults::ann_hidden(),
                iterations: defaults::ann_iterations(),
                decay: defaults::ann_decay(),
            },
            MethodSpec::Elm { hidden: defaults::elm_hidden() },
            MethodSpec::Svm { gamma: defaults::svm_gamma(), cost: defaults::svm_cost() },
        ]
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        self.validate_params()?;
        match *self {
            MethodSpec::SignalExtraction { indicator } => {
                if indicator >= n_features {
                    return Err(Error::param(
                        "indicator",
                        format!("index {indicator} out of range for {n_features} features"),
                    ));
                }
            }
            MethodSpec::RandomForest { mtry, .. } => {
                if mtry > n_features {
                    return Err(Error::param(
                        "mtry",
                        format!("must be in 1..={n_features}, got {mtry}"),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks the parameter constraints that do not depend on the data's
    /// feature count. The rest is checked at fit time.
    pub fn validate_params(&self) -> Result<()> {
        match *self {
            MethodSpec::LogitLasso { lambda } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::param("lambda", "must be >= 0"));
                }
            }
            MethodSpec::Knn { k, distance } => {
                if k == 0 {
                    return Err(Error::param("k", "must be >= 1"));
                }
                if !(distance.is_finite() && distance >= 1.0) {
                    return Err(Error::param("distance", "Minkowski order must be >= 1"));
                }
            }
            MethodSpec::Tree { min_leaf } => {
                if min_leaf == 0 {
                    return Err(Error::param("min_leaf", "must be >= 1"));
                }
            }
            MethodSpec::RandomForest { trees, mtry, min_leaf } => {
                if trees == 0 {
                    return Err(Error::param("trees", "must be >= 1"));
                }
                if mtry == 0 {
                    return Err(Error::param("mtry", "must be >= 1"));
                }
                if min_leaf == 0 {
                    return Err(Error::param("min_leaf", "must be >= 1"));
                }
            }
            MethodSpec::Ann { hidden, iterations, decay } => {
                if hidden == 0 {
                    return Err(Error::param("hidden", "must be >= 1"));
                }
                if iterations == 0 {
                    return Err(Error::param("iterations", "must be >= 1"));
                }
                if !(decay.is_finite() && decay >= 0.0) {
                    return Err(Error::param("decay", "must be >= 0"));
                }
            }
            MethodSpec::Elm { hidden } => {
                if hidden == 0 {
                    return Err(Error::param("hidden", "must be >= 1"));
                }
            }
            MethodSpec::Svm { gamma, cost } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::param("gamma", "must be > 0"));
                }
                if !(cost.is_finite() && cost > 0.0) {
                    return Err(Error::param("cost", "must be > 0"));
                }
            }
            MethodSpec::SignalExtraction { .. }
            | MethodSpec::Lda
            | MethodSpec::Qda
            | MethodSpec::Logit
            | MethodSpec::NaiveBayes => {}
        }
        Ok(())
    }

    /// Fits the family on training data. `seed` feeds any internal
    /// randomness (bootstraps, weight init, fold splits); refitting with the
    /// same arguments reproduces outputs bit for bit.
    pub fn fit(
        &self,
        x: &FeatureMatrix,
        y: &[bool],
        pref: Preference,
        seed: u64,
    ) -> Result<FittedModel> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
                context: "feature rows vs labels",
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("training data"));
        }
        self.validate(x.ncols())?;
        check_both_classes(y)?;

        let fit = match *self {
            MethodSpec::SignalExtraction { indicator } => signal::fit(x, y, indicator, pref)?,
            MethodSpec::Lda => discriminant::fit_lda(x, y)?,
            MethodSpec::Qda => discriminant::fit_qda(x, y)?,
            MethodSpec::Logit => logit::fit_logit(x, y)?,
            MethodSpec::LogitLasso { lambda } => logit::fit_lasso(x, y, lambda)?,
            MethodSpec::NaiveBayes => naive_bayes::fit(x, y)?,
            MethodSpec::Knn { k, distance } => knn::fit(x, y, k, distance)?,
            MethodSpec::Tree { min_leaf } => tree::fit_tree(x, y, min_leaf, seed)?,
            MethodSpec::RandomForest { trees, mtry, min_leaf } => {
                tree::fit_forest(x, y, trees, mtry, min_leaf, seed)?
            }
            MethodSpec::Ann { hidden, iterations, decay } => {
                ann::fit(x, y, hidden, iterations, decay, seed)?
            }
            MethodSpec::Elm { hidden } => elm::fit(x, y, hidden, seed)?,
            MethodSpec::Svm { gamma, cost } => svm::fit(x, y, gamma, cost, seed)?,
        };

        let in_sample_raw = fit.model.predict_all(x);
        for (i, &p) in in_sample_raw.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    position: i,
                    context: "in-sample model output",
                });
            }
        }
        let ecdf = Ecdf::fit(&in_sample_raw)?;
        Ok(FittedModel {
            family: self.name(),
            is_signal_extraction: matches!(self, MethodSpec::SignalExtraction { .. }),
            model: fit.model,
            in_sample_raw,
            ecdf,
            converged: fit.converged,
            warning: fit.warning,
        })
    }
}

/// What a family-specific fit routine hands back to the dispatcher.
pub(crate) struct FamilyFit {
    pub model: Box<dyn Model>,
    pub converged: bool,
    pub warning: Option<String>,
}

impl FamilyFit {
    pub(crate) fn clean(model: Box<dyn Model>) -> Self {
        FamilyFit { model, converged: true, warning: None }
    }
}

/// Numerically stable logistic function.
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Assigns each row to one of `folds` buckets, dealing shuffled positives
/// and shuffled negatives round-robin so class shares stay balanced.
pub(crate) fn stratified_assignment(
    y: &[bool],
    folds: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    use rand::Rng as _;
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    for list in [&mut pos, &mut neg] {
        for i in (1..list.len()).rev() {
            let j = rng.random_range(0..=i);
            list.swap(i, j);
        }
    }
    let mut assignment = vec![0usize; y.len()];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        assignment[i] = slot % folds;
    }
    assignment
}

pub(crate) fn check_both_classes(y: &[bool]) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClasses(format!(
            "training data needs both classes, got {pos} positives / {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

/// A trained classifier with its in-sample output distribution.
pub struct FittedModel {
    family: &'static str,
    is_signal_extraction: bool,
    model: Box<dyn Model>,
    in_sample_raw: Vec<f64>,
    ecdf: Ecdf,
    /// False when an iterative fit stopped at its iteration budget.
    pub converged: bool,
    /// Populated when a numerically degenerate case forced a fallback.
    pub warning: Option<String>,
}

impl FittedModel {
    pub fn family(&self) -> &'static str {
        self.family
    }

    /// Raw model output (family-specific scale).
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.model.predict(x)
    }

    /// Family probability in [0, 1]. This is the raw output for every family
    /// except signal extraction, where the probability is defined as the
    /// in-sample percentile of the indicator value.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let raw = self.model.predict(x);
        if self.is_signal_extraction {
            self.ecdf.apply(raw)
        } else {
            raw
        }
    }

    /// Output converted to its in-sample percentile; the scale the horse
    /// race thresholds and aggregates.
    pub fn predict_calibrated(&self, x: &[f64]) -> f64 {
        self.ecdf.apply(self.model.predict(x))
    }

    pub fn predict_calibrated_all(&self, x: &FeatureMatrix) -> Vec<f64> {
        self.model
            .predict_all(x)
            .iter()
            .map(|&p| self.ecdf.apply(p))
            .collect()
    }

    /// In-sample raw outputs in training order.
    pub fn in_sample_raw(&self) -> &[f64] {
        &self.in_sample_raw
    }

    /// In-sample outputs as percentiles, in training order.
    pub fn in_sample_calibrated(&self) -> Vec<f64> {
        self.ecdf.apply_all(&self.in_sample_raw)
    }

    pub fn ecdf(&self) -> &Ecdf {
        &self.ecdf
    }
}
