//! Resampling-based inference for race results: standard errors,
//! percentile confidence intervals, resampled-t critical values, pairwise
//! performance-equality tests, and per-observation probability-vs-threshold
//! significance.
//!
//! Nothing here is asymptotic. Every interval and test statistic comes from
//! an empirical replicate distribution: repeated cross-validation for the
//! CV protocol, per-quarter bootstrapping for the recursive protocol.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::MethodSpec;
use crate::ensemble::AggregateKind;
use crate::error::{Error, Result};
use crate::eval::{ContingencyCounts, EvaluationResult, Preference, roc_auc};
use crate::experiment::{
    kfold_race, recursive_targets_and_plans, run_units, PredictionTarget, RecursiveConfig,
};
use crate::panel::LabeledPanel;
use crate::quarter::Quarter;
use crate::rng::{derive, rng_from};

/// Distribution summary of one scalar estimator across S replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleSummary {
    pub mean: f64,
    /// Empirical standard error with an S-1 denominator.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Resampled critical value for t statistics centered on the mean.
    pub t_star: f64,
    pub s: usize,
}

/// Ordered-statistic rank for a nominal position, rounding half-up and
/// clamping into the valid 1-based range.
fn ordered_rank(s: usize, position: f64) -> usize {
    let r = (position + 0.5).floor() as i64;
    r.clamp(1, s as i64) as usize
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    for (position, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { position, context });
        }
    }
    Ok(())
}

/// Summarizes replicate draws of a scalar: mean, standard error, and the
/// percentile interval that keeps the k smallest and k largest draws out,
/// with k the half-up rounding of S·α/2.
pub fn resample_summary(replicates: &[f64], alpha: f64) -> Result<ResampleSummary> {
    let s = replicates.len();
    if s < 2 {
        return Err(Error::param("replicates", "need at least 2 replicates"));
    }
    check_alpha(alpha)?;
    check_finite(replicates, "resample replicates")?;

    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[s - 1] {
        let c = sorted[0];
        return Ok(ResampleSummary { mean: c, se: 0.0, ci_lo: c, ci_hi: c, t_star: 0.0, s });
    }
    let mean = replicates.iter().sum::<f64>() / s as f64;
    let se = (replicates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1) as f64).sqrt();
    let k = ordered_rank(s, s as f64 * alpha / 2.0);
    let ci_lo = sorted[k - 1];
    let ci_hi = sorted[s - k];
    let t_star = if se > 0.0 {
        resampled_t_critical(replicates, &vec![se; s], mean, alpha)?.t_star
    } else {
        0.0
    };
    Ok(ResampleSummary { mean, se, ci_lo, ci_hi, t_star, s })
}

/// A resampled critical value plus the count of replicates dropped for a
/// zero dispersion estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TCritical {
    pub t_star: f64,
    pub dropped: usize,
}

/// Critical value of the resampled t statistic: |θ*_s − θ̂| / σ̂*_s is
/// formed per replicate and the ordered value at position S·(1−α) is
/// returned. Replicates with σ̂*_s = 0 are dropped and counted.
pub fn resampled_t_critical(
    replicates: &[f64],
    ses: &[f64],
    theta_hat: f64,
    alpha: f64,
) -> Result<TCritical> {
    if replicates.len() != ses.len() {
        return Err(Error::LengthMismatch {
            left: replicates.len(),
            right: ses.len(),
            context: "replicates vs their standard errors",
        });
    }
    check_alpha(alpha)?;
    check_finite(replicates, "t replicates")?;
    check_finite(ses, "t standard errors")?;
    if !theta_hat.is_finite() {
        return Err(Error::NonFinite { position: 0, context: "t center" });
    }
    if ses.iter().any(|&s| s < 0.0) {
        return Err(Error::param("ses", "standard errors must be nonnegative"));
    }
    let mut ts: Vec<f64> = replicates
        .iter()
        .zip(ses)
        .filter(|(_, &se)| se > 0.0)
        .map(|(&x, &se)| ((x - theta_hat) / se).abs())
        .collect();
    if ts.is_empty() {
        return Err(Error::EmptyInput(
            "every replicate dropped for a zero standard error",
        ));
    }
    let dropped = replicates.len() - ts.len();
    ts.sort_by(f64::total_cmp);
    let idx = ordered_rank(ts.len(), ts.len() as f64 * (1.0 - alpha));
    Ok(TCritical { t_star: ts[idx - 1], dropped })
}

/// Verdict of a pairwise equality test between two resampled means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Greater,
    Less,
    NotSignificant,
}

impl Comparison {
    /// Table cell symbol.
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Greater => ">",
            Comparison::Less => "<",
            Comparison::NotSignificant => "\u{b7}",
        }
    }

    pub fn flip(self) -> Comparison {
        match self {
            Comparison::Greater => Comparison::Less,
            Comparison::Less => Comparison::Greater,
            Comparison::NotSignificant => Comparison::NotSignificant,
        }
    }

    pub fn is_significant(self) -> bool {
        self != Comparison::NotSignificant
    }
}

/// Tests equality of two resampled means: the difference is significant
/// when |mean_i − mean_j| exceeds the averaged critical value times the
/// combined standard error. The test can fire while the percentile
/// intervals still overlap.
pub fn mean_comparison(i: &ResampleSummary, j: &ResampleSummary) -> Comparison {
    let margin = (i.mean - j.mean).abs()
        - 0.5 * (i.t_star + j.t_star) * (i.se * i.se + j.se * j.se).sqrt();
    if margin > 0.0 {
        if i.mean > j.mean {
            Comparison::Greater
        } else {
            Comparison::Less
        }
    } else {
        Comparison::NotSignificant
    }
}

/// All pairwise verdicts for one performance measure.
#[derive(Debug, Clone)]
pub struct SignificanceMatrix {
    pub names: Vec<String>,
    /// Which measure the compared means carry ("Ur" or "AUC").
    pub measure: String,
    pub alpha: f64,
    /// `cells[i][j]` compares method i against method j.
    pub cells: Vec<Vec<Comparison>>,
}

impl SignificanceMatrix {
    pub fn from_summaries(
        names: &[String],
        summaries: &[ResampleSummary],
        measure: impl Into<String>,
        alpha: f64,
    ) -> Result<Self> {
        if names.len() != summaries.len() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: summaries.len(),
                context: "names vs summaries",
            });
        }
        let n = names.len();
        let cells = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Comparison::NotSignificant
                        } else {
                            mean_comparison(&summaries[i], &summaries[j])
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(SignificanceMatrix {
            names: names.to_vec(),
            measure: measure.into(),
            alpha,
            cells,
        })
    }
}

fn race_names(methods: &[MethodSpec], aggregates: &[AggregateKind]) -> Vec<String> {
    methods
        .iter()
        .map(|m| m.name().to_string())
        .chain(aggregates.iter().map(|a| a.name().to_string()))
        .collect()
}

/// For each method, the first method ranked below it (by mean) whose mean
/// differs significantly from its own.
fn first_significant_below(
    names: &[String],
    summaries: &[ResampleSummary],
    matrix: &SignificanceMatrix,
) -> Vec<Option<String>> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| summaries[b].mean.total_cmp(&summaries[a].mean).then(a.cmp(&b)));
    let mut out = vec![None; names.len()];
    for (p, &i) in order.iter().enumerate() {
        for &j in &order[p + 1..] {
            if matrix.cells[i][j].is_significant() {
                out[i] = Some(names[j].clone());
                break;
            }
        }
    }
    out
}

/// Performance uncertainty of a cross-validated race.
#[derive(Debug, Clone)]
pub struct PerformanceUncertainty {
    /// Methods in spec order, then aggregates.
    pub names: Vec<String>,
    pub ur: Vec<ResampleSummary>,
    pub auc: Vec<ResampleSummary>,
    pub ur_matrix: SignificanceMatrix,
    pub auc_matrix: SignificanceMatrix,
    /// Per method: the first lower-ranked method (by mean Ur) with a
    /// significantly different Ur.
    pub first_significant: Vec<Option<String>>,
    pub alpha: f64,
    pub replicates: usize,
}

/// Repeats the full K-fold race S times with reseeded fold assignments and
/// summarizes every method's relative usefulness and AUC across replicates.
/// Replicate s runs with seed `seed + s`.
pub fn repeated_cv_performance(
    methods: &[MethodSpec],
    aggregates: &[AggregateKind],
    panel: &LabeledPanel,
    pref: Preference,
    folds: usize,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<PerformanceUncertainty> {
    if replicates < 2 {
        return Err(Error::param("replicates", "need at least 2 replicates"));
    }
    check_alpha(alpha)?;
    let names = race_names(methods, aggregates);

    let per_replicate: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|s| {
            let race = kfold_race(methods, aggregates, panel, pref, folds, seed + s as u64)?;
            let ur = race.methods.iter().map(|m| m.result.usefulness_relative).collect();
            let auc = race.methods.iter().map(|m| m.result.auc).collect();
            Ok((ur, auc))
        })
        .collect::<Result<_>>()?;

    let mut ur = Vec::with_capacity(names.len());
    let mut auc = Vec::with_capacity(names.len());
    for m in 0..names.len() {
        let urs: Vec<f64> = per_replicate.iter().map(|r| r.0[m]).collect();
        let aucs: Vec<f64> = per_replicate.iter().map(|r| r.1[m]).collect();
        ur.push(resample_summary(&urs, alpha)?);
        auc.push(resample_summary(&aucs, alpha)?);
    }
    let ur_matrix = SignificanceMatrix::from_summaries(&names, &ur, "Ur", alpha)?;
    let auc_matrix = SignificanceMatrix::from_summaries(&names, &auc, "AUC", alpha)?;
    let first_significant = first_significant_below(&names, &ur, &ur_matrix);
    Ok(PerformanceUncertainty {
        names,
        ur,
        auc,
        ur_matrix,
        auc_matrix,
        first_significant,
        alpha,
        replicates,
    })
}

/// Draws a bootstrap sample of `0..n` with replacement.
pub fn bootstrap_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng as _;
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstraps training rows until both classes are present, up to 100
/// attempts.
fn bootstrap_train(
    train: &[usize],
    panel: &LabeledPanel,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    for _ in 0..100 {
        let draw: Vec<usize> = bootstrap_sample(train.len(), rng)
            .into_iter()
            .map(|k| train[k])
            .collect();
        let mut pos = false;
        let mut neg = false;
        for &i in &draw {
            if panel.observations[i].label {
                pos = true;
            } else {
                neg = true;
            }
        }
        if pos && neg {
            return Some(draw);
        }
    }
    None
}

/// Replicate bands of one observation: where its probability sits relative
/// to its quarter's threshold, across bootstrap replicates.
#[derive(Debug, Clone)]
pub struct OutputBand {
    pub country: usize,
    pub quarter: Quarter,
    pub label: bool,
    pub usable: bool,
    pub prob: ResampleSummary,
    pub threshold: ResampleSummary,
    /// The mean-comparison verdict of probability vs threshold over the
    /// same replicates that built the bands.
    pub flag: Comparison,
}

/// One method's bands, aligned with the race targets.
#[derive(Debug, Clone)]
pub struct MethodBands {
    pub name: String,
    /// `None` where the method produced fewer than two replicates.
    pub per_target: Vec<Option<OutputBand>>,
}

/// Output uncertainty of a recursive race.
#[derive(Debug, Clone)]
pub struct OutputUncertainty {
    pub names: Vec<String>,
    pub targets: Vec<PredictionTarget>,
    /// Pooled relative usefulness per replicate, summarized.
    pub ur: Vec<ResampleSummary>,
    pub auc: Vec<ResampleSummary>,
    pub ur_matrix: SignificanceMatrix,
    /// The averaged ("robust") classifier: replicate-mean probabilities
    /// against replicate-mean thresholds.
    pub robust: Vec<Option<EvaluationResult>>,
    /// `None` for the voting aggregate, which has no output distribution
    /// to test.
    pub bands: Vec<Option<MethodBands>>,
    pub alpha: f64,
    pub replicates: usize,
    pub warnings: Vec<String>,
}

struct BootstrapReplicate {
    ur: Vec<f64>,
    auc: Vec<f64>,
    /// Per name, per target.
    probs: Vec<Vec<Option<f64>>>,
    /// Per name, per unit.
    taus: Vec<Vec<Option<f64>>>,
    failed_draws: usize,
}

/// Recursive-protocol output uncertainty: per quarter and replicate the
/// training window is bootstrapped, every method is refitted and its
/// threshold re-optimized, and the replicate distributions yield pooled
/// performance summaries, per-observation probability and threshold bands,
/// and significance flags. Replicate s runs with seed `seed + s`.
pub fn bootstrap_recursive(
    methods: &[MethodSpec],
    aggregates: &[AggregateKind],
    panel: &LabeledPanel,
    pref: Preference,
    cfg: &RecursiveConfig,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<OutputUncertainty> {
    if replicates < 2 {
        return Err(Error::param("replicates", "need at least 2 replicates"));
    }
    check_alpha(alpha)?;
    let names = race_names(methods, aggregates);
    let (targets, plans) = recursive_targets_and_plans(panel, cfg)?;
    let n_methods = methods.len();

    let reps: Vec<BootstrapReplicate> = (0..replicates)
        .into_par_iter()
        .map(|s| {
            let rep_seed = seed + s as u64;
            let mut boot_plans = plans.clone();
            let mut failed_draws = 0;
            for plan in &mut boot_plans {
                if plan.train.is_empty() {
                    continue;
                }
                let mut rng = rng_from(derive(derive(rep_seed, 0xB007), plan.id));
                match bootstrap_train(&plan.train, panel, &mut rng) {
                    Some(draw) => plan.train = draw,
                    None => {
                        plan.train = Vec::new();
                        failed_draws += 1;
                    }
                }
            }
            let cfg = cfg.clone();
            let race = run_units(
                methods,
                aggregates,
                panel,
                targets.clone(),
                boot_plans,
                pref,
                rep_seed,
                &move |spec, plan| {
                    plan.quarter.map_or(true, |q| q >= cfg.method_start(spec))
                },
            )?;
            let probs = race.methods.iter().map(|m| m.probs.clone()).collect();
            let taus = (0..names.len())
                .map(|i| {
                    race.units
                        .iter()
                        .map(|u| {
                            let out = if i < n_methods {
                                u.methods[i].as_ref()
                            } else {
                                u.aggregates[i - n_methods].as_ref()
                            };
                            out.filter(|o| !o.oos_probs.is_empty()).map(|o| o.tau)
                        })
                        .collect()
                })
                .collect();
            Ok(BootstrapReplicate {
                ur: race.methods.iter().map(|m| m.result.usefulness_relative).collect(),
                auc: race.methods.iter().map(|m| m.result.auc).collect(),
                probs,
                taus,
                failed_draws,
            })
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let failed: usize = reps.iter().map(|r| r.failed_draws).sum();
    if failed > 0 {
        warnings.push(format!(
            "{failed} quarter-replicates failed to draw both classes in 100 attempts"
        ));
    }

    // Map each target to its unit for threshold lookup.
    let mut unit_of_quarter = HashMap::new();
    for (u, plan) in plans.iter().enumerate() {
        if let Some(q) = plan.quarter {
            unit_of_quarter.insert(q, u);
        }
    }

    let mut ur = Vec::with_capacity(names.len());
    let mut auc = Vec::with_capacity(names.len());
    let mut robust = Vec::with_capacity(names.len());
    let mut bands = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let urs: Vec<f64> = reps.iter().map(|r| r.ur[i]).collect();
        let aucs: Vec<f64> = reps.iter().map(|r| r.auc[i]).collect();
        ur.push(resample_summary(&urs, alpha)?);
        auc.push(resample_summary(&aucs, alpha)?);

        let per_target: Vec<Option<OutputBand>> = targets
            .iter()
            .enumerate()
            .map(|(t, target)| {
                let unit = unit_of_quarter[&target.quarter];
                let mut ps = Vec::new();
                let mut ts = Vec::new();
                for rep in &reps {
                    if let (Some(p), Some(tau)) = (rep.probs[i][t], rep.taus[i][unit]) {
                        ps.push(p);
                        ts.push(tau);
                    }
                }
                if ps.len() < 2 {
                    return None;
                }
                let prob = resample_summary(&ps, alpha).ok()?;
                let threshold = resample_summary(&ts, alpha).ok()?;
                let flag = mean_comparison(&prob, &threshold);
                Some(OutputBand {
                    country: target.country,
                    quarter: target.quarter,
                    label: target.label,
                    usable: target.usable,
                    prob,
                    threshold,
                    flag,
                })
            })
            .collect();

        robust.push(robust_evaluation(&targets, &per_target, pref));
        let is_vote = i >= n_methods && aggregates[i - n_methods] == AggregateKind::Vote;
        bands.push(if is_vote {
            None
        } else {
            Some(MethodBands { name: name.clone(), per_target })
        });
    }

    let ur_matrix = SignificanceMatrix::from_summaries(&names, &ur, "Ur", alpha)?;
    Ok(OutputUncertainty {
        names,
        targets,
        ur,
        auc,
        ur_matrix,
        robust,
        bands,
        alpha,
        replicates,
        warnings,
    })
}

/// Evaluates the averaged classifier: replicate-mean probability against
/// replicate-mean threshold, pooled over usable covered targets.
fn robust_evaluation(
    targets: &[PredictionTarget],
    per_target: &[Option<OutputBand>],
    pref: Preference,
) -> Option<EvaluationResult> {
    let mut probs = Vec::new();
    let mut signals = Vec::new();
    let mut labels = Vec::new();
    let mut taus = Vec::new();
    for (target, band) in targets.iter().zip(per_target) {
        let Some(band) = band else { continue };
        if !target.usable {
            continue;
        }
        probs.push(band.prob.mean);
        signals.push(band.prob.mean > band.threshold.mean);
        labels.push(target.label);
        taus.push(band.threshold.mean);
    }
    if probs.is_empty() {
        return None;
    }
    let counts = ContingencyCounts::from_signals(&signals, &labels).ok()?;
    let priors = counts.priors().ok()?;
    let auc = roc_auc(&probs, &labels).ok()?;
    let tau = taus.iter().sum::<f64>() / taus.len() as f64;
    Some(EvaluationResult::from_parts(counts, pref, priors, auc, tau))
}

/// Evaluates only the observations whose probability differs significantly
/// from the threshold, signaling where the band sits above it.
pub fn significant_only_evaluation(
    bands: &[OutputBand],
    labels: &[bool],
    pref: Preference,
) -> Result<EvaluationResult> {
    if bands.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: bands.len(),
            right: labels.len(),
            context: "bands vs labels",
        });
    }
    let mut probs = Vec::new();
    let mut signals = Vec::new();
    let mut kept = Vec::new();
    let mut taus = Vec::new();
    for (band, &label) in bands.iter().zip(labels) {
        if !band.flag.is_significant() {
            continue;
        }
        probs.push(band.prob.mean);
        signals.push(band.flag == Comparison::Greater);
        kept.push(label);
        taus.push(band.threshold.mean);
    }
    if kept.is_empty() {
        return Err(Error::Infeasible("no significant observations".into()));
    }
    let counts = ContingencyCounts::from_signals(&signals, &kept)?;
    let priors = counts.priors()?;
    let auc = roc_auc(&probs, &kept)?;
    let tau = taus.iter().sum::<f64>() / taus.len() as f64;
    Ok(EvaluationResult::from_parts(counts, pref, priors, auc, tau))
}
