//! The two horse-race protocols: K-fold cross-validation and recursive
//! real-time backtesting.
//!
//! Both protocols decompose into units (a fold, or a prediction quarter).
//! In each unit every method is fitted on the unit's training rows, its
//! outputs are calibrated to in-sample percentiles, a threshold is
//! optimized in sample and applied to the unit's test rows. Contingency
//! cells are summed across units before the final usefulness is computed,
//! and every method sees identical units, which is what makes the race
//! comparisons objective. Ensemble aggregates are built inside each unit
//! from the member methods' outputs and then treated exactly like methods.

use rayon::prelude::*;

use crate::classify::{FeatureMatrix, MethodSpec};
use crate::ensemble::{
    best_of_index, combine_probs, normalize_weights, uniform_weights, vote_share, AggregateKind,
};
use crate::error::{Error, Result};
use crate::eval::{
    optimize_threshold, roc_auc, ClassPriors, ContingencyCounts, EvaluationResult, Preference,
    usefulness_relative,
};
use crate::panel::LabeledPanel;
use crate::quarter::Quarter;
use crate::rng::derive;

/// One row the race predicts: an observation's identity, label, and whether
/// it takes part in the pooled evaluation.
#[derive(Debug, Clone)]
pub struct PredictionTarget {
    /// Index into the source panel's observation list.
    pub observation: usize,
    pub country: usize,
    pub quarter: Quarter,
    pub label: bool,
    pub usable: bool,
}

/// A fold assignment shared by every method of a race.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub folds: usize,
    /// Observation position -> fold id.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// Stratified fold assignment: positives and negatives are shuffled and
/// dealt round-robin. The hard requirement is that every training
/// complement keeps both classes (a leave-one-out fold cannot itself hold
/// two classes); assignment is reseeded up to 100 times before giving up.
pub fn assign_folds(labels: &[bool], folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return Err(Error::param("folds", "need at least 2 folds"));
    }
    if folds > labels.len() {
        return Err(Error::param(
            "folds",
            format!("{folds} folds exceed {} observations", labels.len()),
        ));
    }
    for attempt in 0..100 {
        let mut rng = crate::rng::rng_from(derive(seed, attempt));
        let assignment = crate::classify::stratified_assignment(labels, folds, &mut rng);
        let ok = (0..folds).all(|f| {
            let mut pos = false;
            let mut neg = false;
            for (i, &l) in labels.iter().enumerate() {
                if assignment[i] != f {
                    if l {
                        pos = true;
                    } else {
                        neg = true;
                    }
                }
            }
            pos && neg
        });
        if ok {
            return Ok(FoldAssignment { folds, assignment, seed });
        }
    }
    Err(Error::DegenerateClasses(
        "could not build folds whose training sets keep both classes in 100 attempts".into(),
    ))
}

/// One method's outputs inside one unit.
#[derive(Debug, Clone)]
pub struct MethodUnitOutput {
    pub tau: f64,
    pub in_sample_ur: f64,
    /// Calibrated percentiles on the unit's training rows.
    pub in_probs: Vec<f64>,
    /// Calibrated percentiles on the unit's test rows.
    pub oos_probs: Vec<f64>,
    pub converged: bool,
    pub warning: Option<String>,
}

impl MethodUnitOutput {
    pub fn oos_signals(&self) -> Vec<bool> {
        self.oos_probs.iter().map(|&p| p > self.tau).collect()
    }

    fn in_signals(&self) -> Vec<bool> {
        self.in_probs.iter().map(|&p| p > self.tau).collect()
    }
}

/// One completed unit: a fold or a prediction quarter.
#[derive(Debug, Clone)]
pub struct UnitOutcome {
    pub label: String,
    pub train_labels: Vec<bool>,
    /// Positions into the race's target list.
    pub test_targets: Vec<usize>,
    /// Aligned with the race's method list; `None` when the method is not
    /// active in this unit (late recursive start, or a failed fit).
    pub methods: Vec<Option<MethodUnitOutput>>,
    /// Aligned with the race's aggregate list.
    pub aggregates: Vec<Option<MethodUnitOutput>>,
}

/// Work order for one unit before any model is fitted.
#[derive(Debug, Clone)]
pub(crate) struct UnitPlan {
    pub(crate) label: String,
    /// Distinct per unit; mixed into every fit seed.
    pub(crate) id: u64,
    pub(crate) quarter: Option<Quarter>,
    /// Observation indices into the panel.
    pub(crate) train: Vec<usize>,
    /// Positions into the target list.
    pub(crate) test: Vec<usize>,
}

/// Pooled race outcome for one method or aggregate.
#[derive(Debug, Clone)]
pub struct MethodRace {
    pub name: String,
    pub result: EvaluationResult,
    /// (unit label, threshold) for every unit the method was active in.
    pub thresholds: Vec<(String, f64)>,
    pub mean_in_sample_ur: f64,
    /// Per target: calibrated probability, `None` where inactive.
    pub probs: Vec<Option<f64>>,
    pub signals: Vec<Option<bool>>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Everything a protocol run produces.
#[derive(Debug, Clone)]
pub struct RaceResult {
    pub targets: Vec<PredictionTarget>,
    /// Methods first, in spec order, then aggregates in list order.
    pub methods: Vec<MethodRace>,
    pub units: Vec<UnitOutcome>,
    /// Protocol-level warnings (skipped quarters and the like).
    pub warnings: Vec<String>,
}

impl RaceResult {
    /// The pooled outcome of the named method or aggregate.
    pub fn by_name(&self, name: &str) -> Option<&MethodRace> {
        self.methods.iter().find(|m| m.name == name)
    }
}

fn rows_matrix(panel: &LabeledPanel, rows: &[usize]) -> FeatureMatrix {
    let mut x = FeatureMatrix::zeros(panel.n_features());
    for &i in rows {
        x.push_row(&panel.observations[i].x).expect("constant feature width");
    }
    x
}

fn fit_one(
    spec: &MethodSpec,
    x_train: &FeatureMatrix,
    y_train: &[bool],
    x_test: &FeatureMatrix,
    pref: Preference,
    seed: u64,
) -> Result<MethodUnitOutput> {
    let fitted = spec.fit(x_train, y_train, pref, seed)?;
    let in_probs = fitted.in_sample_calibrated();
    let choice = optimize_threshold(&in_probs, y_train, pref, None)?;
    let oos_probs = fitted.predict_calibrated_all(x_test);
    Ok(MethodUnitOutput {
        tau: choice.tau,
        in_sample_ur: choice.usefulness_relative,
        in_probs,
        oos_probs,
        converged: fitted.converged,
        warning: fitted.warning,
    })
}

/// In-sample relative usefulness of fixed signals, used for vote reporting.
fn signals_ur(signals: &[bool], labels: &[bool], pref: Preference) -> Result<f64> {
    let counts = ContingencyCounts::from_signals(signals, labels)?;
    let priors = ClassPriors::from_labels(labels)?;
    Ok(usefulness_relative(&counts, pref, priors))
}

/// Builds one aggregate's unit output from the active member methods.
fn aggregate_unit(
    kind: AggregateKind,
    members: &[&MethodUnitOutput],
    train_labels: &[bool],
    pref: Preference,
) -> Result<MethodUnitOutput> {
    if members.is_empty() {
        return Err(Error::EmptyInput("aggregate over zero active methods"));
    }
    let converged = members.iter().all(|m| m.converged);
    let urs: Vec<f64> = members.iter().map(|m| m.in_sample_ur).collect();
    match kind {
        AggregateKind::BestOf => {
            let best = best_of_index(&urs)?;
            let mut out = members[best].clone();
            out.warning = None;
            out.converged = converged;
            Ok(out)
        }
        AggregateKind::Vote => {
            let in_share = vote_share(
                &members.iter().map(|m| m.in_signals()).collect::<Vec<_>>(),
            )?;
            let oos_share = vote_share(
                &members.iter().map(|m| m.oos_signals()).collect::<Vec<_>>(),
            )?;
            let in_votes: Vec<bool> = in_share.iter().map(|&s| s > 0.5).collect();
            let in_sample_ur = signals_ur(&in_votes, train_labels, pref)?;
            Ok(MethodUnitOutput {
                tau: 0.5,
                in_sample_ur,
                in_probs: in_share,
                oos_probs: oos_share,
                converged,
                warning: None,
            })
        }
        AggregateKind::Mean | AggregateKind::WeightedMean => {
            let weights = match kind {
                AggregateKind::Mean => uniform_weights(members.len()),
                _ => normalize_weights(&urs)?,
            };
            let in_probs = combine_probs(
                &members.iter().map(|m| m.in_probs.clone()).collect::<Vec<_>>(),
                &weights,
            )?;
            let oos_probs = combine_probs(
                &members.iter().map(|m| m.oos_probs.clone()).collect::<Vec<_>>(),
                &weights,
            )?;
            let choice = optimize_threshold(&in_probs, train_labels, pref, None)?;
            Ok(MethodUnitOutput {
                tau: choice.tau,
                in_sample_ur: choice.usefulness_relative,
                in_probs,
                oos_probs,
                converged,
                warning: None,
            })
        }
    }
}

/// Runs every method and aggregate over the planned units and pools the
/// results. `is_active` gates methods per unit (the recursive QDA start).
pub(crate) fn run_units(
    methods: &[MethodSpec],
    aggregates: &[AggregateKind],
    panel: &LabeledPanel,
    targets: Vec<PredictionTarget>,
    plans: Vec<UnitPlan>,
    pref: Preference,
    seed: u64,
    is_active: &(dyn Fn(&MethodSpec, &UnitPlan) -> bool + Sync),
) -> Result<RaceResult> {
    if methods.is_empty() {
        return Err(Error::EmptyInput("race over zero methods"));
    }
    let mut warnings = Vec::new();
    for plan in &plans {
        if plan.train.is_empty() {
            warnings.push(format!("{}: no trainable data, unit skipped", plan.label));
        }
    }

    let units: Vec<UnitOutcome> = plans
        .par_iter()
        .map(|plan| {
            let x_train = rows_matrix(panel, &plan.train);
            let y_train: Vec<bool> = plan
                .train
                .iter()
                .map(|&i| panel.observations[i].label)
                .collect();
            let test_rows: Vec<usize> =
                plan.test.iter().map(|&t| targets[t].observation).collect();
            let x_test = rows_matrix(panel, &test_rows);

            // A failed fit keeps a placeholder (empty predictions, a
            // warning) so the message survives into the pooled report.
            let method_outputs: Vec<Option<MethodUnitOutput>> = methods
                .iter()
                .enumerate()
                .map(|(m, spec)| {
                    if plan.train.is_empty() || !is_active(spec, plan) {
                        return None;
                    }
                    let fit_seed = derive(derive(seed, 0x100 + m as u64), plan.id);
                    match fit_one(spec, &x_train, &y_train, &x_test, pref, fit_seed) {
                        Ok(out) => Some(out),
                        Err(e) => Some(MethodUnitOutput {
                            tau: f64::NAN,
                            in_sample_ur: f64::NAN,
                            in_probs: Vec::new(),
                            oos_probs: Vec::new(),
                            converged: false,
                            warning: Some(format!("fit failed: {e}")),
                        }),
                    }
                })
                .collect();

            let aggregate_outputs: Vec<Option<MethodUnitOutput>> = aggregates
                .iter()
                .map(|&kind| {
                    let members: Vec<&MethodUnitOutput> = method_outputs
                        .iter()
                        .flatten()
                        .filter(|o| !o.oos_probs.is_empty())
                        .collect();
                    if members.is_empty() {
                        return None;
                    }
                    aggregate_unit(kind, &members, &y_train, pref).ok()
                })
                .collect();

            UnitOutcome {
                label: plan.label.clone(),
                train_labels: y_train,
                test_targets: plan.test.clone(),
                methods: method_outputs,
                aggregates: aggregate_outputs,
            }
        })
        .collect();

    let mut pooled = Vec::with_capacity(methods.len() + aggregates.len());
    for (m, spec) in methods.iter().enumerate() {
        pooled.push(pool_method(
            spec.name().to_string(),
            &targets,
            &units,
            |u| u.methods[m].as_ref(),
            pref,
        )?);
    }
    for (a, kind) in aggregates.iter().enumerate() {
        pooled.push(pool_method(
            kind.name().to_string(),
            &targets,
            &units,
            |u| u.aggregates[a].as_ref(),
            pref,
        )?);
    }

    Ok(RaceResult {
        targets,
        methods: pooled,
        units,
        warnings,
    })
}

/// Pools one method's per-unit outputs: cells are summed over units first,
/// and only then is the final usefulness computed.
fn pool_method(
    name: String,
    targets: &[PredictionTarget],
    units: &[UnitOutcome],
    select: impl Fn(&UnitOutcome) -> Option<&MethodUnitOutput>,
    pref: Preference,
) -> Result<MethodRace> {
    let mut probs: Vec<Option<f64>> = vec![None; targets.len()];
    let mut signals: Vec<Option<bool>> = vec![None; targets.len()];
    let mut thresholds = Vec::new();
    let mut in_urs = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = true;
    for unit in units {
        let Some(out) = select(unit) else { continue };
        if let Some(w) = &out.warning {
            warnings.push(format!("{}: {w}", unit.label));
        }
        if out.oos_probs.is_empty() {
            // Failed fit placeholder: counts against convergence only.
            converged = false;
            continue;
        }
        converged &= out.converged;
        thresholds.push((unit.label.clone(), out.tau));
        in_urs.push(out.in_sample_ur);
        for (pos, &target) in unit.test_targets.iter().enumerate() {
            probs[target] = Some(out.oos_probs[pos]);
            signals[target] = Some(out.oos_probs[pos] > out.tau);
        }
    }

    let mut pooled_probs = Vec::new();
    let mut pooled_signals = Vec::new();
    let mut pooled_labels = Vec::new();
    for (t, target) in targets.iter().enumerate() {
        if !target.usable {
            continue;
        }
        if let (Some(p), Some(s)) = (probs[t], signals[t]) {
            pooled_probs.push(p);
            pooled_signals.push(s);
            pooled_labels.push(target.label);
        }
    }
    if pooled_probs.is_empty() {
        return Err(Error::Infeasible(format!(
            "{name}: no out-of-sample predictions to evaluate"
        )));
    }
    let counts = ContingencyCounts::from_signals(&pooled_signals, &pooled_labels)?;
    let priors = counts.priors()?;
    let auc = roc_auc(&pooled_probs, &pooled_labels)?;
    let mean_tau = thresholds.iter().map(|(_, t)| t).sum::<f64>() / thresholds.len() as f64;
    let mean_in_sample_ur = in_urs.iter().sum::<f64>() / in_urs.len() as f64;
    Ok(MethodRace {
        name,
        result: EvaluationResult::from_parts(counts, pref, priors, auc, mean_tau),
        thresholds,
        mean_in_sample_ur,
        probs,
        signals,
        converged,
        warnings,
    })
}

/// The K-fold cross-validated horse race over the panel's usable
/// observations.
pub fn kfold_race(
    methods: &[MethodSpec],
    aggregates: &[AggregateKind],
    panel: &LabeledPanel,
    pref: Preference,
    folds: usize,
    seed: u64,
) -> Result<RaceResult> {
    let usable = panel.usable_indices();
    if usable.is_empty() {
        return Err(Error::EmptyInput("panel has no usable observations"));
    }
    let labels: Vec<bool> = usable.iter().map(|&i| panel.observations[i].label).collect();
    let assignment = assign_folds(&labels, folds, derive(seed, 0xF01D))?;

    let targets: Vec<PredictionTarget> = usable
        .iter()
        .map(|&i| {
            let obs = &panel.observations[i];
            PredictionTarget {
                observation: i,
                country: obs.country,
                quarter: obs.quarter,
                label: obs.label,
                usable: true,
            }
        })
        .collect();

    let plans: Vec<UnitPlan> = (0..folds)
        .map(|fold| {
            let train: Vec<usize> = (0..usable.len())
                .filter(|&p| assignment.assignment[p] != fold)
                .map(|p| usable[p])
                .collect();
            let test: Vec<usize> = (0..usable.len())
                .filter(|&p| assignment.assignment[p] == fold)
                .collect();
            UnitPlan {
                label: format!("fold {fold}"),
                id: fold as u64,
                quarter: None,
                train,
                test,
            }
        })
        .collect();

    run_units(
        methods,
        aggregates,
        panel,
        targets,
        plans,
        pref,
        derive(seed, 0xCF0),
        &|_, _| true,
    )
}

/// Recursive protocol configuration. The panel handed to [`recursive_race`]
/// must already carry publication lags for honest real-time results.
#[derive(Debug, Clone)]
pub struct RecursiveConfig {
    /// First prediction quarter.
    pub start: Quarter,
    /// QDA needs more history per class; its predictions start here.
    pub qda_start: Quarter,
    /// Last prediction quarter (inclusive); `None` runs to the panel's end.
    pub end: Option<Quarter>,
}

impl RecursiveConfig {
    /// The benchmark schedule: predictions from 2005Q2, QDA from 2006Q2.
    pub fn benchmark() -> Self {
        RecursiveConfig {
            start: Quarter::new(2005, 2).expect("valid"),
            qda_start: Quarter::new(2006, 2).expect("valid"),
            end: None,
        }
    }

    pub(crate) fn method_start(&self, spec: &MethodSpec) -> Quarter {
        if matches!(spec, MethodSpec::Qda) {
            self.qda_start
        } else {
            self.start
        }
    }
}

/// Targets and per-quarter work orders of the recursive protocol, shared by
/// the plain race and its bootstrap.
pub(crate) fn recursive_targets_and_plans(
    panel: &LabeledPanel,
    cfg: &RecursiveConfig,
) -> Result<(Vec<PredictionTarget>, Vec<UnitPlan>)> {
    let mut quarters: Vec<Quarter> = panel
        .observations
        .iter()
        .map(|o| o.quarter)
        .filter(|&q| q >= cfg.start && cfg.end.map_or(true, |e| q <= e))
        .collect();
    quarters.sort();
    quarters.dedup();
    if quarters.is_empty() {
        return Err(Error::EmptyInput("no observations at or after the start quarter"));
    }

    let mut targets = Vec::new();
    let mut plans = Vec::new();
    for &q in &quarters {
        let test_obs: Vec<usize> = panel
            .observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.quarter == q)
            .map(|(i, _)| i)
            .collect();
        let first_target = targets.len();
        for &i in &test_obs {
            let obs = &panel.observations[i];
            targets.push(PredictionTarget {
                observation: i,
                country: obs.country,
                quarter: obs.quarter,
                label: obs.label,
                usable: obs.usable,
            });
        }
        let train: Vec<usize> = panel
            .observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.usable && o.quarter < q)
            .map(|(i, _)| i)
            .collect();
        plans.push(UnitPlan {
            label: q.to_string(),
            id: q.quarters_since(Quarter::new(1900, 1).expect("valid")) as i64 as u64,
            quarter: Some(q),
            train,
            test: (first_target..targets.len()).collect(),
        });
    }
    Ok((targets, plans))
}

/// The recursive real-time horse race: at every prediction quarter each
/// method is refitted on all usable observations strictly before it, the
/// threshold is re-optimized in sample (time-varying), and probabilities
/// and signals are emitted for every observation of that quarter. All
/// (signal, label) pairs are pooled at the end and evaluated once.
pub fn recursive_race(
    methods: &[MethodSpec],
    aggregates: &[AggregateKind],
    panel: &LabeledPanel,
    pref: Preference,
    cfg: &RecursiveConfig,
    seed: u64,
) -> Result<RaceResult> {
    let (targets, plans) = recursive_targets_and_plans(panel, cfg)?;
    let cfg_for_filter = cfg.clone();
    run_units(
        methods,
        aggregates,
        panel,
        targets,
        plans,
        pref,
        derive(seed, 0x8EC),
        &move |spec, plan| {
            plan.quarter
                .map_or(true, |q| q >= cfg_for_filter.method_start(spec))
        },
    )
}

/// One evaluated grid point of a parameter search.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub spec: MethodSpec,
    /// Pooled out-of-sample relative usefulness; `None` when the fit failed.
    pub usefulness: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    /// Index into `points` of the winner.
    pub best: usize,
    pub points: Vec<GridPoint>,
}

impl GridSearchOutcome {
    pub fn best_spec(&self) -> &MethodSpec {
        &self.points[self.best].spec
    }
}

/// Exhaustive search over a parameter grid, scored by pooled out-of-sample
/// usefulness from the same K-fold race (same fold seed) used for the horse
/// race. Ties keep the earliest grid point.
pub fn grid_search(
    grid: &[MethodSpec],
    panel: &LabeledPanel,
    pref: Preference,
    folds: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty parameter grid"));
    }
    let points: Vec<GridPoint> = grid
        .par_iter()
        .map(|spec| {
            match kfold_race(std::slice::from_ref(spec), &[], panel, pref, folds, seed) {
                Ok(race) => GridPoint {
                    spec: spec.clone(),
                    usefulness: Some(race.methods[0].result.usefulness_relative),
                    error: None,
                },
                Err(e) => GridPoint {
                    spec: spec.clone(),
                    usefulness: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        let Some(u) = p.usefulness else { continue };
        if best.map_or(true, |b| u > points[b].usefulness.expect("scored")) {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(GridSearchOutcome { best, points }),
        None => {
            let failures: Vec<String> = points
                .iter()
                .filter_map(|p| p.error.clone())
                .collect();
            Err(Error::Infeasible(format!(
                "every grid point failed: {}",
                failures.join("; ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{CrisisEvent, FeatureSpec, Horizon, Indicator, IndicatorKind, RawPanel, TransformKind};
    use rand::Rng as _;

    /// A small panel whose single feature separates the classes cleanly.
    fn separable_panel(n: usize, noise: f64, seed: u64) -> LabeledPanel {
        let mut rng = crate::rng::rng_from(seed);
        let observations: Vec<crate::panel::PanelObservation> = (0..n)
            .map(|i| {
                let label = i % 4 == 0;
                let base = if label { 2.0 } else { -2.0 };
                crate::panel::PanelObservation {
                    country: i % 3,
                    quarter: Quarter::new(2000, 1).unwrap().offset((i / 3) as i32),
                    x: vec![
                        base + noise * (rng.random::<f64>() - 0.5),
                        rng.random::<f64>(),
                    ],
                    label,
                    usable: true,
                }
            })
            .collect();
        LabeledPanel {
            countries: vec!["AA".into(), "BB".into(), "CC".into()],
            features: vec!["sep".into(), "noise".into()],
            observations,
        }
    }

    #[test]
    fn fold_assignment_is_a_function_of_seed_and_shape() {
        let labels: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        let a = assign_folds(&labels, 10, 7).unwrap();
        let b = assign_folds(&labels, 10, 7).unwrap();
        let c = assign_folds(&labels, 10, 8).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_ne!(a.assignment, c.assignment);
        // Round-robin dealing keeps fold sizes within one of each other.
        let mut sizes = vec![0usize; 10];
        for &f in &a.assignment {
            sizes[f] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn degenerate_folds_are_rejected() {
        // One positive observation: its training complement in leave-one-out
        // misses the class entirely, no matter the seed.
        let mut labels = vec![false; 8];
        labels[3] = true;
        assert!(matches!(
            assign_folds(&labels, 8, 1),
            Err(Error::DegenerateClasses(_))
        ));
        assert!(assign_folds(&labels, 2, 1).is_err());
        assert!(assign_folds(&[true, false], 1, 0).is_err());
    }

    #[test]
    fn separable_panel_is_learned_out_of_sample() {
        let panel = separable_panel(120, 0.5, 3);
        let methods = [MethodSpec::Logit, MethodSpec::Lda];
        let race = kfold_race(
            &methods,
            &AggregateKind::all(),
            &panel,
            Preference::benchmark(),
            10,
            42,
        )
        .unwrap();
        assert_eq!(race.methods.len(), 6);
        for m in &race.methods {
            assert!(
                m.result.usefulness_relative > 0.8,
                "{} scored {}",
                m.name,
                m.result.usefulness_relative
            );
            // Every usable target got exactly one out-of-sample prediction.
            assert!(m.probs.iter().all(Option::is_some));
        }
    }

    #[test]
    fn leave_one_out_matches_a_hand_rolled_oracle() {
        let panel = separable_panel(30, 2.5, 9);
        let race = kfold_race(
            &[MethodSpec::Logit],
            &[],
            &panel,
            Preference::benchmark(),
            30,
            5,
        )
        .unwrap();

        // Oracle: fit on the other 29 points, threshold in sample, predict
        // the held-out point; logit and the percentile map are
        // deterministic, so fold order cannot matter.
        let mut counts = ContingencyCounts::new(0, 0, 0, 0);
        let pref = Preference::benchmark();
        for i in 0..30 {
            let train: Vec<usize> = (0..30).filter(|&j| j != i).collect();
            let x_train = rows_matrix(&panel, &train);
            let y_train: Vec<bool> = train.iter().map(|&j| panel.observations[j].label).collect();
            let fitted = MethodSpec::Logit.fit(&x_train, &y_train, pref, 0).unwrap();
            let in_probs = fitted.in_sample_calibrated();
            let choice = optimize_threshold(&in_probs, &y_train, pref, None).unwrap();
            let p = fitted.predict_calibrated(&panel.observations[i].x);
            let signal = p > choice.tau;
            let label = panel.observations[i].label;
            counts.add(&ContingencyCounts::from_signals(&[signal], &[label]).unwrap());
        }
        assert_eq!(race.methods[0].result.counts, counts);
    }

    #[test]
    fn grid_search_prefers_better_points_and_breaks_ties_first() {
        let panel = separable_panel(80, 0.5, 21);
        let pref = Preference::benchmark();
        // A one-point grid returns that point.
        let single = grid_search(&[MethodSpec::Logit], &panel, pref, 8, 3).unwrap();
        assert_eq!(single.best, 0);
        // A leaf size swallowing the whole sample forces a constant
        // classifier (zero usefulness); a small leaf size wins.
        let grid = vec![
            MethodSpec::Tree { min_leaf: 70 },
            MethodSpec::Tree { min_leaf: 5 },
        ];
        let out = grid_search(&grid, &panel, pref, 8, 3).unwrap();
        assert_eq!(out.best, 1);
        // Identical points tie toward the first.
        let tie = grid_search(
            &[MethodSpec::Logit, MethodSpec::Logit],
            &panel,
            pref,
            8,
            3,
        )
        .unwrap();
        assert_eq!(tie.best, 0);
    }

    fn recursive_fixture() -> (RawPanel, Vec<CrisisEvent>) {
        let mut rng = crate::rng::rng_from(77);
        let start = Quarter::new(1995, 1).unwrap();
        let n = 60;
        let countries = ["AA", "BB"];
        let mut blocks = Vec::new();
        for c in 0..countries.len() {
            let mut col_a = Vec::new();
            let mut col_b = Vec::new();
            for t in 0..n {
                // Feature a spikes before each country's crisis.
                let q = start.offset(t as i32);
                let pre = (c == 0 && (2006..2008).contains(&q.year()))
                    || (c == 1 && (2004..2006).contains(&q.year()));
                col_a.push(Some(if pre { 3.0 } else { 0.0 } + rng.random::<f64>()));
                col_b.push(Some(rng.random::<f64>()));
            }
            blocks.push(crate::panel::CountryBlock { start, values: vec![col_a, col_b] });
        }
        let raw = RawPanel::from_parts(
            vec![
                Indicator { name: "a".into(), kind: IndicatorKind::Market },
                Indicator { name: "b".into(), kind: IndicatorKind::Market },
            ],
            countries.iter().map(|c| c.to_string()).collect(),
            blocks,
        )
        .unwrap();
        let events = vec![
            CrisisEvent::new("AA", Quarter::new(2008, 3).unwrap(), Quarter::new(2009, 2).unwrap())
                .unwrap(),
            CrisisEvent::new("BB", Quarter::new(2006, 3).unwrap(), Quarter::new(2007, 1).unwrap())
                .unwrap(),
        ];
        (raw, events)
    }

    fn level_features() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec { name: "a".into(), source: "a".into(), kind: TransformKind::Level },
            FeatureSpec { name: "b".into(), source: "b".into(), kind: TransformKind::Level },
        ]
    }

    #[test]
    fn recursive_race_honors_start_quarters_and_pools() {
        let (raw, events) = recursive_fixture();
        let lagged = raw.apply_publication_lags().unwrap();
        let transformed = lagged.transform(&level_features()).unwrap();
        let panel = transformed
            .label_and_filter(&events, Horizon::benchmark(), 8)
            .unwrap();
        // The earliest pre-crisis labels sit in 2003; by 2005 every
        // training window holds both classes.
        let cfg = RecursiveConfig {
            start: Quarter::new(2005, 1).unwrap(),
            qda_start: Quarter::new(2006, 1).unwrap(),
            end: None,
        };
        let race = recursive_race(
            &[MethodSpec::Logit, MethodSpec::Qda],
            &[AggregateKind::Mean],
            &panel,
            Preference::benchmark(),
            &cfg,
            11,
        )
        .unwrap();
        let logit = race.by_name("logit").unwrap();
        let qda = race.by_name("qda").unwrap();
        for (t, target) in race.targets.iter().enumerate() {
            assert!(target.quarter >= cfg.start);
            if target.quarter < cfg.qda_start {
                assert!(qda.probs[t].is_none(), "qda predicted before its start");
            }
            assert!(logit.probs[t].is_some());
        }
        // Thresholds are time-varying: one per quarter.
        let quarters: std::collections::BTreeSet<&str> =
            logit.thresholds.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(quarters.len(), logit.thresholds.len());
    }

    #[test]
    fn recursive_training_ignores_data_at_or_after_the_quarter() {
        let (raw, events) = recursive_fixture();
        let cut = Quarter::new(2006, 1).unwrap();

        let prepare = |raw: &RawPanel| {
            let lagged = raw.apply_publication_lags().unwrap();
            lagged
                .transform(&level_features())
                .unwrap()
                .label_and_filter(&events, Horizon::benchmark(), 8)
                .unwrap()
        };
        let full = prepare(&raw);

        // Drop every raw value from the cut quarter onward and re-prepare.
        let mut truncated_blocks = Vec::new();
        for block in raw.blocks() {
            let keep = cut.quarters_since(block.start).max(0) as usize;
            truncated_blocks.push(crate::panel::CountryBlock {
                start: block.start,
                values: block.values.iter().map(|col| col[..keep.min(col.len())].to_vec()).collect(),
            });
        }
        let truncated_raw = RawPanel::from_parts(
            raw.indicators().to_vec(),
            raw.countries().to_vec(),
            truncated_blocks,
        )
        .unwrap();
        let truncated = prepare(&truncated_raw);

        let training_rows = |panel: &LabeledPanel| -> Vec<(usize, String, Vec<u64>)> {
            panel
                .observations
                .iter()
                .filter(|o| o.usable && o.quarter < cut)
                .map(|o| {
                    (
                        o.country,
                        o.quarter.to_string(),
                        o.x.iter().map(|v| v.to_bits()).collect(),
                    )
                })
                .collect()
        };
        assert_eq!(training_rows(&full), training_rows(&truncated));
    }
}
