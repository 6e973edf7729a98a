//! Preference-weighted evaluation of binary early-warning signals.
//!
//! A classifier output is a crisis probability per observation; a signal is
//! issued when the probability exceeds a threshold. Evaluation weighs missed
//! crises (type 1 errors) against false alarms (type 2 errors) through a
//! policymaker preference `mu`, producing a loss, absolute and relative
//! usefulness, and the threshold that minimizes the loss in sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Policymaker preference between missing crises and issuing false alarms.
///
/// `mu` close to 1 means missed crises are costly; `mu` close to 0 means
/// false alarms are. The benchmark value is 0.8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    mu: f64,
}

impl Preference {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() || !(0.0..=1.0).contains(&mu) {
            return Err(Error::param("mu", format!("must lie in [0, 1], got {mu}")));
        }
        Ok(Preference { mu })
    }

    /// The benchmark preference used throughout the horse race, mu = 0.8.
    pub fn benchmark() -> Self {
        Preference { mu: 0.8 }
    }

    pub fn mu(self) -> f64 {
        self.mu
    }
}

/// Unconditional class probabilities: `p1` for pre-crisis, `p2` for tranquil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    p1: f64,
    p2: f64,
}

impl ClassPriors {
    pub fn new(p1: f64) -> Result<Self> {
        if !p1.is_finite() || p1 <= 0.0 || p1 >= 1.0 {
            return Err(Error::param(
                "p1",
                format!("class prior must lie strictly in (0, 1), got {p1}"),
            ));
        }
        Ok(ClassPriors { p1, p2: 1.0 - p1 })
    }

    /// Empirical priors from a label vector; both classes must be present.
    pub fn from_labels(labels: &[bool]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("labels"));
        }
        let pos = labels.iter().filter(|&&l| l).count();
        if pos == 0 || pos == labels.len() {
            return Err(Error::DegenerateClasses(format!(
                "need both classes, got {pos} positives out of {}",
                labels.len()
            )));
        }
        Ok(ClassPriors {
            p1: pos as f64 / labels.len() as f64,
            p2: (labels.len() - pos) as f64 / labels.len() as f64,
        })
    }

    pub fn p1(self) -> f64 {
        self.p1
    }

    pub fn p2(self) -> f64 {
        self.p2
    }
}

/// Cell counts of the 2x2 signal/outcome table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ContingencyCounts {
    pub fn new(tp: u64, fp: u64, fneg: u64, tn: u64) -> Self {
        ContingencyCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fneg,
            true_negatives: tn,
        }
    }

    /// Tallies signals against outcomes.
    pub fn from_signals(signals: &[bool], labels: &[bool]) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: signals.len(),
                right: labels.len(),
                context: "signals vs labels",
            });
        }
        let mut c = ContingencyCounts::default();
        for (&s, &y) in signals.iter().zip(labels) {
            match (s, y) {
                (true, true) => c.true_positives += 1,
                (true, false) => c.false_positives += 1,
                (false, true) => c.false_negatives += 1,
                (false, false) => c.true_negatives += 1,
            }
        }
        Ok(c)
    }

    /// Cell-wise sum, used to pool folds or quarters before evaluating.
    pub fn add(&mut self, other: &ContingencyCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.true_negatives += other.true_negatives;
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn positives(&self) -> u64 {
        self.true_positives + self.false_negatives
    }

    pub fn negatives(&self) -> u64 {
        self.false_positives + self.true_negatives
    }

    /// Share of actual pre-crisis observations that were missed, FN / (TP + FN).
    /// Defined as 0 when there are no positives to miss.
    pub fn type1_rate(&self) -> f64 {
        let pos = self.positives();
        if pos == 0 {
            0.0
        } else {
            self.false_negatives as f64 / pos as f64
        }
    }

    /// Share of tranquil observations that raised alarms, FP / (FP + TN).
    /// Defined as 0 when there are no negatives.
    pub fn type2_rate(&self) -> f64 {
        let neg = self.negatives();
        if neg == 0 {
            0.0
        } else {
            self.false_positives as f64 / neg as f64
        }
    }

    /// Empirical priors implied by the table itself.
    pub fn priors(&self) -> Result<ClassPriors> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(Error::DegenerateClasses(format!(
                "contingency table needs both classes, got {} positives / {} negatives",
                self.positives(),
                self.negatives()
            )));
        }
        ClassPriors::new(self.positives() as f64 / self.total() as f64)
    }
}

/// Expected preference-weighted loss: mu * T1 * P1 + (1 - mu) * T2 * P2.
pub fn loss(counts: &ContingencyCounts, pref: Preference, priors: ClassPriors) -> f64 {
    pref.mu() * counts.type1_rate() * priors.p1()
        + (1.0 - pref.mu()) * counts.type2_rate() * priors.p2()
}

/// Loss of the best trivial policy (always- or never-signal): min(mu*P1, (1-mu)*P2).
pub fn trivial_loss(pref: Preference, priors: ClassPriors) -> f64 {
    (pref.mu() * priors.p1()).min((1.0 - pref.mu()) * priors.p2())
}

/// Absolute usefulness: loss saved relative to the best trivial policy.
pub fn usefulness_absolute(counts: &ContingencyCounts, pref: Preference, priors: ClassPriors) -> f64 {
    trivial_loss(pref, priors) - loss(counts, pref, priors)
}

/// Relative usefulness: absolute usefulness as a share of the loss the best
/// trivial policy leaves on the table. 1 is a perfect model, 0 no better
/// than ignoring the model, negative worse than ignoring it.
pub fn usefulness_relative(counts: &ContingencyCounts, pref: Preference, priors: ClassPriors) -> f64 {
    usefulness_absolute(counts, pref, priors) / trivial_loss(pref, priors)
}

/// Signals implied by a probability series under a threshold; strict exceedance.
pub fn apply_threshold(probs: &[f64], tau: f64) -> Vec<bool> {
    probs.iter().map(|&p| p > tau).collect()
}

/// The threshold chosen by [`optimize_threshold`], with its in-sample scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub counts: ContingencyCounts,
    pub loss: f64,
    pub usefulness_absolute: f64,
    pub usefulness_relative: f64,
}

fn validate_probs(probs: &[f64], context: &'static str) -> Result<()> {
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                position: i,
                context,
            });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(
                "probability",
                format!("must lie in [0, 1], got {p} at position {i}"),
            ));
        }
    }
    Ok(())
}

/// Finds the loss-minimizing threshold over the candidate set consisting of
/// 0, 1 and the midpoints between adjacent distinct probabilities.
///
/// Ties in the minimal loss are resolved toward the largest threshold, so a
/// flat stretch of the loss curve yields the most conservative signal rule.
/// Priors are taken from `priors` when given, else from the labels.
pub fn optimize_threshold(
    probs: &[f64],
    labels: &[bool],
    pref: Preference,
    priors: Option<ClassPriors>,
) -> Result<ThresholdChoice> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
            context: "probabilities vs labels",
        });
    }
    validate_probs(probs, "optimize_threshold probabilities")?;
    let priors = match priors {
        Some(p) => p,
        None => ClassPriors::from_labels(labels)?,
    };
    let total_pos: u64 = labels.iter().filter(|&&l| l).count() as u64;
    let total_neg = labels.len() as u64 - total_pos;

    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    let mut candidates = Vec::with_capacity(probs.len() + 2);
    candidates.push(0.0);
    for w in order.windows(2) {
        let (lo, hi) = (probs[w[0]], probs[w[1]]);
        if hi > lo {
            candidates.push(lo + (hi - lo) / 2.0);
        }
    }
    candidates.push(1.0);

    let mut best: Option<ThresholdChoice> = None;
    let mut cut = 0; // points[..cut] have prob <= tau, points[cut..] signal
    let mut pos_below = 0u64;
    for tau in candidates {
        while cut < order.len() && probs[order[cut]] <= tau {
            if labels[order[cut]] {
                pos_below += 1;
            }
            cut += 1;
        }
        let tp = total_pos - pos_below;
        let fp = (order.len() - cut) as u64 - tp;
        let counts = ContingencyCounts::new(tp, fp, total_pos - tp, total_neg - fp);
        let l = loss(&counts, pref, priors);
        let better = match &best {
            Some(b) => l <= b.loss,
            None => true,
        };
        if better {
            best = Some(ThresholdChoice {
                tau,
                counts,
                loss: l,
                usefulness_absolute: trivial_loss(pref, priors) - l,
                usefulness_relative: (trivial_loss(pref, priors) - l) / trivial_loss(pref, priors),
            });
        }
    }
    Ok(best.expect("candidate set is never empty"))
}

/// Area under the ROC curve by the trapezoidal sweep over distinct score
/// values. Ties contribute diagonal segments, so the result equals the
/// Mann-Whitney pairwise concordance with ties counted as one half.
///
/// Scores only need to be finite; any strictly increasing transform of them
/// leaves the result unchanged.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
            context: "scores vs labels",
        });
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite {
                position: i,
                context: "roc_auc scores",
            });
        }
    }
    let total_pos: u64 = labels.iter().filter(|&&l| l).count() as u64;
    let total_neg = labels.len() as u64 - total_pos;
    if total_pos == 0 || total_neg == 0 {
        return Err(Error::DegenerateClasses(
        	"ROC needs both classes".to_string(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    let mut area2 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - prev_fp) as f64 * (tp + prev_tp) as f64;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area2 / (2.0 * total_pos as f64 * total_neg as f64))
}

/// Full evaluation of a probability series at a threshold chosen elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub counts: ContingencyCounts,
    pub type1_rate: f64,
    pub type2_rate: f64,
    pub loss: f64,
    pub usefulness_absolute: f64,
    pub usefulness_relative: f64,
    pub auc: f64,
    pub tau: f64,
}

impl EvaluationResult {
    /// Evaluates pooled counts (with the threshold that produced them) and a
    /// pooled AUC under explicit priors.
    pub fn from_parts(
        counts: ContingencyCounts,
        pref: Preference,
        priors: ClassPriors,
        auc: f64,
        tau: f64,
    ) -> Self {
        let l = loss(&counts, pref, priors);
        EvaluationResult {
            counts,
            type1_rate: counts.type1_rate(),
            type2_rate: counts.type2_rate(),
            loss: l,
            usefulness_absolute: trivial_loss(pref, priors) - l,
            usefulness_relative: (trivial_loss(pref, priors) - l) / trivial_loss(pref, priors),
            auc,
            tau,
        }
    }

    /// In-sample evaluation: optimizes the threshold on the series itself.
    pub fn from_series(probs: &[f64], labels: &[bool], pref: Preference) -> Result<Self> {
        let choice = optimize_threshold(probs, labels, pref, None)?;
        let priors = ClassPriors::from_labels(labels)?;
        Ok(EvaluationResult::from_parts(
            choice.counts,
            pref,
            priors,
            roc_auc(probs, labels)?,
            choice.tau,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_and_usefulness_match_hand_computation() {
        // 10 observations, 3 pre-crisis: TP=2 FN=1 FP=3 TN=4.
        let counts = ContingencyCounts::new(2, 3, 1, 4);
        let pref = Preference::benchmark();
        let priors = counts.priors().unwrap();
        assert_abs_diff_eq!(priors.p1(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(counts.type1_rate(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(counts.type2_rate(), 3.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(loss(&counts, pref, priors), 0.14, epsilon = 1e-12);
        assert_abs_diff_eq!(usefulness_absolute(&counts, pref, priors), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(usefulness_relative(&counts, pref, priors), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_separation_picks_midpoint_threshold() {
        let probs = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let choice = optimize_threshold(&probs, &labels, Preference::benchmark(), None).unwrap();
        assert_abs_diff_eq!(choice.tau, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(choice.usefulness_relative, 1.0, epsilon = 1e-15);
        assert_eq!(choice.counts, ContingencyCounts::new(2, 0, 0, 2));
    }

    #[test]
    fn ties_resolve_to_largest_threshold() {
        // Both tau = 0.5 and tau = 1.0 leave the loss at its minimum here:
        // the single positive has the lowest probability, so signalling never
        // beats staying quiet under mu = 0.5.
        let probs = [0.2, 0.6, 0.8];
        let labels = [true, false, false];
        let pref = Preference::new(0.2).unwrap();
        let choice = optimize_threshold(&probs, &labels, pref, None).unwrap();
        assert_abs_diff_eq!(choice.tau, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn threshold_is_strictly_exceeded() {
        let signals = apply_threshold(&[0.3, 0.30000001, 0.29999999], 0.3);
        assert_eq!(signals, vec![false, true, false]);
    }

    #[test]
    fn auc_handles_ties_as_half() {
        // One positive tied with one negative at 0.5, plus a clean pair.
        let scores = [0.9, 0.5, 0.5, 0.1];
        let labels = [true, true, false, false];
        // Pairs: (0.9 vs 0.5) conc, (0.9 vs 0.1) conc, (0.5 vs 0.5) tie,
        // (0.5 vs 0.1) conc -> (3 + 0.5) / 4.
        assert_abs_diff_eq!(roc_auc(&scores, &labels).unwrap(), 0.875, epsilon = 1e-15);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn optimize_rejects_out_of_range_probabilities() {
        let r = optimize_threshold(&[0.5, 1.2], &[true, false], Preference::benchmark(), None);
        assert!(r.is_err());
    }

    #[test]
    fn from_series_reports_all_pieces() {
        let probs = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let ev = EvaluationResult::from_series(&probs, &labels, Preference::benchmark()).unwrap();
        assert_abs_diff_eq!(ev.auc, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.usefulness_relative, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.loss, 0.0, epsilon = 1e-15);
        assert_eq!(ev.counts.total(), 4);
    }
}
