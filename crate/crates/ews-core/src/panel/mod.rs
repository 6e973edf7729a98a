//! Quarterly country panels: ingestion, indicator transformations, crisis
//! labeling and exclusion windows, and publication lags.
//!
//! The pipeline is: raw indicator columns, optionally shifted by publication
//! lags for real-time work, are turned into feature columns by
//! [`RawPanel::transform`], then [`RawPanel::label_and_filter`] attaches the
//! pre-crisis labels and usability flags that estimation consumes.

pub mod hp;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quarter::Quarter;

/// Whether an indicator is accounting-based (published with a two-quarter
/// delay) or market-based (one quarter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Accounting,
    Market,
}

impl IndicatorKind {
    /// Publication delay in quarters.
    pub fn lag(self) -> i32 {
        match self {
            IndicatorKind::Accounting => 2,
            IndicatorKind::Market => 1,
        }
    }
}

/// A named raw indicator column and its publication-lag class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicator {
    pub name: String,
    pub kind: IndicatorKind,
}

/// One country's contiguous quarterly span; `values[indicator][t]` holds the
/// observation at `start + t`, with `None` for missing.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryBlock {
    pub start: Quarter,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CountryBlock {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn quarter_at(&self, t: usize) -> Quarter {
        self.start.offset(t as i32)
    }
}

/// A systemic crisis episode for one country, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisEvent {
    pub country: String,
    pub start: Quarter,
    pub end: Quarter,
}

impl CrisisEvent {
    pub fn new(country: impl Into<String>, start: Quarter, end: Quarter) -> Result<Self> {
        if end < start {
            return Err(Error::Panel(format!(
                "crisis event ends ({end}) before it starts ({start})"
            )));
        }
        Ok(CrisisEvent {
            country: country.into(),
            start,
            end,
        })
    }
}

/// Merges overlapping or touching events of the same country, leaving the
/// rest untouched. Output is sorted by (country, start).
pub fn merge_events(events: &[CrisisEvent]) -> Vec<CrisisEvent> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| (&a.country, a.start).cmp(&(&b.country, b.start)));
    let mut merged: Vec<CrisisEvent> = Vec::with_capacity(sorted.len());
    for ev in sorted {
        match merged.last_mut() {
            Some(last) if last.country == ev.country && ev.start <= last.end.offset(1) => {
                if ev.end > last.end {
                    last.end = ev.end;
                }
            }
            _ => merged.push(ev),
        }
    }
    merged
}

/// Forecast horizon: an observation is pre-crisis when it lies `lo..=hi`
/// quarters before a crisis start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    lo: u32,
    hi: u32,
}

impl Horizon {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo < 1 {
            return Err(Error::param("horizon.lo", "must be at least 1"));
        }
        if hi < lo {
            return Err(Error::param(
                "horizon.hi",
                format!("must be >= lo, got lo={lo} hi={hi}"),
            ));
        }
        Ok(Horizon { lo, hi })
    }

    /// The benchmark horizon: 5 to 12 quarters ahead of a crisis.
    pub fn benchmark() -> Self {
        Horizon { lo: 5, hi: 12 }
    }

    pub fn lo(self) -> u32 {
        self.lo
    }

    pub fn hi(self) -> u32 {
        self.hi
    }
}

/// How a feature column is derived from raw indicator columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransformKind {
    /// The raw column unchanged.
    Level,
    /// Source divided by another raw column.
    Ratio { denominator: String },
    /// Four-quarter growth rate x[t]/x[t-4] - 1.
    AnnualGrowth,
    /// Absolute deviation from the one-sided HP trend.
    AbsTrendDev { hp_lambda: f64 },
    /// Relative deviation (x - trend) / trend from the one-sided HP trend.
    RelTrendDev { hp_lambda: f64 },
}

/// Default HP smoothing parameter for quarterly trend deviations.
pub const DEFAULT_HP_LAMBDA: f64 = 400_000.0;

/// Declares one feature column of the model: a source indicator and the
/// transformation applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub source: String,
    #[serde(flatten)]
    pub kind: TransformKind,
}

/// A quarterly multi-country panel of indicator columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    indicators: Vec<Indicator>,
    countries: Vec<String>,
    blocks: Vec<CountryBlock>,
    lags_applied: bool,
}

impl RawPanel {
    /// Assembles a panel from per-country blocks. Countries and blocks are
    /// parallel; every block must carry one series per indicator, all of one
    /// length per country.
    pub fn from_parts(
        indicators: Vec<Indicator>,
        countries: Vec<String>,
        blocks: Vec<CountryBlock>,
    ) -> Result<Self> {
        if countries.len() != blocks.len() {
            return Err(Error::LengthMismatch {
                left: countries.len(),
                right: blocks.len(),
                context: "countries vs blocks",
            });
        }
        for (c, b) in countries.iter().zip(&blocks) {
            if b.values.len() != indicators.len() {
                return Err(Error::Panel(format!(
                    "country {c}: {} series for {} indicators",
                    b.values.len(),
                    indicators.len()
                )));
            }
            if let Some(first) = b.values.first() {
                if b.values.iter().any(|s| s.len() != first.len()) {
                    return Err(Error::Panel(format!(
                        "country {c}: indicator series of unequal length"
                    )));
                }
            }
        }
        Ok(RawPanel {
            indicators,
            countries,
            blocks,
            lags_applied: false,
        })
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn blocks(&self) -> &[CountryBlock] {
        &self.blocks
    }

    pub fn lags_applied(&self) -> bool {
        self.lags_applied
    }

    /// Reclassifies an indicator's publication-lag kind.
    pub fn set_indicator_kind(&mut self, name: &str, kind: IndicatorKind) -> Result<()> {
        match self.indicators.iter_mut().find(|i| i.name == name) {
            Some(ind) => {
                ind.kind = kind;
                Ok(())
            }
            None => Err(Error::Panel(format!("unknown indicator {name:?}"))),
        }
    }

    fn indicator_index(&self, name: &str) -> Result<usize> {
        self.indicators
            .iter()
            .position(|i| i.name == name)
            .ok_or_else(|| Error::Panel(format!("unknown indicator {name:?}")))
    }

    /// Shifts every column by its publication lag so that the value dated t
    /// is the one actually available at t. Accounting columns move two
    /// quarters, market columns one. Intended for the recursive real-time
    /// protocol; a second application is rejected.
    pub fn apply_publication_lags(&self) -> Result<RawPanel> {
        if self.lags_applied {
            return Err(Error::Panel(
                "publication lags already applied to this panel".to_string(),
            ));
        }
        let mut out = self.clone();
        for block in &mut out.blocks {
            for (ind, series) in self.indicators.iter().zip(&mut block.values) {
                let lag = ind.kind.lag() as usize;
                let mut shifted = vec![None; series.len()];
                for t in lag..series.len() {
                    shifted[t] = series[t - lag];
                }
                *series = shifted;
            }
        }
        out.lags_applied = true;
        Ok(out)
    }

    /// Builds the feature panel declared by `specs`. Feature columns keep the
    /// publication-lag kind of their source indicator, and the output spans
    /// the same (country, quarter) keys; transformation only introduces
    /// missing values, never removes rows.
    pub fn transform(&self, specs: &[FeatureSpec]) -> Result<RawPanel> {
        if specs.is_empty() {
            return Err(Error::EmptyInput("feature specs"));
        }
        let mut indicators = Vec::with_capacity(specs.len());
        for spec in specs {
            let src = self.indicator_index(&spec.source)?;
            indicators.push(Indicator {
                name: spec.name.clone(),
                kind: self.indicators[src].kind,
            });
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let mut values = Vec::with_capacity(specs.len());
            for spec in specs {
                let src = &block.values[self.indicator_index(&spec.source)?];
                values.push(transform_column(self, block, src, &spec.kind)?);
            }
            blocks.push(CountryBlock {
                start: block.start,
                values,
            });
        }
        Ok(RawPanel {
            indicators,
            countries: self.countries.clone(),
            blocks,
            lags_applied: self.lags_applied,
        })
    }

    /// Attaches pre-crisis labels and exclusion flags, dropping rows with any
    /// missing feature (complete-case estimation).
    ///
    /// A quarter q is labeled 1 when `start - hi <= q <= start - lo` for some
    /// event start. It is unusable when inside an event, within
    /// `post_crisis_quarters` after an event's end, or within the skipped
    /// `1..lo-1` quarters just before a start; exclusion wins over labeling.
    pub fn label_and_filter(
        &self,
        events: &[CrisisEvent],
        horizon: Horizon,
        post_crisis_quarters: u32,
    ) -> Result<LabeledPanel> {
        for ev in events {
            if !self.countries.contains(&ev.country) {
                return Err(Error::Panel(format!(
                    "crisis event references unknown country {:?}",
                    ev.country
                )));
            }
            if ev.end < ev.start {
                return Err(Error::Panel(format!(
                    "crisis event ends ({}) before it starts ({})",
                    ev.end, ev.start
                )));
            }
        }
        let events = merge_events(events);
        let mut observations = Vec::new();
        for (ci, (country, block)) in self.countries.iter().zip(&self.blocks).enumerate() {
            let own: Vec<&CrisisEvent> =
                events.iter().filter(|e| &e.country == country).collect();
            for t in 0..block.len() {
                let x: Option<Vec<f64>> = block
                    .values
                    .iter()
                    .map(|series| series[t])
                    .collect();
                let Some(x) = x else { continue };
                let q = block.quarter_at(t);
                let mut usable = true;
                let mut label = false;
                for ev in &own {
                    let since_start = q.quarters_since(ev.start);
                    let since_end = q.quarters_since(ev.end);
                    let in_event = since_start >= 0 && since_end <= 0;
                    let post_event = since_end > 0 && since_end <= post_crisis_quarters as i32;
                    let near_before =
                        since_start < 0 && -since_start <= horizon.lo() as i32 - 1;
                    if in_event || post_event || near_before {
                        usable = false;
                    }
                    let lead = -since_start;
                    if lead >= horizon.lo() as i32 && lead <= horizon.hi() as i32 {
                        label = true;
                    }
                }
                if !usable {
                    label = false;
                }
                observations.push(PanelObservation {
                    country: ci,
                    quarter: q,
                    x,
                    label,
                    usable,
                });
            }
        }
        Ok(LabeledPanel {
            countries: self.countries.clone(),
            features: self.indicators.iter().map(|i| i.name.clone()).collect(),
            observations,
        })
    }
}

fn transform_column(
    panel: &RawPanel,
    block: &CountryBlock,
    src: &[Option<f64>],
    kind: &TransformKind,
) -> Result<Vec<Option<f64>>> {
    match kind {
        TransformKind::Level => Ok(src.to_vec()),
        TransformKind::Ratio { denominator } => {
            let den = &block.values[panel.indicator_index(denominator)?];
            Ok(src
                .iter()
                .zip(den)
                .map(|(n, d)| match (n, d) {
                    (Some(n), Some(d)) if *d != 0.0 => Some(n / d),
                    _ => None,
                })
                .collect())
        }
        TransformKind::AnnualGrowth => Ok((0..src.len())
            .map(|t| {
                if t < 4 {
                    return None;
                }
                match (src[t], src[t - 4]) {
                    (Some(now), Some(base)) if base != 0.0 => Some(now / base - 1.0),
                    _ => None,
                }
            })
            .collect()),
        TransformKind::AbsTrendDev { hp_lambda } => {
            trend_deviation(src, *hp_lambda, |x, trend| Some(x - trend))
        }
        TransformKind::RelTrendDev { hp_lambda } => trend_deviation(src, *hp_lambda, |x, trend| {
            if trend == 0.0 {
                None
            } else {
                Some((x - trend) / trend)
            }
        }),
    }
}

/// Applies the one-sided HP filter to every maximal contiguous run of present
/// values, then maps (value, trend) to the output. Each run warms up
/// independently.
fn trend_deviation(
    src: &[Option<f64>],
    lambda: f64,
    dev: impl Fn(f64, f64) -> Option<f64>,
) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; src.len()];
    let mut run_start = None;
    for t in 0..=src.len() {
        match (run_start, src.get(t).copied().flatten()) {
            (None, Some(_)) => run_start = Some(t),
            (Some(s), None) => {
                let run: Vec<f64> = src[s..t].iter().map(|v| v.unwrap()).collect();
                let trend = hp::hp_trend_one_sided(&run, lambda)?;
                for (k, (&x, &tr)) in run.iter().zip(&trend.trend).enumerate() {
                    out[s + k] = dev(x, tr);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// One (country, quarter) row of the estimation panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    /// Index into [`LabeledPanel::countries`].
    pub country: usize,
    pub quarter: Quarter,
    pub x: Vec<f64>,
    /// True for pre-crisis observations (the positive class).
    pub label: bool,
    /// False inside crisis, post-crisis and near-crisis exclusion windows;
    /// unusable rows never enter estimation or evaluation.
    pub usable: bool,
}

/// The labeled, exclusion-filtered estimation panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub countries: Vec<String>,
    pub features: Vec<String>,
    pub observations: Vec<PanelObservation>,
}

impl LabeledPanel {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Indices of the usable observations, in panel order.
    pub fn usable_indices(&self) -> Vec<usize> {
        self.observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.usable)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q(year: i32, idx: u8) -> Quarter {
        Quarter::new(year, idx).unwrap()
    }

    fn single_country_panel(start: Quarter, columns: Vec<(&str, Vec<Option<f64>>)>) -> RawPanel {
        let indicators = columns
            .iter()
            .map(|(name, _)| Indicator {
                name: (*name).to_string(),
                kind: IndicatorKind::Accounting,
            })
            .collect();
        let block = CountryBlock {
            start,
            values: columns.into_iter().map(|(_, v)| v).collect(),
        };
        RawPanel::from_parts(indicators, vec!["AA".to_string()], vec![block]).unwrap()
    }

    #[test]
    fn annual_growth_matches_hand_example() {
        let panel = single_country_panel(
            q(2000, 1),
            vec![("credit", vec![Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(2.0)])],
        );
        let spec = FeatureSpec {
            name: "credit_growth".into(),
            source: "credit".into(),
            kind: TransformKind::AnnualGrowth,
        };
        let out = panel.transform(std::slice::from_ref(&spec)).unwrap();
        let col = &out.blocks()[0].values[0];
        assert_eq!(&col[..4], &[None, None, None, None]);
        assert_abs_diff_eq!(col[4].unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_series_has_zero_trend_deviation() {
        let series = vec![Some(7.5); 20];
        let panel = single_country_panel(q(2000, 1), vec![("credit", series)]);
        for kind in [
            TransformKind::AbsTrendDev { hp_lambda: DEFAULT_HP_LAMBDA },
            TransformKind::RelTrendDev { hp_lambda: DEFAULT_HP_LAMBDA },
        ] {
            let spec = FeatureSpec {
                name: "dev".into(),
                source: "credit".into(),
                kind,
            };
            let out = panel.transform(std::slice::from_ref(&spec)).unwrap();
            for v in &out.blocks()[0].values[0] {
                assert_abs_diff_eq!(v.unwrap(), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn linear_series_has_zero_absolute_deviation() {
        let series: Vec<Option<f64>> = (0..30).map(|t| Some(2.0 + 0.5 * t as f64)).collect();
        let panel = single_country_panel(q(2000, 1), vec![("credit", series)]);
        let spec = FeatureSpec {
            name: "dev".into(),
            source: "credit".into(),
            kind: TransformKind::AbsTrendDev { hp_lambda: 1600.0 },
        };
        let out = panel.transform(std::slice::from_ref(&spec)).unwrap();
        for v in &out.blocks()[0].values[0] {
            assert_abs_diff_eq!(v.unwrap(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn ratio_handles_missing_and_zero_denominator() {
        let panel = single_country_panel(
            q(2000, 1),
            vec![
                ("credit", vec![Some(4.0), Some(6.0), Some(8.0)]),
                ("gdp", vec![Some(2.0), Some(0.0), None]),
            ],
        );
        let spec = FeatureSpec {
            name: "credit_to_gdp".into(),
            source: "credit".into(),
            kind: TransformKind::Ratio {
                denominator: "gdp".into(),
            },
        };
        let out = panel.transform(std::slice::from_ref(&spec)).unwrap();
        assert_eq!(out.blocks()[0].values[0], vec![Some(2.0), None, None]);
    }

    #[test]
    fn transforms_preserve_keys_and_only_grow_missingness() {
        let series: Vec<Option<f64>> =
            (0..12).map(|t| if t == 5 { None } else { Some(t as f64 + 1.0) }).collect();
        let panel = single_country_panel(q(2001, 3), vec![("credit", series.clone())]);
        let spec = FeatureSpec {
            name: "growth".into(),
            source: "credit".into(),
            kind: TransformKind::AnnualGrowth,
        };
        let out = panel.transform(std::slice::from_ref(&spec)).unwrap();
        let col = &out.blocks()[0].values[0];
        assert_eq!(col.len(), series.len());
        assert_eq!(out.blocks()[0].start, q(2001, 3));
        for (orig, new) in series.iter().zip(col) {
            if orig.is_none() {
                assert!(new.is_none());
            }
        }
    }

    #[test]
    fn publication_lags_shift_by_kind_and_guard_against_reapplication() {
        let mut panel = single_country_panel(
            q(2007, 1),
            vec![
                ("balance", vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
                ("spread", vec![Some(10.0), Some(20.0), Some(30.0), Some(40.0)]),
            ],
        );
        panel.set_indicator_kind("spread", IndicatorKind::Market).unwrap();
        let lagged = panel.apply_publication_lags().unwrap();
        // Accounting value dated 2007Q1 becomes available at 2007Q3.
        assert_eq!(lagged.blocks()[0].values[0], vec![None, None, Some(1.0), Some(2.0)]);
        // Market value dated 2007Q1 becomes available at 2007Q2.
        assert_eq!(
            lagged.blocks()[0].values[1],
            vec![None, Some(10.0), Some(20.0), Some(30.0)]
        );
        assert!(lagged.apply_publication_lags().is_err());
    }

    fn labeled_fixture(event_start: Quarter, event_end: Quarter) -> LabeledPanel {
        let series: Vec<Option<f64>> = (0..80).map(|t| Some(t as f64)).collect();
        let panel = single_country_panel(q(2000, 1), vec![("credit", series)]);
        let events = vec![CrisisEvent::new("AA", event_start, event_end).unwrap()];
        panel
            .label_and_filter(&events, Horizon::benchmark(), 8)
            .unwrap()
    }

    #[test]
    fn labeling_window_and_exclusions_match_the_horizon() {
        let labeled = labeled_fixture(q(2008, 1), q(2009, 2));
        let by_quarter: std::collections::BTreeMap<Quarter, (bool, bool)> = labeled
            .observations
            .iter()
            .map(|o| (o.quarter, (o.label, o.usable)))
            .collect();

        // Pre-crisis: 12 down to 5 quarters before 2008Q1.
        for quarter in q(2005, 1).through(q(2006, 4)) {
            assert_eq!(by_quarter[&quarter], (true, true), "at {quarter}");
        }
        // Skipped run-up: 4 down to 1 quarters before the start.
        for quarter in q(2007, 1).through(q(2007, 4)) {
            assert_eq!(by_quarter[&quarter], (false, false), "at {quarter}");
        }
        // Crisis itself and two years after the end.
        for quarter in q(2008, 1).through(q(2011, 2)) {
            assert_eq!(by_quarter[&quarter], (false, false), "at {quarter}");
        }
        // Far away from the event: tranquil and usable.
        for quarter in [q(2004, 4), q(2011, 3), q(2019, 4)] {
            assert_eq!(by_quarter[&quarter], (false, true), "at {quarter}");
        }
    }

    #[test]
    fn exclusion_wins_over_labeling_for_adjacent_events() {
        // The second event's pre-crisis window [2008Q3, 2010Q2] overlaps the
        // first event's crisis and post-crisis quarters.
        let series: Vec<Option<f64>> = (0..80).map(|t| Some(t as f64)).collect();
        let panel = single_country_panel(q(2000, 1), vec![("credit", series)]);
        let events = vec![
            CrisisEvent::new("AA", q(2008, 1), q(2008, 4)).unwrap(),
            CrisisEvent::new("AA", q(2011, 3), q(2012, 1)).unwrap(),
        ];
        let labeled = panel
            .label_and_filter(&events, Horizon::benchmark(), 8)
            .unwrap();
        for o in &labeled.observations {
            if !o.usable {
                assert!(!o.label, "unusable {} must stay unlabeled", o.quarter);
            }
        }
        // 2008Q3 is both 12 quarters before 2011Q3 and inside the first
        // crisis: it must be excluded.
        let obs = labeled
            .observations
            .iter()
            .find(|o| o.quarter == q(2008, 3))
            .unwrap();
        assert!(!obs.usable && !obs.label);
        // 2010Q4 is 3 quarters before the second start: in the skipped run-up
        // (and also within two years of the first event's end).
        let obs = labeled
            .observations
            .iter()
            .find(|o| o.quarter == q(2010, 4))
            .unwrap();
        assert!(!obs.usable);
    }

    #[test]
    fn event_near_series_start_labels_only_existing_quarters() {
        // Pre-crisis window of a 2001Q2 start is [1998Q2, 2000Q1]; the panel
        // begins at 2000Q1, so exactly one labeled quarter exists.
        let labeled = labeled_fixture(q(2001, 2), q(2001, 3));
        let positives: Vec<Quarter> = labeled
            .observations
            .iter()
            .filter(|o| o.label)
            .map(|o| o.quarter)
            .collect();
        assert_eq!(positives, vec![q(2000, 1)]);
    }

    #[test]
    fn no_events_means_all_tranquil() {
        let series: Vec<Option<f64>> = (0..20).map(|t| Some(t as f64)).collect();
        let panel = single_country_panel(q(2000, 1), vec![("credit", series)]);
        let labeled = panel
            .label_and_filter(&[], Horizon::benchmark(), 8)
            .unwrap();
        assert_eq!(labeled.observations.len(), 20);
        assert!(labeled.observations.iter().all(|o| !o.label && o.usable));
    }

    #[test]
    fn complete_case_drops_rows_with_any_missing_feature() {
        let panel = single_country_panel(
            q(2000, 1),
            vec![
                ("a", vec![Some(1.0), None, Some(3.0)]),
                ("b", vec![Some(1.0), Some(2.0), Some(3.0)]),
            ],
        );
        let labeled = panel
            .label_and_filter(&[], Horizon::benchmark(), 8)
            .unwrap();
        let quarters: Vec<Quarter> = labeled.observations.iter().map(|o| o.quarter).collect();
        assert_eq!(quarters, vec![q(2000, 1), q(2000, 3)]);
    }

    #[test]
    fn events_for_unknown_countries_are_rejected() {
        let panel = single_country_panel(q(2000, 1), vec![("a", vec![Some(1.0)])]);
        let events = vec![CrisisEvent::new("ZZ", q(2001, 1), q(2001, 2)).unwrap()];
        assert!(panel.label_and_filter(&events, Horizon::benchmark(), 8).is_err());
    }

    #[test]
    fn overlapping_events_merge() {
        let events = vec![
            CrisisEvent::new("AA", q(2008, 1), q(2009, 1)).unwrap(),
            CrisisEvent::new("AA", q(2008, 3), q(2009, 4)).unwrap(),
            CrisisEvent::new("BB", q(2008, 1), q(2008, 2)).unwrap(),
        ];
        let merged = merge_events(&events);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].start, q(2008, 1));
        assert_eq!(merged[0].end, q(2009, 4));
    }
}
