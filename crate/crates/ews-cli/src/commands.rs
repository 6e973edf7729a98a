//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ews_core::experiment::{grid_search, kfold_race, recursive_race, RaceResult};
use ews_core::panel::LabeledPanel;
use ews_core::synth::synth_panel;
use ews_core::uncertainty::{
    bootstrap_recursive, repeated_cv_performance, significant_only_evaluation, OutputBand,
    OutputUncertainty,
};
use ews_core::eval::EvaluationResult;

use crate::artifacts::{
    csv_table, fnum, matrix_csv, predictions_csv, pretty_table, ranking_csv, summary_row,
    thresholds_csv, OutDir,
};
use crate::config::{DataConfig, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::svg;

/// Loads the input CSVs and produces the estimation panel: optional
/// publication lags (recursive protocol only), optional feature transforms,
/// then labeling and exclusion windows.
fn prepare_panel(cfg: &RunConfig, lags: bool) -> Result<LabeledPanel> {
    let raw = data::read_panel(&cfg.data.panel)?;
    let events = data::read_events(&cfg.data.events)?;
    let raw = if lags { raw.apply_publication_lags()? } else { raw };
    let raw = if cfg.features.is_empty() {
        raw
    } else {
        raw.transform(&cfg.features)?
    };
    Ok(raw.label_and_filter(&events, cfg.horizon()?, cfg.labeling.post_crisis_quarters)?)
}

fn out_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::config("no output directory: pass --out or set `out`"))
}

fn race_tables(out: &mut OutDir, race: &RaceResult, panel: &LabeledPanel) -> Result<()> {
    out.write("ranking.csv", &ranking_csv(race))?;
    out.write("thresholds.csv", &thresholds_csv(race))?;
    out.write("predictions.csv", &predictions_csv(race, &panel.countries))?;
    out.warn_all(&race.warnings);
    for m in &race.methods {
        for w in &m.warnings {
            out.warn(format!("{}: {w}", m.name));
        }
    }
    Ok(())
}

pub fn ingest(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    let raw = data::read_panel(&cfg.data.panel)?;
    let events = data::read_events(&cfg.data.events)?;
    let panel = prepare_panel(cfg, false)?;

    let mut out = OutDir::create(&dir)?;
    data::write_panel(&dir.join("panel.csv"), &raw)?;
    data::write_events(&dir.join("events.csv"), &events)?;
    out.note_external("panel.csv");
    out.note_external("events.csv");

    let usable = panel.usable_indices();
    let positives = usable
        .iter()
        .filter(|&&i| panel.observations[i].label)
        .count();
    println!(
        "panel: {} countries, {} indicators, {} rows",
        raw.countries().len(),
        raw.indicators().len(),
        raw.blocks().iter().map(|b| b.len()).sum::<usize>()
    );
    println!("events: {}", events.len());
    println!(
        "estimation sample: {} usable observations ({} pre-crisis, {} tranquil)",
        usable.len(),
        positives,
        usable.len() - positives
    );
    out.finish("ingest", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn gridsearch(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    if cfg.grid.is_empty() {
        return Err(CliError::config("grid is empty: add [[grid]] entries"));
    }
    let dir = out_dir(cfg, out_flag)?;
    let panel = prepare_panel(cfg, false)?;
    let pref = cfg.preference()?;
    let outcome = grid_search(&cfg.grid, &panel, pref, cfg.folds, cfg.seed)?;

    let rows: Vec<Vec<String>> = outcome
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                p.spec.name().to_string(),
                serde_json::to_string(&p.spec).unwrap_or_default(),
                p.usefulness.map(fnum).unwrap_or_default(),
                p.error.clone().unwrap_or_default(),
                ((i == outcome.best) as u8).to_string(),
            ]
        })
        .collect();
    let mut out = OutDir::create(&dir)?;
    out.write("grid.csv", &csv_table(&["family", "spec", "ur", "error", "best"], &rows))?;
    println!(
        "best: {} (Ur = {})",
        serde_json::to_string(outcome.best_spec()).unwrap_or_default(),
        outcome.points[outcome.best].usefulness.map(fnum).unwrap_or_default()
    );
    out.finish("gridsearch", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn race_cv(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    let panel = prepare_panel(cfg, false)?;
    let race = kfold_race(
        &cfg.methods,
        &cfg.aggregates,
        &panel,
        cfg.preference()?,
        cfg.folds,
        cfg.seed,
    )?;
    let mut out = OutDir::create(&dir)?;
    race_tables(&mut out, &race, &panel)?;
    print!("{}", pretty_table(&ranking_csv(&race)));
    out.finish("race-cv", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn race_recursive(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    let panel = prepare_panel(cfg, cfg.recursive.apply_publication_lags)?;
    let race = recursive_race(
        &cfg.methods,
        &cfg.aggregates,
        &panel,
        cfg.preference()?,
        &cfg.recursive_config(),
        cfg.seed,
    )?;
    let mut out = OutDir::create(&dir)?;
    race_tables(&mut out, &race, &panel)?;
    print!("{}", pretty_table(&ranking_csv(&race)));
    out.finish("race-recursive", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn robust_cv(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    let panel = prepare_panel(cfg, false)?;
    let perf = repeated_cv_performance(
        &cfg.methods,
        &cfg.aggregates,
        &panel,
        cfg.preference()?,
        cfg.folds,
        cfg.replicates,
        cfg.alpha,
        cfg.seed,
    )?;

    let ur_rows: Vec<Vec<String>> = perf
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut row = summary_row(n, &perf.ur[i]);
            row.push(perf.first_significant[i].clone().unwrap_or_default());
            row
        })
        .collect();
    let auc_rows: Vec<Vec<String>> = perf
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| summary_row(n, &perf.auc[i]))
        .collect();

    let mut out = OutDir::create(&dir)?;
    out.write(
        "ur_summary.csv",
        &csv_table(
            &["method", "mean", "se", "ci_lo", "ci_hi", "t_star", "first_significant"],
            &ur_rows,
        ),
    )?;
    out.write(
        "auc_summary.csv",
        &csv_table(&["method", "mean", "se", "ci_lo", "ci_hi", "t_star"], &auc_rows),
    )?;
    out.write("ur_matrix.csv", &matrix_csv(&perf.ur_matrix))?;
    out.write("auc_matrix.csv", &matrix_csv(&perf.auc_matrix))?;
    print!(
        "{}",
        pretty_table(&csv_table(
            &["method", "mean", "se", "ci_lo", "ci_hi", "t_star", "first_significant"],
            &ur_rows,
        ))
    );
    out.finish("robust-cv", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn eval_row(name: &str, r: &EvaluationResult) -> Vec<String> {
    vec![
        name.to_string(),
        r.counts.true_positives.to_string(),
        r.counts.false_positives.to_string(),
        r.counts.false_negatives.to_string(),
        r.counts.true_negatives.to_string(),
        fnum(r.type1_rate),
        fnum(r.type2_rate),
        fnum(r.loss),
        fnum(r.usefulness_absolute),
        fnum(r.usefulness_relative),
        fnum(r.auc),
        fnum(r.tau),
    ]
}

const EVAL_HEADER: [&str; 12] = [
    "method", "tp", "fp", "fn", "tn", "type1", "type2", "loss", "ua", "ur", "auc", "tau",
];

/// Emits the per-method band tables and plots. `filter` limits output to
/// the named methods; empty means all.
fn band_artifacts(
    out: &mut OutDir,
    unc: &OutputUncertainty,
    countries: &[String],
    filter: &[String],
) -> Result<()> {
    for bands in unc.bands.iter().flatten() {
        if !filter.is_empty() && !filter.contains(&bands.name) {
            continue;
        }
        let mut rows = Vec::new();
        for (target, band) in unc.targets.iter().zip(&bands.per_target) {
            let Some(b) = band else { continue };
            rows.push(vec![
                countries[target.country].clone(),
                target.quarter.to_string(),
                (target.label as u8).to_string(),
                (target.usable as u8).to_string(),
                fnum(b.prob.mean),
                fnum(b.prob.ci_lo),
                fnum(b.prob.ci_hi),
                fnum(b.threshold.mean),
                fnum(b.threshold.ci_lo),
                fnum(b.threshold.ci_hi),
                b.flag.symbol().to_string(),
            ]);
        }
        out.write(
            &format!("bands/{}.csv", bands.name),
            &csv_table(
                &[
                    "country", "quarter", "label", "usable", "p_mean", "p_lo", "p_hi",
                    "tau_mean", "tau_lo", "tau_hi", "flag",
                ],
                &rows,
            ),
        )?;

        // One plot per country, quarters in target order.
        let mut per_country: BTreeMap<usize, Vec<Option<&OutputBand>>> = BTreeMap::new();
        for (target, band) in unc.targets.iter().zip(&bands.per_target) {
            per_country
                .entry(target.country)
                .or_default()
                .push(band.as_ref());
        }
        for (ci, series) in &per_country {
            if series.iter().all(Option::is_none) {
                continue;
            }
            let plot = svg::band_plot(&bands.name, &countries[*ci], series);
            out.write(
                &format!("plots/{}_{}.svg", bands.name, countries[*ci]),
                &plot,
            )?;
        }
    }
    Ok(())
}

fn significant_only_rows(unc: &OutputUncertainty, pref: ews_core::eval::Preference) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for bands in unc.bands.iter().flatten() {
        let mut kept_bands: Vec<OutputBand> = Vec::new();
        let mut labels = Vec::new();
        for (target, band) in unc.targets.iter().zip(&bands.per_target) {
            let Some(b) = band else { continue };
            if !target.usable {
                continue;
            }
            kept_bands.push(b.clone());
            labels.push(target.label);
        }
        match significant_only_evaluation(&kept_bands, &labels, pref) {
            Ok(r) => {
                let mut row = eval_row(&bands.name, &r);
                row.push(
                    kept_bands
                        .iter()
                        .filter(|b| b.flag.is_significant())
                        .count()
                        .to_string(),
                );
                row.push(String::new());
                rows.push(row);
            }
            Err(e) => {
                let mut row = vec![bands.name.clone()];
                row.extend(std::iter::repeat_n(String::new(), EVAL_HEADER.len() - 1));
                row.push("0".to_string());
                row.push(e.to_string());
                rows.push(row);
            }
        }
    }
    rows
}

fn run_bootstrap(cfg: &RunConfig) -> Result<(LabeledPanel, OutputUncertainty)> {
    let panel = prepare_panel(cfg, cfg.recursive.apply_publication_lags)?;
    let unc = bootstrap_recursive(
        &cfg.methods,
        &cfg.aggregates,
        &panel,
        cfg.preference()?,
        &cfg.recursive_config(),
        cfg.replicates,
        cfg.alpha,
        cfg.seed,
    )?;
    Ok((panel, unc))
}

pub fn robust_recursive(cfg: &RunConfig, canonical: &str, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    let (panel, unc) = run_bootstrap(cfg)?;

    let ur_rows: Vec<Vec<String>> = unc
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| summary_row(n, &unc.ur[i]))
        .collect();
    let auc_rows: Vec<Vec<String>> = unc
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| summary_row(n, &unc.auc[i]))
        .collect();
    let mut robust_rows: Vec<Vec<String>> = unc
        .names
        .iter()
        .zip(&unc.robust)
        .filter_map(|(n, r)| r.as_ref().map(|r| eval_row(n, r)))
        .collect();
    robust_rows.sort_by(|a, b| {
        let ua: f64 = a[9].parse().unwrap_or(f64::NEG_INFINITY);
        let ub: f64 = b[9].parse().unwrap_or(f64::NEG_INFINITY);
        ub.total_cmp(&ua)
    });

    let mut out = OutDir::create(&dir)?;
    out.write(
        "ur_summary.csv",
        &csv_table(&["method", "mean", "se", "ci_lo", "ci_hi", "t_star"], &ur_rows),
    )?;
    out.write(
        "auc_summary.csv",
        &csv_table(&["method", "mean", "se", "ci_lo", "ci_hi", "t_star"], &auc_rows),
    )?;
    out.write("ur_matrix.csv", &matrix_csv(&unc.ur_matrix))?;
    out.write("robust_ranking.csv", &csv_table(&EVAL_HEADER, &robust_rows))?;

    let mut sig_header: Vec<&str> = EVAL_HEADER.to_vec();
    sig_header.push("kept");
    sig_header.push("note");
    let sig_rows = significant_only_rows(&unc, cfg.preference()?);
    out.write("significant_only.csv", &csv_table(&sig_header, &sig_rows))?;

    band_artifacts(&mut out, &unc, &panel.countries, &[])?;
    out.warn_all(&unc.warnings);
    print!("{}", pretty_table(&csv_table(&EVAL_HEADER, &robust_rows)));
    out.finish("robust-recursive", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn bands(
    cfg: &RunConfig,
    canonical: &str,
    out_flag: &Option<PathBuf>,
    methods: &[String],
) -> Result<()> {
    let dir = out_dir(cfg, out_flag)?;
    for name in methods {
        let known = cfg.methods.iter().any(|m| m.name() == name)
            || cfg.aggregates.iter().any(|a| a.name() == name);
        if !known {
            return Err(CliError::config(format!("unknown method {name:?} in --method")));
        }
    }
    let (panel, unc) = run_bootstrap(cfg)?;
    let mut out = OutDir::create(&dir)?;
    band_artifacts(&mut out, &unc, &panel.countries, methods)?;
    out.warn_all(&unc.warnings);
    out.finish("bands", cfg, canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// Pretty-prints the tables found in a finished output directory.
pub fn report(dir: &Path) -> Result<()> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::data(format!("{}: {e}", manifest_path.display())))?;
    let manifest: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", manifest_path.display())))?;
    println!(
        "command: {}   seed: {}   config: {}",
        manifest["command"].as_str().unwrap_or("?"),
        manifest["seed"],
        manifest["config_sha256"].as_str().unwrap_or("?")
    );
    if let Some(warnings) = manifest["warnings"].as_array() {
        if !warnings.is_empty() {
            println!("warnings: {}", warnings.len());
        }
    }
    let tables = [
        "ranking.csv",
        "grid.csv",
        "ur_summary.csv",
        "auc_summary.csv",
        "ur_matrix.csv",
        "auc_matrix.csv",
        "robust_ranking.csv",
        "significant_only.csv",
    ];
    for name in tables {
        let path = dir.join(name);
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        println!("\n== {name} ==");
        print!("{}", pretty_table(&text));
    }
    Ok(())
}

pub struct SynthParams {
    pub countries: usize,
    pub quarters: usize,
    pub events: usize,
    pub strength: f64,
    pub seed: u64,
}

/// Generates a synthetic panel plus a ready-to-run config pointing at it.
pub fn synth(params: &SynthParams, out_flag: &Option<PathBuf>) -> Result<()> {
    let dir = out_flag
        .clone()
        .ok_or_else(|| CliError::config("no output directory: pass --out"))?;
    let (raw, events) = synth_panel(
        params.seed,
        params.countries,
        params.quarters,
        params.events,
        params.strength,
    )?;

    // The recursive window opens twenty-eight quarters before the last
    // crisis so it sees tranquil quarters, the pre-crisis window and the
    // crisis itself, but never before the first crisis's recovery has
    // passed.
    let first = events.iter().map(|e| e.start).min().expect("events nonempty");
    let last = events.iter().map(|e| e.start).max().expect("events nonempty");
    let start = last.offset(-28).max(first.offset(12));

    let cfg = RunConfig::synthetic_defaults(
        DataConfig {
            panel: PathBuf::from("panel.csv"),
            events: PathBuf::from("events.csv"),
        },
        params.seed,
        start,
    );
    cfg.validate()?;
    let canonical = cfg.canonical()?;

    let mut out = OutDir::create(&dir)?;
    data::write_panel(&dir.join("panel.csv"), &raw)?;
    data::write_events(&dir.join("events.csv"), &events)?;
    out.note_external("panel.csv");
    out.note_external("events.csv");
    println!(
        "generated {} countries x {} quarters, {} events, signal strength {}",
        params.countries, params.quarters, params.events, params.strength
    );
    out.finish("synth", &cfg, &canonical)?;
    println!("wrote {}", dir.display());
    Ok(())
}
