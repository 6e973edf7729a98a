//! Deterministic artifact emission: CSV tables, JSON manifest, config copy.
//!
//! Every run writes into one output directory: `config.toml` (the canonical
//! config), `manifest.json` (command, config hash, seed, artifact list,
//! warnings), and the command's tables. Nothing here depends on the clock,
//! so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ews_core::experiment::{MethodRace, RaceResult};
use ews_core::uncertainty::{ResampleSummary, SignificanceMatrix};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<String>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    mu: f64,
    alpha: f64,
    folds: usize,
    replicates: usize,
    artifacts: &'a [String],
    warnings: &'a [String],
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn warn(&mut self, warning: impl Into<String>) {
        self.warnings.push(warning.into());
    }

    pub fn warn_all(&mut self, warnings: &[String]) {
        self.warnings.extend_from_slice(warnings);
    }

    /// Registers a file written into the directory by other means.
    pub fn note_external(&mut self, rel: &str) {
        self.artifacts.push(rel.to_string());
    }

    /// Writes one artifact file, tracking it for the manifest. Relative
    /// subpaths are allowed and created.
    pub fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    /// Writes the canonical config copy and the closing manifest.
    pub fn finish(mut self, command: &str, cfg: &RunConfig, canonical: &str) -> Result<PathBuf> {
        self.write("config.toml", canonical)?;
        let sha = RunConfig::sha256(canonical);
        self.artifacts.push("manifest.json".to_string());
        self.artifacts.sort();
        let manifest = Manifest {
            command,
            config_sha256: &sha,
            seed: cfg.seed,
            mu: cfg.mu,
            alpha: cfg.alpha,
            folds: cfg.folds,
            replicates: cfg.replicates,
            artifacts: &self.artifacts,
            warnings: &self.warnings,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::data(format!("manifest: {e}")))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Renders rows into CSV text with a trailing newline.
pub fn csv_table<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let escaped: Vec<String> = row.as_ref().iter().map(|f| escape_csv(f)).collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    out
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn fnum(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// The per-method ranking table of a race, sorted by descending relative
/// usefulness (ties keep the race order).
pub fn ranking_csv(race: &RaceResult) -> String {
    let mut order: Vec<&MethodRace> = race.methods.iter().collect();
    order.sort_by(|a, b| {
        b.result
            .usefulness_relative
            .total_cmp(&a.result.usefulness_relative)
    });
    let rows: Vec<Vec<String>> = order
        .iter()
        .map(|m| {
            vec![
                m.name.clone(),
                m.result.counts.true_positives.to_string(),
                m.result.counts.false_positives.to_string(),
                m.result.counts.false_negatives.to_string(),
                m.result.counts.true_negatives.to_string(),
                fnum(m.result.type1_rate),
                fnum(m.result.type2_rate),
                fnum(m.result.loss),
                fnum(m.result.usefulness_absolute),
                fnum(m.result.usefulness_relative),
                fnum(m.result.auc),
                fnum(m.result.tau),
                fnum(m.mean_in_sample_ur),
                m.converged.to_string(),
                m.warnings.len().to_string(),
            ]
        })
        .collect();
    csv_table(
        &[
            "method", "tp", "fp", "fn", "tn", "type1", "type2", "loss", "ua", "ur", "auc",
            "tau_mean", "in_sample_ur", "converged", "warnings",
        ],
        &rows,
    )
}

/// Per-unit optimized thresholds of every method.
pub fn thresholds_csv(race: &RaceResult) -> String {
    let mut rows = Vec::new();
    for m in &race.methods {
        for (unit, tau) in &m.thresholds {
            rows.push(vec![m.name.clone(), unit.clone(), fnum(*tau)]);
        }
    }
    csv_table(&["method", "unit", "tau"], &rows)
}

/// Long-format out-of-sample predictions of every method.
pub fn predictions_csv(race: &RaceResult, countries: &[String]) -> String {
    let mut rows = Vec::new();
    for m in &race.methods {
        for (t, target) in race.targets.iter().enumerate() {
            let (Some(prob), Some(signal)) = (m.probs[t], m.signals[t]) else {
                continue;
            };
            rows.push(vec![
                m.name.clone(),
                countries[target.country].clone(),
                target.quarter.to_string(),
                (target.label as u8).to_string(),
                (target.usable as u8).to_string(),
                fnum(prob),
                (signal as u8).to_string(),
            ]);
        }
    }
    csv_table(
        &["method", "country", "quarter", "label", "usable", "prob", "signal"],
        &rows,
    )
}

pub fn summary_row(name: &str, s: &ResampleSummary) -> Vec<String> {
    vec![
        name.to_string(),
        fnum(s.mean),
        fnum(s.se),
        fnum(s.ci_lo),
        fnum(s.ci_hi),
        fnum(s.t_star),
    ]
}

/// A significance matrix as CSV, cells in {>, <, ·}.
pub fn matrix_csv(matrix: &SignificanceMatrix) -> String {
    let mut header: Vec<&str> = vec!["method"];
    for n in &matrix.names {
        header.push(n);
    }
    let rows: Vec<Vec<String>> = matrix
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = vec![name.clone()];
            row.extend(matrix.cells[i].iter().map(|c| c.symbol().to_string()));
            row
        })
        .collect();
    csv_table(&header, &rows)
}

/// Fixed-width text rendering of a CSV table for terminal reports.
pub fn pretty_table(csv_text: &str) -> String {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let rows: Vec<Vec<String>> = reader
        .records()
        .filter_map(|r| r.ok())
        .map(|r| r.iter().map(trim_cell).collect())
        .collect();
    if rows.is_empty() {
        return String::new();
    }
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in &rows {
        for (c, cell) in row.iter().enumerate() {
            widths[c] = widths[c].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            for _ in cell.chars().count()..widths[c] {
                line.push(' ');
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Shortens long float cells for display.
fn trim_cell(field: &str) -> String {
    match field.parse::<f64>() {
        Ok(v) if field.contains('.') => format!("{v:.4}"),
        _ => field.to_string(),
    }
}
