//! CSV ingestion and emission of panels and crisis calendars.
//!
//! Panel format: header `country,quarter,<indicator>[,<indicator>...]`
//! where an indicator header is `name` or `name:market` / `name:accounting`
//! (bare names default to market). One row per (country, quarter), empty
//! cells for missing values. Rows may arrive in any order; interior quarter
//! gaps become missing rows. The events file has header
//! `country,start,end` with quarters like `2008Q3`.

use std::collections::BTreeMap;
use std::path::Path;

use ews_core::panel::{CountryBlock, CrisisEvent, Indicator, IndicatorKind, RawPanel};
use ews_core::quarter::Quarter;

use crate::error::{CliError, Result};

fn parse_indicator_header(field: &str) -> Result<Indicator> {
    let (name, kind) = match field.split_once(':') {
        None => (field, IndicatorKind::Market),
        Some((name, "market")) => (name, IndicatorKind::Market),
        Some((name, "accounting")) => (name, IndicatorKind::Accounting),
        Some((_, kind)) => {
            return Err(CliError::data(format!(
                "indicator header kind must be market or accounting, got {kind:?}"
            )))
        }
    };
    if name.is_empty() {
        return Err(CliError::data("empty indicator name in panel header"));
    }
    Ok(Indicator { name: name.to_string(), kind })
}

fn header_name(ind: &Indicator) -> String {
    let kind = match ind.kind {
        IndicatorKind::Market => "market",
        IndicatorKind::Accounting => "accounting",
    };
    format!("{}:{kind}", ind.name)
}

/// Reads a raw panel from CSV. Malformed rows report their line number.
pub fn read_panel(path: &Path) -> Result<RawPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "country" || &headers[1] != "quarter" {
        return Err(CliError::data(format!(
            "{}: header must start with country,quarter and at least one indicator",
            path.display()
        )));
    }
    let indicators: Vec<Indicator> = headers
        .iter()
        .skip(2)
        .map(parse_indicator_header)
        .collect::<Result<_>>()?;

    // country -> quarter -> values, sorted for deterministic block order.
    let mut rows: BTreeMap<String, BTreeMap<Quarter, Vec<Option<f64>>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        let context = |msg: String| {
            CliError::data(format!("{}: line {line}: {msg}", path.display()))
        };
        if record.len() != headers.len() {
            return Err(context(format!(
                "expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let country = record[0].to_string();
        if country.is_empty() {
            return Err(context("empty country".into()));
        }
        let quarter: Quarter = record[1]
            .parse()
            .map_err(|e| context(format!("{e}")))?;
        let mut values = Vec::with_capacity(indicators.len());
        for (k, field) in record.iter().skip(2).enumerate() {
            if field.is_empty() {
                values.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    context(format!(
                        "indicator {} is not a number: {field:?}",
                        indicators[k].name
                    ))
                })?;
                values.push(Some(v));
            }
        }
        if rows.entry(country.clone()).or_default().insert(quarter, values).is_some() {
            return Err(context(format!("duplicate observation {country} {quarter}")));
        }
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no observations", path.display())));
    }

    let mut countries = Vec::new();
    let mut blocks = Vec::new();
    for (country, by_quarter) in rows {
        let first = *by_quarter.keys().next().expect("nonempty");
        let last = *by_quarter.keys().next_back().expect("nonempty");
        let len = (last.quarters_since(first) + 1) as usize;
        let mut values = vec![vec![None; len]; indicators.len()];
        for (q, vals) in by_quarter {
            let t = q.quarters_since(first) as usize;
            for (g, v) in vals.into_iter().enumerate() {
                values[g][t] = v;
            }
        }
        countries.push(country);
        blocks.push(CountryBlock { start: first, values });
    }
    Ok(RawPanel::from_parts(indicators, countries, blocks)?)
}

/// Reads the crisis calendar from CSV.
pub fn read_events(path: &Path) -> Result<Vec<CrisisEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    let expected = ["country", "start", "end"];
    if headers.iter().ne(expected) {
        return Err(CliError::data(format!(
            "{}: header must be country,start,end",
            path.display()
        )));
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        let context =
            |msg: String| CliError::data(format!("{}: line {line}: {msg}", path.display()));
        let start: Quarter = record[1].parse().map_err(|e| context(format!("{e}")))?;
        let end: Quarter = record[2].parse().map_err(|e| context(format!("{e}")))?;
        let ev = CrisisEvent::new(record[0].to_string(), start, end)
            .map_err(|e| context(e.to_string()))?;
        events.push(ev);
    }
    Ok(events)
}

/// Writes a panel in the format `read_panel` accepts.
pub fn write_panel(path: &Path, panel: &RawPanel) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["country".to_string(), "quarter".to_string()];
    header.extend(panel.indicators().iter().map(header_name));
    writer
        .write_record(&header)
        .map_err(|e| CliError::data(e.to_string()))?;
    for (country, block) in panel.countries().iter().zip(panel.blocks()) {
        for t in 0..block.len() {
            let mut row = vec![country.clone(), block.quarter_at(t).to_string()];
            for series in &block.values {
                row.push(series[t].map(|v| v.to_string()).unwrap_or_default());
            }
            writer
                .write_record(&row)
                .map_err(|e| CliError::data(e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes the crisis calendar in the format `read_events` accepts.
pub fn write_events(path: &Path, events: &[CrisisEvent]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["country", "start", "end"])
        .map_err(|e| CliError::data(e.to_string()))?;
    for ev in events {
        writer
            .write_record([&ev.country, &ev.start.to_string(), &ev.end.to_string()])
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
