//! CSV ingestion for panels and crisis event lists.
//!
//! Panel format: one row per (country, quarter) with a header of
//! `country,quarter,<indicator>...`; missing values are empty cells or the
//! literals `NA`/`NaN` (any case). Events format: `country,start,end` with
//! quarters written like `2008Q1`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{CountryBlock, CrisisEvent, Indicator, IndicatorKind, RawPanel};
use crate::quarter::Quarter;

fn parse_cell(raw: &str, line: u64) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Csv(format!("line {line}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("line {line}: non-finite value {s:?}")));
    }
    Ok(Some(v))
}

/// Reads a quarterly panel. All indicators start as accounting-based; use
/// [`RawPanel::set_indicator_kind`] to reclassify market-based columns.
pub fn read_panel<R: Read>(reader: R) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 {
        return Err(Error::Csv(
            "panel header needs country, quarter and at least one indicator".to_string(),
        ));
    }
    for (pos, expected) in [(0, "country"), (1, "quarter")] {
        if !headers[pos].eq_ignore_ascii_case(expected) {
            return Err(Error::Csv(format!(
                "panel column {} must be {expected:?}, got {:?}",
                pos + 1,
                &headers[pos]
            )));
        }
    }
    let indicators: Vec<Indicator> = headers
        .iter()
        .skip(2)
        .map(|name| Indicator {
            name: name.to_string(),
            kind: IndicatorKind::Accounting,
        })
        .collect();

    let mut rows: BTreeMap<String, Vec<(Quarter, Vec<Option<f64>>)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "line {line}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let country = record[0].to_string();
        let quarter: Quarter = record[1]
            .parse()
            .map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        let values: Vec<Option<f64>> = record
            .iter()
            .skip(2)
            .map(|cell| parse_cell(cell, line))
            .collect::<Result<_>>()?;
        let entry = rows.entry(country.clone()).or_default();
        if let Some((last, _)) = entry.last() {
            if quarter <= *last {
                return Err(Error::Csv(format!(
                    "line {line}: quarters of {country} must be strictly increasing \
                     ({quarter} after {last})"
                )));
            }
        }
        entry.push((quarter, values));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("panel csv"));
    }

    let mut countries = Vec::with_capacity(rows.len());
    let mut blocks = Vec::with_capacity(rows.len());
    for (country, entries) in rows {
        let start = entries.first().expect("entries non-empty").0;
        let end = entries.last().expect("entries non-empty").0;
        let span = (end.quarters_since(start) + 1) as usize;
        let mut values = vec![vec![None; span]; indicators.len()];
        for (quarter, row) in entries {
            let t = quarter.quarters_since(start) as usize;
            for (g, v) in row.into_iter().enumerate() {
                values[g][t] = v;
            }
        }
        countries.push(country);
        blocks.push(CountryBlock { start, values });
    }
    RawPanel::from_parts(indicators, countries, blocks)
}

/// Reads a crisis event list in `country,start,end` format.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<CrisisEvent>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 {
        return Err(Error::Csv(
            "events header must be country,start,end".to_string(),
        ));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let start: Quarter = record[1]
            .parse()
            .map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        let end: Quarter = record[2]
            .parse()
            .map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        events.push(
            CrisisEvent::new(record[0].to_string(), start, end)
                .map_err(|e| Error::Csv(format!("line {line}: {e}")))?,
        );
    }
    Ok(events)
}

pub fn read_panel_path(path: impl AsRef<Path>) -> Result<RawPanel> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Csv(format!("{}: {e}", path.as_ref().display())))?;
    read_panel(file)
}

pub fn read_events_path(path: impl AsRef<Path>) -> Result<Vec<CrisisEvent>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Csv(format!("{}: {e}", path.as_ref().display())))?;
    read_events(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_panel_with_gaps_and_missing_cells() {
        let csv = "country,quarter,credit,gdp\n\
                   SE,2000Q1,1.0,10\n\
                   SE,2000Q2,,11\n\
                   SE,2000Q4,3.0,NA\n\
                   FI,1999Q4,5.5,20\n";
        let panel = read_panel(csv.as_bytes()).unwrap();
        assert_eq!(panel.countries(), &["FI".to_string(), "SE".to_string()]);
        let se = &panel.blocks()[1];
        assert_eq!(se.start, Quarter::new(2000, 1).unwrap());
        assert_eq!(se.len(), 4);
        assert_eq!(se.values[0], vec![Some(1.0), None, None, Some(3.0)]);
        assert_eq!(se.values[1], vec![Some(10.0), Some(11.0), None, None]);
        let fi = &panel.blocks()[0];
        assert_eq!(fi.len(), 1);
        assert_eq!(fi.values[0], vec![Some(5.5)]);
    }

    #[test]
    fn rejects_unordered_quarters_and_bad_values() {
        let unordered = "country,quarter,x\nSE,2000Q2,1\nSE,2000Q1,2\n";
        assert!(read_panel(unordered.as_bytes()).is_err());
        let duplicate = "country,quarter,x\nSE,2000Q2,1\nSE,2000Q2,2\n";
        assert!(read_panel(duplicate.as_bytes()).is_err());
        let garbage = "country,quarter,x\nSE,2000Q2,abc\n";
        assert!(read_panel(garbage.as_bytes()).is_err());
        let inf = "country,quarter,x\nSE,2000Q2,inf\n";
        assert!(read_panel(inf.as_bytes()).is_err());
    }

    #[test]
    fn rejects_wrong_header() {
        let csv = "iso,quarter,x\nSE,2000Q1,1\n";
        assert!(read_panel(csv.as_bytes()).is_err());
    }

    #[test]
    fn reads_events() {
        let csv = "country,start,end\nSE,1991Q3,1993Q4\nFI,1991Q3,1994Q1\n";
        let events = read_events(csv.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].country, "SE");
        assert_eq!(events[0].start, Quarter::new(1991, 3).unwrap());
        let bad = "country,start,end\nSE,1993Q4,1991Q3\n";
        assert!(read_events(bad.as_bytes()).is_err());
    }
}
