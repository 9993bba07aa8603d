//! File formats: numeric and categorical CSV, edge lists, versioned JSON.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::categorical::CategoricalTable;
use crate::error::{Error, Result};
use crate::forecast::TwoScaleSeries;

/// Version stamped into every JSON artifact.
pub const FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn records(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{} has no data rows", path.display())));
    }
    Ok(out)
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// A first row is a header when one of the fields meant to be numeric does
/// not parse as a number.
fn strip_header(mut rows: Vec<Vec<String>>, numeric_fields: impl Fn(&[String]) -> usize) -> Vec<Vec<String>> {
    let first = &rows[0];
    if first[..numeric_fields(first).min(first.len())].iter().any(|f| !is_number(f)) {
        rows.remove(0);
    }
    rows
}

fn parse_row(path: &Path, line: usize, fields: &[String]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::invalid(format!("{} row {line}: `{f}` is not a number", path.display())))
        })
        .collect()
}

/// Numeric CSV, one observation per row; an optional header row is skipped.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = strip_header(records(path)?, |r| r.len());
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} has no data rows", path.display())));
    }
    rows.iter().enumerate().map(|(i, r)| parse_row(path, i + 1, r)).collect()
}

/// First column of a numeric CSV.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    Ok(read_matrix_csv(path)?.into_iter().map(|r| r[0]).collect())
}

/// Categorical CSV whose header row names the variables.
pub fn read_categorical_csv(path: &Path) -> Result<CategoricalTable> {
    let mut rows = records(path)?;
    let header = rows.remove(0);
    CategoricalTable::from_labels(header, &rows)
}

/// One block per row: `H` values then the metadata label.
pub fn read_two_scale_csv(path: &Path) -> Result<TwoScaleSeries> {
    let rows = strip_header(records(path)?, |r| r.len().saturating_sub(1));
    let mut values = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() < 2 {
            return Err(Error::invalid(format!("{} row {}: need values and a label", path.display(), i + 1)));
        }
        values.push(parse_row(path, i + 1, &r[..r.len() - 1])?);
        labels.push(r[r.len() - 1].clone());
    }
    TwoScaleSeries::new(values, labels)
}

/// Non-empty lines, trimmed.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

/// Serializes `value` (a JSON object) with `formatVersion` and `artifact`
/// fields added.
pub fn versioned<T: Serialize>(artifact: &str, value: &T) -> Result<Value> {
    let mut obj = match serde_json::to_value(value)? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    obj.insert("formatVersion".into(), Value::from(FORMAT_VERSION));
    obj.insert("artifact".into(), Value::from(artifact));
    Ok(Value::Object(obj))
}

pub fn write_json<T: Serialize>(path: &Path, artifact: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&versioned(artifact, value)?)?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes a CSV with a header row; floats use the shortest round-trip form.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_text(&p, "x,y\n1,2\n3.5, -4\n").unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.5, -4.0]]);
        write_text(&p, "1,2\n# note\n\n3,4\n").unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        write_text(&p, "1,2\n3,oops\n").unwrap();
        assert!(read_matrix_csv(&p).unwrap_err().to_string().contains("oops"));
        assert!(matches!(read_matrix_csv(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn two_scale_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_text(&p, "h0,h1,day\n1,2,mon\n3,5,tue\n").unwrap();
        let s = read_two_scale_csv(&p).unwrap();
        assert_eq!(s.values(), &[vec![1.0, 2.0], vec![3.0, 5.0]]);
        assert_eq!(s.metadata(), &["mon".to_string(), "tue".to_string()]);
    }

    #[test]
    fn versioned_json_fields() {
        #[derive(Serialize)]
        struct A {
            x: u8,
        }
        let v = versioned("demo", &A { x: 3 }).unwrap();
        assert_eq!(v["formatVersion"], 1);
        assert_eq!(v["artifact"], "demo");
        assert_eq!(v["x"], 3);
    }
}
