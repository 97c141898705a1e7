//! File formats.
//!
//! * CSV for curves and tables. The header names every column and its unit;
//!   numbers use the shortest representation that parses back to the same
//!   `f64`, so a write/read cycle is bit-exact.
//! * JSON for reports, wrapped in an envelope carrying `schema_version`.
//! * Plain-text matrices for Wigner grids: the first line holds the column
//!   count followed by the q axis, every further line a p value followed by
//!   W(q, p) along that row.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::correlations::{CorrelationCurve, CorrelationKind};
use crate::error::{Error, Result};
use crate::metrics::WignerGrid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    data: T,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn render_json<T: Serialize>(kind: &str, data: &T) -> String {
    let env = Envelope { schema_version: SCHEMA_VERSION, kind: kind.to_string(), data };
    serde_json::to_string_pretty(&env).expect("report types always serialize") + "\n"
}

/// Parses an envelope, checking its version and kind.
pub fn parse_json<T: DeserializeOwned>(text: &str, kind: &str, origin: &Path) -> Result<T> {
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(origin, format!("unsupported schema_version {}", env.schema_version)));
    }
    if env.kind != kind {
        return Err(Error::parse(origin, format!("expected '{kind}' document, found '{}'", env.kind)));
    }
    Ok(env.data)
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, data: &T) -> Result<()> {
    write_text(path, &render_json(kind, data))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    parse_json(&read_text(path)?, kind, path)
}

fn kind_name(k: CorrelationKind) -> &'static str {
    match k {
        CorrelationKind::VV => "VV",
        CorrelationKind::VH => "VH",
        CorrelationKind::HH => "HH",
    }
}

/// Column header of a curve's value column, e.g. `g2_HH_convolved`.
pub fn curve_value_header(c: &CorrelationCurve) -> String {
    let suffix = if c.convolved { "_convolved" } else { "" };
    format!("g2_{}{}", kind_name(c.kind), suffix)
}

pub fn render_table_csv(headers: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Header names and numeric rows of a CSV table.
pub fn parse_table_csv(text: &str, origin: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(origin, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(origin, e))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(origin, format!("row {}: bad number '{f}'", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((headers, rows))
}

pub fn render_curve_csv(c: &CorrelationCurve) -> String {
    let header = curve_value_header(c);
    let rows: Vec<Vec<f64>> = c.taus.iter().zip(&c.values).map(|(&t, &v)| vec![t, v]).collect();
    render_table_csv(&["tau_ns", &header], &rows)
}

pub fn parse_curve_csv(text: &str, origin: &Path) -> Result<CorrelationCurve> {
    let (headers, rows) = parse_table_csv(text, origin)?;
    if headers.len() != 2 || headers[0] != "tau_ns" {
        return Err(Error::parse(origin, "curve files need columns tau_ns,g2_<kind>"));
    }
    let spec = headers[1]
        .strip_prefix("g2_")
        .ok_or_else(|| Error::parse(origin, format!("bad value column '{}'", headers[1])))?;
    let (kind, convolved) = match spec.strip_suffix("_convolved") {
        Some(k) => (k, true),
        None => (spec, false),
    };
    let kind: CorrelationKind = kind.parse().map_err(|e| Error::parse(origin, e))?;
    let taus = rows.iter().map(|r| r[0]).collect();
    let values = rows.iter().map(|r| r[1]).collect();
    let mut c = CorrelationCurve::new(taus, values, kind).map_err(|e| Error::parse(origin, e))?;
    c.convolved = convolved;
    Ok(c)
}

pub fn render_wigner(g: &WignerGrid) -> String {
    let mut out = String::new();
    write!(out, "{}", g.q.len()).unwrap();
    for q in &g.q {
        write!(out, " {q}").unwrap();
    }
    out.push('\n');
    for (p, row) in g.p.iter().zip(&g.values) {
        write!(out, "{p}").unwrap();
        for w in row {
            write!(out, " {w}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_wigner(text: &str, origin: &Path) -> Result<WignerGrid> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let nums = |line: &str| -> Result<Vec<f64>> {
        line.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(origin, format!("bad number '{t}'"))))
            .collect()
    };
    let head = nums(lines.next().ok_or_else(|| Error::parse(origin, "empty Wigner file"))?)?;
    let nq = head[0] as usize;
    if head.len() != nq + 1 {
        return Err(Error::parse(origin, "q axis length does not match its count"));
    }
    let q = head[1..].to_vec();
    let mut p = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let row = nums(line)?;
        if row.len() != nq + 1 {
            return Err(Error::parse(origin, format!("row has {} values, expected {}", row.len() - 1, nq)));
        }
        p.push(row[0]);
        values.push(row[1..].to_vec());
    }
    Ok(WignerGrid { q, p, values })
}
