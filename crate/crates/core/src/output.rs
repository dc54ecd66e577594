//! Tabular export for experiment data.
//!
//! Floats are written with 17 significant digits so CSV values round-trip
//! exactly. A CSV file at `path` is accompanied by `path.meta.json`.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(i) => Value::from(*i),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(","));
        s.push_str("\r\n");
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = write!(s, "{}\r\n", line.join(","));
        }
        s
    }

    /// Column-major JSON: `{"name": [values...], ...}` in header order.
    pub fn columns_json(&self) -> Value {
        let mut cols = serde_json::Map::new();
        for (j, h) in self.header.iter().enumerate() {
            cols.insert(h.clone(), Value::Array(self.rows.iter().map(|r| r[j].json()).collect()));
        }
        Value::Object(cols)
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Provenance attached to every data file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub figure: String,
    pub convention: Option<String>,
    pub convention_note: Option<String>,
    pub seed: Option<u64>,
    pub scheme: Option<String>,
    pub version: String,
    pub columns: Vec<String>,
    pub parameters: Value,
}

impl Metadata {
    pub fn new(figure: &str, parameters: Value) -> Self {
        Self {
            figure: figure.to_string(),
            convention: None,
            convention_note: None,
            seed: None,
            scheme: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            columns: Vec::new(),
            parameters,
        }
    }
}

#[derive(Serialize)]
struct Document<'a> {
    metadata: &'a Metadata,
    data: Value,
}

pub fn json_document(meta: &Metadata, table: &Table) -> String {
    let mut s = serde_json::to_string_pretty(&Document { metadata: meta, data: table.columns_json() })
        .expect("document serializes");
    s.push('\n');
    s
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Write `table` to `path` (CSV plus sidecar, or one JSON document), or to
/// stdout when no path is given. Errors carry the offending path.
pub fn write_table(
    table: &Table,
    meta: &Metadata,
    format: Format,
    path: Option<&Path>,
) -> Result<(), (PathBuf, io::Error)> {
    let mut meta = meta.clone();
    meta.columns = table.header.clone();
    let body = match format {
        Format::Csv => table.to_csv(),
        Format::Json => json_document(&meta, table),
    };
    match path {
        None => {
            use io::Write;
            io::stdout().write_all(body.as_bytes()).map_err(|e| (PathBuf::from("<stdout>"), e))
        }
        Some(p) => {
            std::fs::write(p, body).map_err(|e| (p.to_path_buf(), e))?;
            if format == Format::Csv {
                let side = sidecar_path(p);
                let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
                text.push('\n');
                std::fs::write(&side, text).map_err(|e| (side, e))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        let mut t = Table::new(["x", "id", "y"]);
        let x = 0.1 + 0.2;
        t.push(vec![x.into(), 3usize.into(), None.into()]);
        let csv = t.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), x);
        assert_eq!(fields[1], "3");
        assert_eq!(fields[2], "");
        assert!(csv.starts_with("x,id,y\r\n"));
    }

    #[test]
    fn header_fields_are_quoted_when_needed() {
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn json_columns_keep_header_order_and_nulls() {
        let mut t = Table::new(["b", "a"]);
        t.push(vec![1.5.into(), Cell::Empty]);
        let doc = json_document(&Metadata::new("bell", Value::Null), &t);
        let v: Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["data"]["b"][0], 1.5);
        assert!(v["data"]["a"][0].is_null());
        assert!(doc.find("\"metadata\"").unwrap() < doc.find("\"data\"").unwrap());
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("out/run.csv")), PathBuf::from("out/run.csv.meta.json"));
    }
}
