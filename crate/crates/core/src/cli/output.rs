use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Format;
use crate::error::{Error, Result};

/// One table of results. Every row carries a status; non-finite values only
/// appear in rows whose status is not `ok`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub values: Vec<f64>,
    pub status: String,
}

impl Row {
    pub fn ok(values: Vec<f64>) -> Self {
        Self { values, status: "ok".into() }
    }

    pub fn failed(width: usize, status: impl Into<String>) -> Self {
        Self { values: vec![f64::NAN; width], status: status.into() }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.values.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// Rows whose non-finite values lack a failure status.
    fn check(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.values.len() != self.columns.len() {
                return Err(Error::SolverFailure(format!("{}: row {i} has wrong width", self.name)));
            }
            if r.is_ok() && r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverFailure(format!(
                    "{}: row {i} holds a non-finite value without a failure flag",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.columns.clone();
        header.push("status".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.values.iter().map(|v| format_value(*v)).collect();
            rec.push(r.status.clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ASCII output"))
    }

    pub fn write(&self, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for f in formats {
            let (path, text) = match f {
                Format::Csv => (dir.join(format!("{}.csv", self.name)), self.to_csv()?),
                Format::Json => {
                    self.check()?;
                    (dir.join(format!("{}.json", self.name)), serde_json::to_string_pretty(&JsonTable::from(self))?)
                }
            };
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Nine significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        "nan".into()
    }
}

#[derive(Serialize)]
struct JsonTable<'a> {
    name: &'a str,
    columns: &'a [String],
    rows: Vec<JsonRow<'a>>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    values: Vec<Option<f64>>,
    status: &'a str,
}

impl<'a> From<&'a Dataset> for JsonTable<'a> {
    fn from(d: &'a Dataset) -> Self {
        Self {
            name: &d.name,
            columns: &d.columns,
            rows: d
                .rows
                .iter()
                .map(|r| JsonRow {
                    values: r.values.iter().map(|v| v.is_finite().then_some(*v)).collect(),
                    status: &r.status,
                })
                .collect(),
        }
    }
}
