//! CSV and JSON emitters shared by the command-line tool.
//!
//! Reals are written with 17 significant digits in scientific notation, which
//! round-trips every `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `re+imi` / `re-imi`.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", format_real(z.re), format_real(z.im.abs()))
}

/// A cell in a result table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Real(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Column names plus rows, emitted in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::to_csv))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let object = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), v.to_json()))
                        .collect();
                    Value::Object(object)
                })
                .collect(),
        )
    }
}

/// `{"config": …, "results": …}`.
pub fn json_envelope<C: Serialize>(config: &C, results: Value) -> Result<Value> {
    Ok(serde_json::json!({ "config": serde_json::to_value(config)?, "results": results }))
}

/// Writes `table` to `path` (or stdout when `None`) in `format`; JSON wraps
/// it with `config`.
pub fn emit<C: Serialize>(table: &Table, config: &C, format: Format, path: Option<&Path>) -> Result<()> {
    let mut sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => table.write_csv(&mut sink)?,
        Format::Json => {
            let value = json_envelope(config, table.to_json())?;
            serde_json::to_writer_pretty(&mut sink, &value)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(format_real(2.5), "2.5000000000000000e0");
        assert_eq!(format_real(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_complex(Complex64::new(1.0, -0.5)), "1.0000000000000000e0-5.0000000000000000e-1i");
        assert_eq!(format_complex(Complex64::new(0.0, 0.0)), "0.0000000000000000e0+0.0000000000000000e0i");
    }

    #[test]
    fn csv_quoting_and_empty_tables() {
        let mut t = Table::new(&["word", "value"]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "word,value\n");
        t.push(vec!["a,b".into(), 1.0.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "word,value\n\"a,b\",1.0000000000000000e0\n");
    }

    #[test]
    fn json_round_trip() {
        let mut t = Table::new(&["N", "mc_mean", "selected"]);
        t.push(vec![4usize.into(), 2.4567.into(), true.into()]);
        let value = json_envelope(&serde_json::json!({"d": 2}), t.to_json()).unwrap();
        let text = serde_json::to_string(&value).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, value);
        assert_eq!(back["results"][0]["mc_mean"].as_f64(), Some(2.4567));
    }
}
