//! Number formatting and tabular output (CSV or line-delimited JSON).

use std::io::Write;

use serde_json::{Map, Value};

use crate::error::CliError;

/// Significant digits of every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Scientific notation with [`SIGNIFICANT_DIGITS`] digits, e.g. `1.02469951190e-1`.
pub fn fmt_num(x: f64) -> String {
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
}

/// `x` rounded to the printed precision.
pub fn round_sig(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(round_sig(*x))
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json_lines<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        for row in &self.rows {
            let obj: Map<String, Value> = self
                .header
                .iter()
                .zip(row)
                .map(|(k, v)| (k.to_string(), v.to_json()))
                .collect();
            serde_json::to_writer(&mut out, &obj).map_err(CliError::io)?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W, json: bool) -> Result<(), CliError> {
        if json {
            self.write_json_lines(out)
        } else {
            self.write_csv(out)
        }
    }
}
