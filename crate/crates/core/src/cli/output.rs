//! CSV and JSON writers. Numbers in CSV files carry 17 significant digits so
//! they round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a provenance comment line, a header row and data rows.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(config_hash: &str, seed: u64, columns: &[&str]) -> Self {
        let mut text = format!("# config_hash={config_hash} seed={seed}\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let mut first = true;
        for cell in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            match cell {
                Cell::Int(v) => write!(self.text, "{v}").expect("writing to a String"),
                Cell::Float(v) => self.text.push_str(&fmt_f64(*v)),
            }
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub enum Cell {
    Int(i64),
    Float(f64),
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    fs::write(path, text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
