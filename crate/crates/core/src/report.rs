//! Deterministic CSV helpers.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! identical inputs produce byte-identical files.

use std::fmt::Write as _;

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

/// Minimal CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn extend(&mut self, other: CsvTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}
