//! CSV tables with a `#` metadata line above the header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! same scenario and flags always give byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::CliError;

pub const ATTACK_HEADER: [&str; 8] = ["benchmark", "tau", "P", "delta", "Delta_mass", "cost", "achieved", "symmetric_final"];
pub const VERIFY_HEADER: [&str; 7] =
    ["prop_id", "scenario_id", "closed_form_cost", "oracle_cost", "abs_gap", "symmetry_pass", "status"];
pub const EVALUATE_HEADER: [&str; 2] = ["benchmark", "value"];
pub const SWEEP_HEADER: [&str; 4] = ["tau", "delta", "Delta_mass", "cost"];
pub const COMPARE_HEADER: [&str; 5] = ["P", "rank", "benchmark", "tau", "cost"];
pub const HETERO_HEADER: [&str; 6] = ["i", "mu", "median", "w", "delta", "cost"];

/// Formats a float; missing values are written as an empty field.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Metadata lines without the leading `#`.
    pub meta: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: impl Into<String>, header: &[&str]) -> Self {
        Table { meta: vec![meta.into()], header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for m in &self.meta {
            writeln!(out, "# {m}").expect("writing to memory");
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, self.to_bytes()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Table, CliError> {
        let meta = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(io_err)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(io_err)?.iter().map(String::from).collect());
        }
        Ok(Table { meta, header, rows })
    }

    pub fn read(path: &Path) -> Result<Table, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Table::parse(&text)
    }
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut t = Table::new("manipcost attack scenario=x", &ATTACK_HEADER);
        t.push(vec!["trimmed_mean(0.1)".into(), num(0.1), num(1.0), num(1.2360679774997896), num(0.5), num(2.636), num(1.0), "true".into()]);
        t.push(vec!["median".into(), String::new(), num(0.3), num(f64::NAN), num(0.255), num(0.51), num(0.3), "true".into()]);
        let back = Table::parse(std::str::from_utf8(&t.to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows[0][3].parse::<f64>().unwrap(), 1.2360679774997896);
    }

    #[test]
    fn metadata_line_comes_first() {
        let t = Table::new("meta", &EVALUATE_HEADER);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "# meta\nbenchmark,value\n");
    }
}
