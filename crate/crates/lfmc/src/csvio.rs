//! Small CSV writing helpers.
//!
//! All result files are plain CSV written through these helpers so that a
//! rerun with the same seed produces byte-identical output. Floats use
//! Rust's shortest round-trip formatting, which is deterministic.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::Result;

/// A CSV table under construction: one header row, then data rows.
#[derive(Debug, Clone)]
pub struct CsvTable {
    buf: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    /// Append a row of already-formatted cells.
    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    /// Append a row of floats.
    pub fn row_f64(&mut self, cells: &[f64]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        for (i, v) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{}", fmt_f64(*v));
        }
        self.buf.push('\n');
    }

    pub fn contents(&self) -> &str {
        &self.buf
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.buf)?;
        Ok(())
    }
}

/// Deterministic float cell format: shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Avoid the "-0" cell; it carries no information and depends on
        // the sign of rounding noise.
        "0".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_round_trip() {
        for &v in &[1.0, -2.5, 0.1, 1e-12, 123456.789, std::f64::consts::PI] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn negative_zero_normalized() {
        assert_eq!(fmt_f64(-0.0), "0");
    }
}
