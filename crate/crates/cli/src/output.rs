//! CSV tables with a commented provenance header.

use crate::config::ExperimentConfig;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, columns: &[&'static str]) -> Self {
        Self { file: file.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.into_iter().map(|s| s.parse().ok()).collect()
    }

    pub fn write(&self, command: &str, cfg: &ExperimentConfig, w: impl Write) -> csv::Result<()> {
        let mut w = w;
        writeln!(w, "# schema_version: {SCHEMA_VERSION}")?;
        writeln!(w, "# command: {command}")?;
        writeln!(w, "# config_sha256: {}", cfg.hash())?;
        writeln!(
            w,
            "# tolerances: feas_tol={:e} max_newton={} energy_time_spread={} boundary_drift_tol={}",
            cfg.feas_tol, cfg.max_newton, cfg.energy_time_spread, cfg.boundary_drift_tol
        )?;
        writeln!(
            w,
            "# grid: seed={} batch={} repeats={} epsilons={:?} horizons={:?}",
            cfg.seed, cfg.batch, cfg.repeats, cfg.epsilons, cfg.horizons
        )?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(&self.columns)?;
        for r in &self.rows {
            cw.write_record(r)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn write_to_dir(&self, command: &str, cfg: &ExperimentConfig, dir: &Path) -> csv::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(&self.file);
        self.write(command, cfg, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        Ok(path)
    }
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_columns() {
        let mut t = Table::new("x.csv", &["T", "ratio"]);
        t.push(vec!["3".into(), num(0.5)]);
        let mut buf = Vec::new();
        t.write("size-ratio", &ExperimentConfig::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema_version: 1");
        assert!(lines[2].starts_with("# config_sha256: "));
        assert_eq!(lines[5], "T,ratio");
        assert_eq!(lines[6], "3,0.5");
        assert_eq!(t.column_f64("ratio").unwrap(), vec![0.5]);
    }
}
