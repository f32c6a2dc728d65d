//! JSON reports and CSV tables.

use std::path::{Path, PathBuf};

use lattice_pdo::regression::Check;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// A CSV table built row by row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(lattice_pdo::Error::from)?;
        w.write_record(&self.header)
            .map_err(lattice_pdo::Error::from)?;
        for r in &self.rows {
            w.write_record(r).map_err(lattice_pdo::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What a subcommand produced before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Gating checks; the exit status depends on these only.
    pub verdicts: Vec<Check>,
    /// Reported but not gating (e.g. when a hypothesis is not met).
    pub exploratory: Vec<Check>,
    pub notes: Vec<String>,
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: &'a str,
    pub passed: bool,
    pub config: &'a ExperimentConfig,
    pub verdicts: &'a [Check],
    pub exploratory: &'a [Check],
    pub notes: &'a [String],
    pub results: &'a serde_json::Value,
    pub tables: Vec<String>,
    pub elapsed_seconds: f64,
}

/// Write `<dir>/<command>.json` and one CSV per table; returns the report path.
pub fn write(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    outcome: &Outcome,
    elapsed_seconds: f64,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut tables = Vec::new();
    for t in &outcome.tables {
        let file = format!("{command}_{}.csv", t.name);
        t.write(&dir.join(&file))?;
        tables.push(file);
    }
    let report = Report {
        command,
        passed: outcome.passed(),
        config,
        verdicts: &outcome.verdicts,
        exploratory: &outcome.exploratory,
        notes: &outcome.notes,
        results: &outcome.results,
        tables,
        elapsed_seconds,
    };
    let path = dir.join(format!("{command}.json"));
    let text = serde_json::to_string_pretty(&report).map_err(lattice_pdo::Error::from)?;
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Float formatting shared by every table.
pub fn f(v: f64) -> String {
    format!("{v:.12e}")
}
