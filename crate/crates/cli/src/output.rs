use std::path::{Path, PathBuf};

use windfarm::marl::{write_atomic, Algo};

use crate::config::{scenario_label, Result};
use windfarm::env::ScenarioKind;

/// Directory of one training run.
pub fn run_dir(out: &Path, algo: Algo, scenario: ScenarioKind, seed: u64) -> PathBuf {
    out.join(format!("{algo}_{}_seed{seed}", scenario_label(scenario)).to_lowercase())
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_STEM: &str = "checkpoint";
pub const CONFIG_FILE: &str = "config.txt";

/// Stamp stored with every output so results can be traced to the code that made them.
pub fn version_stamp() -> String {
    format!("windfarm {}", env!("CARGO_PKG_VERSION"))
}

/// Builds a CSV in memory from a header and rows, then writes it atomically.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] back into header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}
