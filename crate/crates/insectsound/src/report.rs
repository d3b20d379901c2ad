//! Evaluation report files and the provenance block attached to outputs.

use std::path::Path;

use insectsound_core::evaluation::ExperimentReport;
use serde::Serialize;

use crate::error::{csv_err, io, Result};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings and tool identity written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            command,
            config,
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

/// Long-form accuracy table; failed cells leave `accuracy` empty.
pub fn write_report_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["model", "k", "i", "augmented", "fold", "accuracy"])
        .map_err(csv_err(path))?;
    for c in &report.cells {
        w.write_record([
            c.key.model.to_string(),
            c.key.top_k.to_string(),
            c.key.balanced_i.to_string(),
            c.key.augmented.to_string(),
            c.key.fold.to_string(),
            c.accuracy().map(|a| a.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

#[derive(Serialize)]
pub struct FullReport<'a, C: Serialize> {
    #[serde(flatten)]
    pub provenance: Provenance<'a, C>,
    pub failed_cells: usize,
    pub report: &'a ExperimentReport,
}
