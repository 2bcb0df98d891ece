//! JSON summaries and per-trial CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rendezvous_core::analysis::StatsReport;
use serde::{Deserialize, Serialize};

use crate::experiment::Outcome;
use crate::scenario::Scenario;
use crate::CliError;

/// Mode-specific figures reported next to the statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extras {
    /// `18 (log2(δ/τ) + 1)` for τ-bounded two-robot runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_repeat_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modal_repeat_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straddle_checked: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straddle_violations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_distance_looks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_disagreements: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_entity_trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unresolved_ties: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_collinear_reductions: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub farthest_pair_changes: Option<u64>,
    /// Histogram of tie-breaking rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_rounds: Option<BTreeMap<u64, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub stats: StatsReport,
    pub extras: Extras,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

pub fn report_json(report: &Report) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<Report, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
}

pub const TRIALS_HEADER: [&str; 6] = ["trial", "gathered", "total_looks", "phases", "attempts", "first_gather_time"];

/// One row per trial.
pub fn trials_csv(outcome: &Outcome) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(TRIALS_HEADER).map_err(err)?;
    for r in &outcome.records {
        let s = &r.summary;
        w.write_record([
            r.trial.to_string(),
            u8::from(s.gathered).to_string(),
            s.total_looks.to_string(),
            s.phase_looks.len().to_string(),
            s.completed_attempts.to_string(),
            s.gather_time.as_ref().map(|t| t.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    finish(w)
}

/// Every configuration of every multi-robot trial, one entity per row.
pub fn rounds_csv(outcome: &Outcome) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &outcome.rounds {
        w.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Writes `report.json`, `trials.csv`, `rounds.csv` (multi-robot runs) and
/// `traces/trial_NNNNNN.json` into `dir`. Returns the paths written.
pub fn emit_report(outcome: &Outcome, dir: &Path, format: Format) -> Result<Vec<String>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Runtime(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: &str, text: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path.display().to_string());
        Ok(())
    };
    if matches!(format, Format::Json | Format::Both) {
        write("report.json", &report_json(&outcome.report)?)?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        write("trials.csv", &trials_csv(outcome)?)?;
        if !outcome.rounds.is_empty() {
            write("rounds.csv", &rounds_csv(outcome)?)?;
        }
    }
    if !outcome.traces.is_empty() {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir).map_err(|e| io(&tdir, e))?;
        for (trial, text) in &outcome.traces {
            write(&format!("traces/trial_{trial:06}.json"), text)?;
        }
    }
    Ok(written)
}
