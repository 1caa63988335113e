//! `results.json` records and CSV tables.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use mploc_core::schedule::content_hash;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;

pub const SCHEMA_ID: &str = "mploc.results.v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    AssertionFailed,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::AssertionFailed | Status::Violation => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub subcommand: String,
    pub config_hash: String,
    pub schedule_hash: String,
    pub version: String,
    /// Hash of the payload; equal payloads give equal content versions.
    pub content_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub master_seed: u64,
    pub status: Status,
    pub truncated: bool,
    pub config: ExperimentConfig,
    pub payload: Value,
}

/// A flat table written as `<name>.csv`.
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<const K: usize>(name: &'static str, header: [&'static str; K]) -> Self {
        Table { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// What a subcommand hands back for persistence.
pub struct Outcome {
    pub schedule_hash: String,
    pub status: Status,
    pub truncated: bool,
    pub payload: Value,
    pub tables: Vec<Table>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes `results.json` and the CSV tables into `<out>/<subcommand>-<config hash>/`.
pub fn persist(
    out: &Path,
    subcommand: &str,
    config: &ExperimentConfig,
    started: DateTime<Utc>,
    outcome: &Outcome,
) -> Result<(PathBuf, RunRecord)> {
    let config_hash = config.hash();
    let dir = out.join(format!("{subcommand}-{config_hash}"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let record = RunRecord {
        schema: SCHEMA_ID.to_string(),
        subcommand: subcommand.to_string(),
        config_hash,
        schedule_hash: outcome.schedule_hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        content_version: content_hash(&serde_json::to_vec(&outcome.payload)?),
        started_at: timestamp(started),
        finished_at: timestamp(Utc::now()),
        master_seed: config.master_seed,
        status: outcome.status,
        truncated: outcome.truncated,
        config: config.clone(),
        payload: outcome.payload.clone(),
    };
    let json = serde_json::to_string_pretty(&record)?;
    std::fs::write(dir.join("results.json"), json + "\n")?;
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok((dir, record))
}
