//! Self-describing reports.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        let now = unix_ms();
        Self {
            command: command.to_owned(),
            config,
            seeds,
            tool_version: TOOL_VERSION.to_owned(),
            started_unix_ms: now,
            finished_unix_ms: now,
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished_unix_ms = unix_ms();
        self
    }
}

/// A result with the manifest of the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    pub result: T,
}
