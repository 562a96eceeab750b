//! Durable persistence and dataset interchange.
//!
//! * [`journal`]: the write-ahead event journal behind [`crate::Curation::open`].
//! * [`export`]: deterministic JSONL and CSV dataset exports.
//! * [`import`]: reading those exports back, plus [`import::ExternalMapping`]
//!   for third-party CSV datasets.

pub mod export;
pub mod import;
pub mod journal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use export::{ExportHeader, ExportOptions, ExportRecord, ExportedLabel};
pub use import::ExternalMapping;

/// Version written into export headers.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Jsonl => "application/x-ndjson",
            ExportFormat::Csv => "text/csv",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Jsonl => "jsonl",
            ExportFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected jsonl or csv)")),
        }
    }
}
