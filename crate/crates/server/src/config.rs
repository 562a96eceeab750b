//! Server configuration: one TOML file, then `LABELCOMMONS_*` environment
//! overrides.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! storage = "data/journal.jsonl"   # omit for a volatile in-memory store
//! sync = true                      # fsync every journal append
//!
//! [adapter]
//! kind = "static"                  # "none" or "static"
//! content = "content.json"         # static: {"<external_ref>": "<snapshot>"}
//!
//! [thresholds]                     # defaults for new campaigns
//! disagreement = 0.5
//! low_confidence = 0.5
//!
//! [export]
//! pseudonymize = true
//! salt = "change me"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use labelcommons_core::metrics::QuadrantThresholds;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    #[default]
    None,
    Static,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    pub content: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub pseudonymize: bool,
    pub salt: String,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            pseudonymize: true,
            salt: "labelcommons".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub storage: Option<PathBuf>,
    pub sync: bool,
    pub adapter: AdapterConfig,
    pub thresholds: QuadrantThresholds,
    pub export: ExportConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            storage: None,
            sync: true,
            adapter: AdapterConfig::default(),
            thresholds: QuadrantThresholds::default(),
            export: ExportConfig::default(),
        }
    }
}

fn parse_bool(var: &str, value: &str) -> anyhow::Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => bail!("{var}: expected a boolean, got '{value}'"),
    }
}

fn parse_f64(var: &str, value: &str) -> anyhow::Result<f64> {
    value
        .parse()
        .with_context(|| format!("{var}: expected a number, got '{value}'"))
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` (defaults when `None`), then applies overrides from
    /// `env`, then validates.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        config.apply_env(env)?;
        config.thresholds.validate()?;
        if config.adapter.kind == AdapterKind::Static && config.adapter.content.is_none() {
            bail!("the static adapter needs adapter.content");
        }
        Ok(config)
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(v) = env("LABELCOMMONS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = env("LABELCOMMONS_STORAGE") {
            self.storage = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        if let Some(v) = env("LABELCOMMONS_SYNC") {
            self.sync = parse_bool("LABELCOMMONS_SYNC", &v)?;
        }
        if let Some(v) = env("LABELCOMMONS_ADAPTER") {
            self.adapter.kind = match v.as_str() {
                "none" => AdapterKind::None,
                "static" => AdapterKind::Static,
                other => bail!("LABELCOMMONS_ADAPTER: unknown adapter '{other}'"),
            };
        }
        if let Some(v) = env("LABELCOMMONS_ADAPTER_CONTENT") {
            self.adapter.content = Some(PathBuf::from(v));
        }
        if let Some(v) = env("LABELCOMMONS_DISAGREEMENT_THRESHOLD") {
            self.thresholds.disagreement = parse_f64("LABELCOMMONS_DISAGREEMENT_THRESHOLD", &v)?;
        }
        if let Some(v) = env("LABELCOMMONS_LOW_CONFIDENCE_THRESHOLD") {
            self.thresholds.low_confidence =
                parse_f64("LABELCOMMONS_LOW_CONFIDENCE_THRESHOLD", &v)?;
        }
        if let Some(v) = env("LABELCOMMONS_EXPORT_PSEUDONYMIZE") {
            self.export.pseudonymize = parse_bool("LABELCOMMONS_EXPORT_PSEUDONYMIZE", &v)?;
        }
        if let Some(v) = env("LABELCOMMONS_EXPORT_SALT") {
            self.export.salt = v;
        }
        Ok(())
    }
}
