//! Dataset export.
//!
//! JSONL: the first line is an [`ExportHeader`], then one [`ExportRecord`]
//! per included entity, ordered by `added_at` then entity id.
//!
//! CSV (RFC 4180, CRLF line ends): a mandatory header row
//!
//! ```text
//! external_ref,content_snapshot,added_at,n_labels,
//! primary:<dim>...,disagreement:<dim>...,low_conf_fraction:<dim>...,labels,meta:<header json>
//! ```
//!
//! The last header cell carries the [`ExportHeader`] as JSON after the
//! `meta:` prefix; that column is empty in data rows. The `labels` cell
//! holds one compact JSON [`ExportedLabel`] per label joined by `|`, with
//! any literal `|` inside the JSON written as the escape `|`.
//!
//! Identical state produces identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CurationError;
use crate::metrics::{dimension_stats, QuadrantThresholds};
use crate::model::{
    CampaignId, Choice, DimensionSpec, LabelValue, PrimaryValue, SectionText, Timestamp, UserId,
};
use crate::service::Curation;
use crate::state::{CampaignRecord, EntityRecord};
use crate::store::{ExportFormat, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub format_version: u32,
    pub name: String,
    pub schema: Vec<DimensionSpec>,
    pub datasheet: Vec<SectionText>,
    pub quadrant_thresholds: QuadrantThresholds,
    pub pseudonymized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedLabel {
    pub author: UserId,
    pub values: Vec<LabelValue>,
    pub note: Option<String>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub external_ref: String,
    pub content_snapshot: String,
    pub added_at: Timestamp,
    pub primary: Option<Vec<PrimaryValue>>,
    pub labels: Vec<ExportedLabel>,
    pub n_labels: usize,
    pub disagreement: BTreeMap<String, f64>,
    pub low_conf_fraction: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportOptions {
    /// When set, author ids are replaced by salted per-campaign pseudonyms.
    pub pseudonymize_salt: Option<String>,
}

impl ExportOptions {
    pub fn pseudonymized(salt: impl Into<String>) -> Self {
        Self {
            pseudonymize_salt: Some(salt.into()),
        }
    }
}

/// Stable pseudonym for `user` within the campaign named `campaign`.
pub fn pseudonym(salt: &str, campaign: &str, user: &UserId) -> UserId {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0]);
    h.update(campaign.as_bytes());
    h.update([0]);
    h.update(user.as_str().as_bytes());
    let digest = hex::encode(h.finalize());
    UserId(format!("u_{}", &digest[..16]))
}

pub(crate) fn header_of(c: &CampaignRecord, pseudonymized: bool) -> ExportHeader {
    ExportHeader {
        format_version: FORMAT_VERSION,
        name: c.name.clone(),
        schema: c.schema.specs(),
        datasheet: c.datasheet.current_texts(),
        quadrant_thresholds: c.thresholds,
        pseudonymized,
    }
}

fn record_of(
    c: &CampaignRecord,
    r: &EntityRecord,
    rename: &dyn Fn(&UserId) -> UserId,
) -> ExportRecord {
    let stats = dimension_stats(&c.schema, &r.labels, c.thresholds);
    let mut labels: Vec<ExportedLabel> = r
        .labels
        .iter()
        .map(|l| ExportedLabel {
            author: rename(&l.author),
            values: l.values.clone(),
            note: l.note.clone(),
            created_at: l.created_at,
            updated_at: l.updated_at,
        })
        .collect();
    labels.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then(a.author.cmp(&b.author))
    });
    ExportRecord {
        external_ref: r.entity.external_ref.clone(),
        content_snapshot: r.entity.content_snapshot.clone(),
        added_at: r.entity.added_at,
        primary: r.primary.as_ref().map(|p| p.values.clone()),
        n_labels: labels.len(),
        labels,
        disagreement: stats
            .iter()
            .map(|s| (s.dimension.clone(), s.disagreement))
            .collect(),
        low_conf_fraction: stats
            .iter()
            .map(|s| (s.dimension.clone(), s.low_conf_fraction))
            .collect(),
    }
}

/// Header and records for the included entities of a campaign.
pub(crate) fn snapshot(
    c: &CampaignRecord,
    options: &ExportOptions,
) -> (ExportHeader, Vec<ExportRecord>) {
    let salt = if c.authors_pseudonymized {
        None
    } else {
        options.pseudonymize_salt.as_deref()
    };
    let rename = |u: &UserId| match salt {
        Some(salt) => pseudonym(salt, &c.name, u),
        None => u.clone(),
    };
    let mut included: Vec<&EntityRecord> =
        c.entities.values().filter(|r| !r.entity.excluded).collect();
    included.sort_by(|a, b| {
        a.entity
            .added_at
            .cmp(&b.entity.added_at)
            .then(a.entity.id.cmp(&b.entity.id))
    });
    let records = included.iter().map(|r| record_of(c, r, &rename)).collect();
    (
        header_of(c, c.authors_pseudonymized || salt.is_some()),
        records,
    )
}

pub(crate) fn choice_cell(choice: Choice) -> &'static str {
    match choice {
        Choice::Positive => "positive",
        Choice::Negative => "negative",
    }
}

pub fn write_jsonl(
    header: &ExportHeader,
    records: &[ExportRecord],
) -> Result<Vec<u8>, CurationError> {
    let ser = |e: serde_json::Error| CurationError::Storage(format!("serializing export: {e}"));
    let mut out = serde_json::to_vec(header).map_err(ser)?;
    out.push(b'\n');
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(ser)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_csv(
    header: &ExportHeader,
    records: &[ExportRecord],
) -> Result<Vec<u8>, CurationError> {
    let ser =
        |e: &dyn std::fmt::Display| CurationError::Storage(format!("writing csv export: {e}"));
    let dims: Vec<&str> = header.schema.iter().map(|d| d.name.as_str()).collect();
    let mut columns: Vec<String> = ["external_ref", "content_snapshot", "added_at", "n_labels"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["primary", "disagreement", "low_conf_fraction"] {
        columns.extend(dims.iter().map(|d| format!("{prefix}:{d}")));
    }
    columns.push("labels".into());
    columns.push(format!(
        "meta:{}",
        serde_json::to_string(header).map_err(|e| ser(&e))?
    ));

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(&columns).map_err(|e| ser(&e))?;
    for r in records {
        let mut row: Vec<String> = vec![
            r.external_ref.clone(),
            r.content_snapshot.clone(),
            r.added_at
                .to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            r.n_labels.to_string(),
        ];
        for d in &dims {
            let cell = r
                .primary
                .as_ref()
                .and_then(|p| p.iter().find(|v| v.dimension == *d))
                .map(|v| choice_cell(v.choice))
                .unwrap_or("");
            row.push(cell.to_string());
        }
        for map in [&r.disagreement, &r.low_conf_fraction] {
            for d in &dims {
                row.push(map.get(*d).map(|v| v.to_string()).unwrap_or_default());
            }
        }
        let labels = r
            .labels
            .iter()
            .map(|l| serde_json::to_string(l).map(|s| s.replace('|', "\\u007c")))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ser(&e))?
            .join("|");
        row.push(labels);
        row.push(String::new());
        w.write_record(&row).map_err(|e| ser(&e))?;
    }
    w.into_inner().map_err(|e| ser(&e))
}

impl Curation {
    /// Serializes the included entities of a campaign. Excluded entities
    /// are never exported.
    pub fn export_campaign(
        &self,
        campaign: CampaignId,
        format: ExportFormat,
        options: &ExportOptions,
    ) -> Result<Vec<u8>, CurationError> {
        let (header, records) = {
            let st = self.read();
            snapshot(st.campaign(campaign)?, options)
        };
        match format {
            ExportFormat::Jsonl => write_jsonl(&header, &records),
            ExportFormat::Csv => write_csv(&header, &records),
        }
    }

    /// The structured form of an export, for callers that want records
    /// rather than bytes.
    pub fn export_records(
        &self,
        campaign: CampaignId,
        options: &ExportOptions,
    ) -> Result<(ExportHeader, Vec<ExportRecord>), CurationError> {
        let st = self.read();
        Ok(snapshot(st.campaign(campaign)?, options))
    }
}
