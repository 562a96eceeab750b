//! Dataset import: the two export formats, plus a JSON mapping file for
//! third-party CSV datasets.
//!
//! Imported entities get fresh ids. Each primary history is collapsed: its
//! first revision is the earliest label's choices, and if the imported
//! primary differs, a second revision by the importer carries it.
//!
//! # Mapping file
//!
//! ```json
//! {
//!   "campaign_name": "edit quality",
//!   "external_ref_column": "rev_id",
//!   "ref_template": "https://en.wikipedia.org/w/index.php?diff={}",
//!   "content_column": null,
//!   "delimiter": ",",
//!   "dimensions": [
//!     {
//!       "name": "damage", "positive_value": "damaging",
//!       "negative_value": "not damaging", "definition": "...",
//!       "column": "damaging",
//!       "positive_cells": ["True", "1", "damaging"],
//!       "negative_cells": ["False", "0", "not damaging"]
//!     }
//!   ],
//!   "datasheet": [{"name": "data statement", "text": "..."}]
//! }
//! ```
//!
//! Cell matching is case-insensitive after trimming. Every row becomes one
//! entity whose primary is the mapped row, backed by a single high
//! confidence label authored by the importer.

use std::collections::{BTreeMap, BTreeSet};

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::metrics::QuadrantThresholds;
use crate::model::{
    CampaignId, Choice, Confidence, Datasheet, DimensionSpec, Entity, EntityId, IndividualLabel,
    LabelSchema, LabelValue, PrimaryLabel, PrimaryValue, SectionText, TalkThread, ThreadScope,
    Timestamp, UserId, DATA_STATEMENT, INCLUSION_CRITERIA, LABEL_DEFINITIONS,
};
use crate::service::Curation;
use crate::state::{CampaignRecord, EntityRecord, Event, Member, State};
use crate::store::export::{ExportHeader, ExportRecord, ExportedLabel};
use crate::store::{ExportFormat, FORMAT_VERSION};

fn parse_error(line: usize, reason: impl Into<String>) -> CurationError {
    CurationError::ParseError {
        line,
        reason: reason.into(),
    }
}

/// A parsed dataset, before it is checked against state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDataset {
    pub header: ExportHeader,
    /// Records paired with the 1-based line they started on.
    pub records: Vec<(usize, ExportRecord)>,
}

fn parse_header(line: usize, json: &str) -> Result<ExportHeader, CurationError> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| parse_error(line, format!("header: {e}")))?;
    if value.get("schema").is_none() {
        return Err(CurationError::SchemaMismatch(
            "header record carries no schema".into(),
        ));
    }
    let header: ExportHeader =
        serde_json::from_value(value).map_err(|e| parse_error(line, format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(parse_error(
            line,
            format!("unsupported format version {}", header.format_version),
        ));
    }
    Ok(header)
}

pub fn parse_jsonl(bytes: &[u8]) -> Result<ParsedDataset, CurationError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        parse_error(line, "invalid UTF-8")
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = match lines.next() {
        Some((n, l)) if !l.trim().is_empty() => parse_header(n, l)?,
        _ => return Err(parse_error(1, "missing header record")),
    };
    let mut records = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            return Err(parse_error(n, "empty line"));
        }
        let record: ExportRecord =
            serde_json::from_str(line).map_err(|e| parse_error(n, e.to_string()))?;
        records.push((n, record));
    }
    Ok(ParsedDataset { header, records })
}

fn expected_csv_columns(header: &ExportHeader) -> Vec<String> {
    let mut columns: Vec<String> = ["external_ref", "content_snapshot", "added_at", "n_labels"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["primary", "disagreement", "low_conf_fraction"] {
        columns.extend(header.schema.iter().map(|d| format!("{prefix}:{}", d.name)));
    }
    columns.push("labels".into());
    columns
}

fn parse_choice(line: usize, cell: &str) -> Result<Choice, CurationError> {
    match cell {
        "positive" => Ok(Choice::Positive),
        "negative" => Ok(Choice::Negative),
        other => Err(parse_error(line, format!("'{other}' is not a choice"))),
    }
}

fn parse_metric(line: usize, cell: &str) -> Result<f64, CurationError> {
    cell.parse()
        .map_err(|_| parse_error(line, format!("'{cell}' is not a number")))
}

pub fn parse_csv(bytes: &[u8]) -> Result<ParsedDataset, CurationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let csv_error = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(1);
        parse_error(line, e.to_string())
    };
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() {
        return Err(parse_error(1, "missing header row"));
    }
    let meta = columns
        .last()
        .and_then(|c| c.strip_prefix("meta:"))
        .ok_or_else(|| CurationError::SchemaMismatch("header row carries no schema".into()))?;
    let header = parse_header(1, meta)?;
    let expected = expected_csv_columns(&header);
    if columns[..columns.len() - 1] != expected[..] {
        return Err(CurationError::SchemaMismatch(format!(
            "columns do not match the schema; expected {}",
            expected.join(",")
        )));
    }
    let dims: Vec<&str> = header.schema.iter().map(|d| d.name.as_str()).collect();
    let k = dims.len();

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |i: usize| row.get(i).unwrap_or("");
        let added_at = DateTime::parse_from_rfc3339(cell(2))
            .map_err(|e| parse_error(line, format!("added_at: {e}")))?
            .to_utc();
        let n_labels = cell(3)
            .parse()
            .map_err(|_| parse_error(line, format!("n_labels: '{}'", cell(3))))?;

        let primary_cells: Vec<&str> = (0..k).map(|i| cell(4 + i)).collect();
        let primary = if primary_cells.iter().all(|c| c.is_empty()) {
            None
        } else {
            Some(
                dims.iter()
                    .zip(&primary_cells)
                    .map(|(d, c)| Ok(PrimaryValue::new(*d, parse_choice(line, c)?)))
                    .collect::<Result<Vec<_>, CurationError>>()?,
            )
        };
        let mut disagreement = BTreeMap::new();
        let mut low_conf_fraction = BTreeMap::new();
        for (i, d) in dims.iter().enumerate() {
            disagreement.insert(d.to_string(), parse_metric(line, cell(4 + k + i))?);
            low_conf_fraction.insert(d.to_string(), parse_metric(line, cell(4 + 2 * k + i))?);
        }
        let labels_cell = cell(4 + 3 * k);
        let labels = if labels_cell.is_empty() {
            Vec::new()
        } else {
            labels_cell
                .split('|')
                .map(|item| {
                    serde_json::from_str::<ExportedLabel>(item)
                        .map_err(|e| parse_error(line, format!("labels: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        records.push((
            line,
            ExportRecord {
                external_ref: cell(0).to_string(),
                content_snapshot: cell(1).to_string(),
                added_at,
                primary,
                labels,
                n_labels,
                disagreement,
                low_conf_fraction,
            },
        ));
    }
    Ok(ParsedDataset { header, records })
}

pub fn parse(bytes: &[u8], format: ExportFormat) -> Result<ParsedDataset, CurationError> {
    match format {
        ExportFormat::Jsonl => parse_jsonl(bytes),
        ExportFormat::Csv => parse_csv(bytes),
    }
}

fn as_mismatch(e: CurationError) -> CurationError {
    match e {
        CurationError::InvalidSchema(m) => CurationError::SchemaMismatch(m),
        CurationError::InvalidThresholds { .. } => CurationError::SchemaMismatch(e.to_string()),
        other => other,
    }
}

fn import_entity(
    schema: &LabelSchema,
    id: EntityId,
    campaign: CampaignId,
    line: usize,
    record: &ExportRecord,
    by: &UserId,
    now: Timestamp,
) -> Result<EntityRecord, CurationError> {
    let at_line = |e: CurationError| match e {
        CurationError::SchemaMismatch(m) => {
            CurationError::SchemaMismatch(format!("line {line}: {m}"))
        }
        other => other,
    };
    if record.n_labels != record.labels.len() {
        return Err(parse_error(
            line,
            format!(
                "n_labels is {} but {} labels are listed",
                record.n_labels,
                record.labels.len()
            ),
        ));
    }
    let mut authors = BTreeSet::new();
    let mut labels = Vec::with_capacity(record.labels.len());
    for l in &record.labels {
        if !authors.insert(&l.author) {
            return Err(parse_error(
                line,
                format!("'{}' labels the entity twice", l.author),
            ));
        }
        labels.push(IndividualLabel {
            author: l.author.clone(),
            entity: id,
            values: schema.normalize_values(&l.values).map_err(at_line)?,
            note: l.note.clone(),
            created_at: l.created_at,
            updated_at: l.updated_at,
        });
    }
    labels.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then(a.author.cmp(&b.author))
    });

    let primary = match (&record.primary, labels.first()) {
        (None, None) => None,
        (Some(values), Some(first)) => {
            let values = schema.normalize_choices(values).map_err(at_line)?;
            let mut primary =
                PrimaryLabel::initial(id, first.choices(), first.author.clone(), first.created_at);
            if primary.values != values {
                primary.append(values, by.clone(), now, Some("imported".into()));
            }
            Some(primary)
        }
        (Some(_), None) => {
            return Err(at_line(CurationError::SchemaMismatch(
                "primary label without individual labels".into(),
            )))
        }
        (None, Some(_)) => {
            return Err(at_line(CurationError::SchemaMismatch(
                "labels without a primary label".into(),
            )))
        }
    };

    let mut entity = EntityRecord::new(Entity {
        id,
        campaign,
        external_ref: record.external_ref.clone(),
        content_snapshot: record.content_snapshot.clone(),
        added_by: by.clone(),
        added_at: record.added_at,
        excluded: false,
        exclusion_reason: None,
    });
    entity.labels = labels;
    entity.primary = primary;
    Ok(entity)
}

pub(crate) fn prepare_import(
    st: &State,
    now: Timestamp,
    by: &UserId,
    name_override: Option<&str>,
    parsed: &ParsedDataset,
) -> Result<(Event, CampaignId), CurationError> {
    st.require_member(by)?;
    let header = &parsed.header;
    let name = name_override.unwrap_or(&header.name).to_string();
    if name.trim().is_empty() {
        return Err(CurationError::InvalidSchema(
            "campaign name is empty".into(),
        ));
    }
    if st.campaigns.values().any(|c| c.name == name) {
        return Err(CurationError::DuplicateName(name));
    }
    let schema = LabelSchema::new(&header.schema, by, now).map_err(as_mismatch)?;
    let datasheet = Datasheet::seeded(&header.datasheet, by, now).map_err(as_mismatch)?;
    header.quadrant_thresholds.validate().map_err(as_mismatch)?;

    let id = st.next_campaign_id();
    let first_entity = st.next_entity_id().0;
    let mut refs = BTreeSet::new();
    let mut entities = BTreeMap::new();
    for (next_entity, (line, record)) in (first_entity..).zip(&parsed.records) {
        if record.external_ref.trim().is_empty() {
            return Err(parse_error(*line, "external_ref is empty"));
        }
        if !refs.insert(record.external_ref.as_str()) {
            return Err(parse_error(
                *line,
                format!("external_ref '{}' appears twice", record.external_ref),
            ));
        }
        let entity_id = EntityId(next_entity);
        let entity = import_entity(&schema, entity_id, id, *line, record, by, now)?;
        entities.insert(entity_id, entity);
    }

    let mut new_members: BTreeMap<UserId, Member> = BTreeMap::new();
    for record in entities.values() {
        for label in &record.labels {
            if !st.members.contains_key(&label.author) {
                new_members
                    .entry(label.author.clone())
                    .or_insert_with(|| Member {
                        id: label.author.clone(),
                        display_name: label.author.to_string(),
                        credential_digest: None,
                        registered_at: now,
                    });
            }
        }
    }

    let campaign = CampaignRecord {
        id,
        name,
        schema,
        datasheet,
        thresholds: header.quadrant_thresholds,
        talk: TalkThread::new(ThreadScope::Campaign(id)),
        created_by: by.clone(),
        created_at: now,
        authors_pseudonymized: header.pseudonymized,
        entities,
        by_ref: Default::default(),
    };
    Ok((
        Event::CampaignImported {
            campaign: Box::new(campaign),
            new_members: new_members.into_values().collect(),
        },
        id,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedDimension {
    pub name: String,
    pub positive_value: String,
    pub negative_value: String,
    #[serde(default)]
    pub definition: String,
    pub column: String,
    pub positive_cells: Vec<String>,
    pub negative_cells: Vec<String>,
}

/// Column mapping for datasets that were not produced by an export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMapping {
    pub campaign_name: String,
    pub external_ref_column: String,
    /// `{}` is replaced by the cell value.
    #[serde(default)]
    pub ref_template: Option<String>,
    #[serde(default)]
    pub content_column: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub dimensions: Vec<MappedDimension>,
    #[serde(default)]
    pub datasheet: Vec<SectionText>,
    #[serde(default)]
    pub quadrant_thresholds: Option<QuadrantThresholds>,
}

fn default_delimiter() -> char {
    ','
}

impl ExternalMapping {
    pub fn from_json(json: &str) -> Result<Self, CurationError> {
        serde_json::from_str(json).map_err(|e| parse_error(e.line(), format!("mapping file: {e}")))
    }

    fn datasheet(&self) -> Vec<SectionText> {
        let mut sections = self.datasheet.clone();
        for (name, text) in [
            (LABEL_DEFINITIONS, "Definitions for each label dimension."),
            (DATA_STATEMENT, "Imported from an external dataset."),
            (INCLUSION_CRITERIA, "All rows of the source dataset."),
        ] {
            if !sections.iter().any(|s| s.name == name) {
                sections.push(SectionText::new(name, text));
            }
        }
        sections
    }

    /// Reads `bytes` as delimited text and builds the dataset the mapping
    /// describes, with one importer label per row stamped at `now`.
    pub fn apply(
        &self,
        bytes: &[u8],
        by: &UserId,
        now: Timestamp,
    ) -> Result<ParsedDataset, CurationError> {
        if !self.delimiter.is_ascii() {
            return Err(parse_error(0, "mapping delimiter must be ASCII"));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .delimiter(self.delimiter as u8)
            .flexible(true)
            .from_reader(bytes);
        let csv_error = |e: csv::Error| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(1);
            parse_error(line, e.to_string())
        };
        let columns = reader.headers().map_err(csv_error)?.clone();
        let column = |name: &str| {
            columns
                .iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| {
                    CurationError::SchemaMismatch(format!("dataset has no column '{name}'"))
                })
        };
        let ref_col = column(&self.external_ref_column)?;
        let content_col = self.content_column.as_deref().map(column).transpose()?;
        let dim_cols = self
            .dimensions
            .iter()
            .map(|d| column(&d.column))
            .collect::<Result<Vec<_>, _>>()?;

        let header = ExportHeader {
            format_version: FORMAT_VERSION,
            name: self.campaign_name.clone(),
            schema: self
                .dimensions
                .iter()
                .map(|d| {
                    DimensionSpec::new(&d.name, &d.positive_value, &d.negative_value, &d.definition)
                })
                .collect(),
            datasheet: self.datasheet(),
            quadrant_thresholds: self.quadrant_thresholds.unwrap_or_default(),
            pseudonymized: false,
        };

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(csv_error)?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let cell = |i: usize| row.get(i).map(str::trim).unwrap_or("");
            let raw_ref = cell(ref_col);
            if raw_ref.is_empty() {
                return Err(parse_error(
                    line,
                    format!("empty '{}'", self.external_ref_column),
                ));
            }
            let external_ref = match &self.ref_template {
                Some(t) => t.replace("{}", raw_ref),
                None => raw_ref.to_string(),
            };
            let mut values = Vec::with_capacity(self.dimensions.len());
            for (dim, &col) in self.dimensions.iter().zip(&dim_cols) {
                let raw = cell(col);
                let matches =
                    |cells: &[String]| cells.iter().any(|c| c.trim().eq_ignore_ascii_case(raw));
                let choice = if matches(&dim.positive_cells) {
                    Choice::Positive
                } else if matches(&dim.negative_cells) {
                    Choice::Negative
                } else {
                    return Err(parse_error(
                        line,
                        format!("'{raw}' in column '{}' maps to no choice", dim.column),
                    ));
                };
                values.push(LabelValue::new(&dim.name, choice, Confidence::High));
            }
            let primary = values
                .iter()
                .map(|v| PrimaryValue::new(&v.dimension, v.choice))
                .collect();
            records.push((
                line,
                ExportRecord {
                    external_ref,
                    content_snapshot: content_col.map(|c| cell(c).to_string()).unwrap_or_default(),
                    added_at: now,
                    primary: Some(primary),
                    labels: vec![ExportedLabel {
                        author: by.clone(),
                        values,
                        note: None,
                        created_at: now,
                        updated_at: now,
                    }],
                    n_labels: 1,
                    disagreement: BTreeMap::new(),
                    low_conf_fraction: BTreeMap::new(),
                },
            ));
        }
        Ok(ParsedDataset { header, records })
    }
}

impl Curation {
    /// Creates a campaign from an export. `name` overrides the name in the
    /// header, which must otherwise be unused.
    pub fn import_campaign(
        &self,
        bytes: &[u8],
        format: ExportFormat,
        by: &UserId,
        name: Option<&str>,
    ) -> Result<CampaignId, CurationError> {
        let parsed = parse(bytes, format)?;
        self.import_parsed(&parsed, by, name)
    }

    /// Creates a campaign from a third-party dataset described by `mapping`.
    pub fn import_mapped(
        &self,
        bytes: &[u8],
        mapping: &ExternalMapping,
        by: &UserId,
    ) -> Result<CampaignId, CurationError> {
        let parsed = mapping.apply(bytes, by, self.now())?;
        self.import_parsed(&parsed, by, None)
    }

    pub fn import_parsed(
        &self,
        parsed: &ParsedDataset,
        by: &UserId,
        name: Option<&str>,
    ) -> Result<CampaignId, CurationError> {
        self.commit(
            |st, now| {
                let (event, id) = prepare_import(st, now, by, name, parsed)?;
                Ok((Some(event), id))
            },
            |_, id| id,
        )
    }
}
