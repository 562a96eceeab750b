//! Domain types shared by every part of the curation service.
//!
//! All types serialize to a canonical snake_case JSON shape. Values are
//! immutable once constructed; mutation happens only through
//! [`crate::Curation`], which validates inputs before they reach these types.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CurationError;

pub type Timestamp = DateTime<Utc>;

/// Names of the datasheet sections every campaign must carry.
pub const LABEL_DEFINITIONS: &str = "label definitions";
pub const DATA_STATEMENT: &str = "data statement";
pub const INCLUSION_CRITERIA: &str = "inclusion criteria";
pub const MANDATORY_SECTIONS: [&str; 3] = [LABEL_DEFINITIONS, DATA_STATEMENT, INCLUSION_CRITERIA];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

macro_rules! numeric_id {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

numeric_id!(CampaignId);
numeric_id!(EntityId);
numeric_id!(PostId);
numeric_id!(NotificationId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Positive,
    Negative,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::Positive => Choice::Negative,
            Choice::Negative => Choice::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Low,
}

/// One text with its full, append-only revision history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionedText {
    pub revisions: Vec<TextRevision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRevision {
    pub revision: u64,
    pub text: String,
    pub author: UserId,
    pub timestamp: Timestamp,
}

impl RevisionedText {
    pub fn seeded(text: impl Into<String>, author: UserId, timestamp: Timestamp) -> Self {
        Self {
            revisions: vec![TextRevision {
                revision: 1,
                text: text.into(),
                author,
                timestamp,
            }],
        }
    }

    pub fn current(&self) -> &str {
        self.revisions
            .last()
            .map(|r| r.text.as_str())
            .unwrap_or_default()
    }

    pub fn revision(&self) -> u64 {
        self.revisions.len() as u64
    }

    /// Appends a revision even when the text is unchanged.
    pub fn push(&mut self, text: impl Into<String>, author: UserId, timestamp: Timestamp) -> u64 {
        let revision = self.revision() + 1;
        self.revisions.push(TextRevision {
            revision,
            text: text.into(),
            author,
            timestamp,
        });
        revision
    }
}

/// Caller-supplied description of one binary label dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub positive_value: String,
    pub negative_value: String,
    #[serde(default)]
    pub definition: String,
}

impl DimensionSpec {
    pub fn new(
        name: impl Into<String>,
        positive_value: impl Into<String>,
        negative_value: impl Into<String>,
        definition: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            positive_value: positive_value.into(),
            negative_value: negative_value.into(),
            definition: definition.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDimension {
    pub name: String,
    pub positive_value: String,
    pub negative_value: String,
    pub definition_text: RevisionedText,
}

impl LabelDimension {
    pub fn value_name(&self, choice: Choice) -> &str {
        match choice {
            Choice::Positive => &self.positive_value,
            Choice::Negative => &self.negative_value,
        }
    }

    pub fn spec(&self) -> DimensionSpec {
        DimensionSpec {
            name: self.name.clone(),
            positive_value: self.positive_value.clone(),
            negative_value: self.negative_value.clone(),
            definition: self.definition_text.current().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub dimensions: Vec<LabelDimension>,
}

impl LabelSchema {
    /// Builds a schema, seeding each definition as revision 1.
    pub fn new(
        specs: &[DimensionSpec],
        author: &UserId,
        timestamp: Timestamp,
    ) -> Result<Self, CurationError> {
        validate_dimension_specs(specs)?;
        let dimensions = specs
            .iter()
            .map(|s| LabelDimension {
                name: s.name.clone(),
                positive_value: s.positive_value.clone(),
                negative_value: s.negative_value.clone(),
                definition_text: RevisionedText::seeded(&s.definition, author.clone(), timestamp),
            })
            .collect();
        Ok(Self { dimensions })
    }

    pub fn dimension(&self, name: &str) -> Option<&LabelDimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dimensions.iter().map(|d| d.name.as_str())
    }

    pub fn specs(&self) -> Vec<DimensionSpec> {
        self.dimensions.iter().map(LabelDimension::spec).collect()
    }

    /// Checks that `values` covers every dimension exactly once and returns
    /// them in schema order.
    pub fn normalize_values(
        &self,
        values: &[LabelValue],
    ) -> Result<Vec<LabelValue>, CurationError> {
        let mut slots: Vec<Option<LabelValue>> = vec![None; self.dimensions.len()];
        for value in values {
            let idx = self.position(&value.dimension).ok_or_else(|| {
                CurationError::SchemaMismatch(format!("unknown dimension '{}'", value.dimension))
            })?;
            if slots[idx].replace(value.clone()).is_some() {
                return Err(CurationError::SchemaMismatch(format!(
                    "dimension '{}' given more than once",
                    value.dimension
                )));
            }
        }
        slots
            .into_iter()
            .zip(&self.dimensions)
            .map(|(slot, dim)| {
                slot.ok_or_else(|| {
                    CurationError::SchemaMismatch(format!("missing dimension '{}'", dim.name))
                })
            })
            .collect()
    }

    pub fn normalize_choices(
        &self,
        values: &[PrimaryValue],
    ) -> Result<Vec<PrimaryValue>, CurationError> {
        let as_labels: Vec<LabelValue> = values
            .iter()
            .map(|v| LabelValue::new(v.dimension.clone(), v.choice, Confidence::High))
            .collect();
        Ok(self
            .normalize_values(&as_labels)?
            .into_iter()
            .map(|v| PrimaryValue::new(v.dimension, v.choice))
            .collect())
    }
}

pub(crate) fn validate_dimension_specs(specs: &[DimensionSpec]) -> Result<(), CurationError> {
    if specs.is_empty() {
        return Err(CurationError::InvalidSchema(
            "a schema needs at least one dimension".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for spec in specs {
        if spec.name.trim().is_empty() {
            return Err(CurationError::InvalidSchema("empty dimension name".into()));
        }
        if !seen.insert(spec.name.as_str()) {
            return Err(CurationError::InvalidSchema(format!(
                "duplicate dimension '{}'",
                spec.name
            )));
        }
        if spec.positive_value == spec.negative_value {
            return Err(CurationError::InvalidSchema(format!(
                "dimension '{}' uses the same value for both choices",
                spec.name
            )));
        }
    }
    Ok(())
}

/// One judgment on one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelValue {
    pub dimension: String,
    pub choice: Choice,
    pub confidence: Confidence,
}

impl LabelValue {
    pub fn new(dimension: impl Into<String>, choice: Choice, confidence: Confidence) -> Self {
        Self {
            dimension: dimension.into(),
            choice,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimaryValue {
    pub dimension: String,
    pub choice: Choice,
}

impl PrimaryValue {
    pub fn new(dimension: impl Into<String>, choice: Choice) -> Self {
        Self {
            dimension: dimension.into(),
            choice,
        }
    }
}

pub fn choices_of(values: &[LabelValue]) -> Vec<PrimaryValue> {
    values
        .iter()
        .map(|v| PrimaryValue::new(v.dimension.clone(), v.choice))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualLabel {
    pub author: UserId,
    pub entity: EntityId,
    pub values: Vec<LabelValue>,
    pub note: Option<String>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl IndividualLabel {
    pub fn value(&self, dimension: &str) -> Option<&LabelValue> {
        self.values.iter().find(|v| v.dimension == dimension)
    }

    pub fn choices(&self) -> Vec<PrimaryValue> {
        choices_of(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryRevision {
    pub revision: u64,
    pub values: Vec<PrimaryValue>,
    pub editor: UserId,
    pub timestamp: Timestamp,
    pub rationale: Option<String>,
}

/// Consensus label of an entity. `history` is append-only and
/// `revision == history.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryLabel {
    pub entity: EntityId,
    pub values: Vec<PrimaryValue>,
    pub revision: u64,
    pub history: Vec<PrimaryRevision>,
}

impl PrimaryLabel {
    pub fn initial(
        entity: EntityId,
        values: Vec<PrimaryValue>,
        editor: UserId,
        at: Timestamp,
    ) -> Self {
        Self {
            entity,
            values: values.clone(),
            revision: 1,
            history: vec![PrimaryRevision {
                revision: 1,
                values,
                editor,
                timestamp: at,
                rationale: None,
            }],
        }
    }

    pub fn choice(&self, dimension: &str) -> Option<Choice> {
        self.values
            .iter()
            .find(|v| v.dimension == dimension)
            .map(|v| v.choice)
    }

    pub(crate) fn append(
        &mut self,
        values: Vec<PrimaryValue>,
        editor: UserId,
        at: Timestamp,
        rationale: Option<String>,
    ) -> u64 {
        self.revision += 1;
        self.history.push(PrimaryRevision {
            revision: self.revision,
            values: values.clone(),
            editor,
            timestamp: at,
            rationale,
        });
        self.values = values;
        self.revision
    }

    /// Rebuilds (values, revision) from history alone.
    pub fn replay(history: &[PrimaryRevision]) -> Option<(Vec<PrimaryValue>, u64)> {
        history
            .last()
            .map(|last| (last.values.clone(), history.len() as u64))
    }

    pub fn last_edited_at(&self) -> Option<Timestamp> {
        self.history.last().map(|h| h.timestamp)
    }
}

/// True when any dimension's choice differs. Confidence is not compared.
pub fn choices_differ(submitted: &[LabelValue], primary: &[PrimaryValue]) -> bool {
    submitted.iter().any(|v| {
        primary
            .iter()
            .find(|p| p.dimension == v.dimension)
            .is_some_and(|p| p.choice != v.choice)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub campaign: CampaignId,
    pub external_ref: String,
    pub content_snapshot: String,
    pub added_by: UserId,
    pub added_at: Timestamp,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

/// Numeric encoding of a (choice, confidence) pair.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedLabel(pub f64);

impl EncodedLabel {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Positive ("damaging") encodes negative, low confidence halves the magnitude.
pub fn encode(value: &LabelValue) -> EncodedLabel {
    encode_pair(value.choice, value.confidence)
}

pub fn encode_pair(choice: Choice, confidence: Confidence) -> EncodedLabel {
    let sign = match choice {
        Choice::Positive => -1.0,
        Choice::Negative => 1.0,
    };
    let magnitude = match confidence {
        Confidence::High => 1.0,
        Confidence::Low => 0.5,
    };
    EncodedLabel(sign * magnitude)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum ThreadScope {
    Entity(EntityId),
    Campaign(CampaignId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub author: UserId,
    pub body: String,
    pub timestamp: Timestamp,
    pub parent: Option<PostId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub title: String,
    pub posts: Vec<Post>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalkThread {
    pub scope: ThreadScope,
    pub topics: Vec<Topic>,
}

impl TalkThread {
    pub fn new(scope: ThreadScope) -> Self {
        Self {
            scope,
            topics: Vec::new(),
        }
    }

    pub fn has_posts(&self) -> bool {
        self.topics.iter().any(|t| !t.posts.is_empty())
    }

    pub fn find_post(&self, id: PostId) -> Option<(&Topic, &Post)> {
        self.topics
            .iter()
            .find_map(|t| t.posts.iter().find(|p| p.id == id).map(|p| (t, p)))
    }

    pub fn last_post_at(&self) -> Option<Timestamp> {
        self.topics
            .iter()
            .flat_map(|t| t.posts.iter().map(|p| p.timestamp))
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasheetSection {
    pub name: String,
    pub text: RevisionedText,
}

/// Name and text of one datasheet section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionText {
    pub name: String,
    pub text: String,
}

impl SectionText {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

/// Living campaign documentation. The mandatory sections are always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datasheet {
    pub sections: Vec<DatasheetSection>,
}

impl Datasheet {
    pub fn seeded(
        seed: &[SectionText],
        author: &UserId,
        timestamp: Timestamp,
    ) -> Result<Self, CurationError> {
        let mut names = BTreeSet::new();
        for SectionText { name, .. } in seed {
            if !names.insert(name.as_str()) {
                return Err(CurationError::InvalidSchema(format!(
                    "duplicate datasheet section '{name}'"
                )));
            }
        }
        for required in MANDATORY_SECTIONS {
            if !names.contains(required) {
                return Err(CurationError::InvalidSchema(format!(
                    "datasheet is missing the '{required}' section"
                )));
            }
        }
        Ok(Self {
            sections: seed
                .iter()
                .map(|s| DatasheetSection {
                    name: s.name.clone(),
                    text: RevisionedText::seeded(&s.text, author.clone(), timestamp),
                })
                .collect(),
        })
    }

    pub fn section(&self, name: &str) -> Option<&DatasheetSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub(crate) fn section_mut(&mut self, name: &str) -> Option<&mut DatasheetSection> {
        self.sections.iter_mut().find(|s| s.name == name)
    }

    pub fn current_texts(&self) -> Vec<SectionText> {
        self.sections
            .iter()
            .map(|s| SectionText::new(&s.name, s.text.current()))
            .collect()
    }
}
