use thiserror::Error;

use crate::model::{CampaignId, EntityId, PostId, UserId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("unknown user '{0}'")]
    UnknownUser(UserId),
    #[error("user '{0}' is already registered")]
    DuplicateUser(UserId),
    #[error("unknown campaign {0}")]
    UnknownCampaign(CampaignId),
    #[error("a campaign named '{0}' already exists")]
    DuplicateName(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {0} is excluded from the dataset")]
    ExcludedEntity(EntityId),
    #[error("label values do not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("primary label changed concurrently; current revision is {current}")]
    RevisionConflict { current: u64 },
    #[error("entity {0} has no primary label yet")]
    NoPrimaryYet(EntityId),
    #[error("external reference '{external_ref}' already exists as entity {existing}")]
    DuplicateExternalRef {
        external_ref: String,
        existing: EntityId,
    },
    #[error("unknown datasheet section '{0}'")]
    UnknownSection(String),
    #[error("unknown label dimension '{0}'")]
    UnknownDimension(String),
    #[error("thread scope does not resolve")]
    UnknownScope,
    #[error("unknown parent post {0}")]
    UnknownParent(PostId),
    #[error("topic title must not be empty")]
    EmptyTopicTitle,
    #[error(
        "invalid quadrant thresholds ({disagreement}, {low_confidence}); both must lie in (0, 1)"
    )]
    InvalidThresholds {
        disagreement: f64,
        low_confidence: f64,
    },
    #[error("parse error on line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("fetching content for '{external_ref}' failed: {reason}")]
    AdapterFetchFailed {
        external_ref: String,
        reason: String,
    },
    #[error("invalid predictions: {0}")]
    InvalidPredictions(String),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl CurationError {
    /// Stable machine-readable name, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            CurationError::UnknownUser(_) => "unknown_user",
            CurationError::DuplicateUser(_) => "duplicate_user",
            CurationError::UnknownCampaign(_) => "unknown_campaign",
            CurationError::DuplicateName(_) => "duplicate_name",
            CurationError::InvalidSchema(_) => "invalid_schema",
            CurationError::UnknownEntity(_) => "unknown_entity",
            CurationError::ExcludedEntity(_) => "excluded_entity",
            CurationError::SchemaMismatch(_) => "schema_mismatch",
            CurationError::RevisionConflict { .. } => "revision_conflict",
            CurationError::NoPrimaryYet(_) => "no_primary_yet",
            CurationError::DuplicateExternalRef { .. } => "duplicate_external_ref",
            CurationError::UnknownSection(_) => "unknown_section",
            CurationError::UnknownDimension(_) => "unknown_dimension",
            CurationError::UnknownScope => "unknown_scope",
            CurationError::UnknownParent(_) => "unknown_parent",
            CurationError::EmptyTopicTitle => "empty_topic_title",
            CurationError::InvalidThresholds { .. } => "invalid_thresholds",
            CurationError::ParseError { .. } => "parse_error",
            CurationError::AdapterFetchFailed { .. } => "adapter_fetch_failed",
            CurationError::InvalidPredictions(_) => "invalid_predictions",
            CurationError::Eval(e) => e.code(),
            CurationError::Storage(_) => "storage",
        }
    }
}

impl From<std::io::Error> for CurationError {
    fn from(e: std::io::Error) -> Self {
        CurationError::Storage(e.to_string())
    }
}
