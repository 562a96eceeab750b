//! Content sources for in-flow labeling.
//!
//! A [`SourceAdapter`] turns an external reference (a diff URL, a document
//! id) into the content snapshot stored with a new entity. Adapters only
//! read; a failed fetch never creates an entity.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::campaign::prepare_entity;
use crate::engine::{prepare_submit, SubmitOutcome};
use crate::error::CurationError;
use crate::model::{CampaignId, LabelValue, UserId};
use crate::service::Curation;
use crate::state::Event;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("'{0}' is not available from this source")]
    NotFound(String),
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Other(String),
}

pub trait SourceAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn fetch(&self, external_ref: &str) -> Result<String, AdapterError>;
}

/// Serves pre-registered content only.
#[derive(Debug, Clone, Default)]
pub struct StaticAdapter {
    entries: BTreeMap<String, String>,
}

impl StaticAdapter {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, external_ref: impl Into<String>, content: impl Into<String>) {
        self.entries.insert(external_ref.into(), content.into());
    }

    /// Reads a JSON object mapping external refs to content.
    pub fn from_json(json: &str) -> Result<Self, CurationError> {
        let entries: BTreeMap<String, String> =
            serde_json::from_str(json).map_err(|e| CurationError::ParseError {
                line: e.line(),
                reason: e.to_string(),
            })?;
        Ok(Self { entries })
    }
}

impl SourceAdapter for StaticAdapter {
    fn name(&self) -> &str {
        "static"
    }

    fn fetch(&self, external_ref: &str) -> Result<String, AdapterError> {
        self.entries
            .get(external_ref)
            .cloned()
            .ok_or_else(|| AdapterError::NotFound(external_ref.to_string()))
    }
}

impl Curation {
    /// Labels an item by external reference. Unknown references are fetched
    /// through `adapter`, and the entity is created together with its first
    /// label in a single commit; known references behave like
    /// [`Curation::submit_individual_label`].
    pub fn quick_label(
        &self,
        user: &UserId,
        campaign: CampaignId,
        external_ref: &str,
        values: &[LabelValue],
        note: Option<String>,
        adapter: &dyn SourceAdapter,
    ) -> Result<SubmitOutcome, CurationError> {
        let known = {
            let st = self.read();
            st.require_member(user)?;
            let c = st.campaign(campaign)?;
            c.schema.normalize_values(values)?;
            c.by_ref.get(external_ref).copied()
        };
        if let Some(entity) = known {
            return self.submit_individual_label(user, entity, values, note);
        }

        let snapshot =
            adapter
                .fetch(external_ref)
                .map_err(|e| CurationError::AdapterFetchFailed {
                    external_ref: external_ref.to_string(),
                    reason: e.to_string(),
                })?;

        self.commit(
            |st, now| {
                // Someone may have added the ref while we were fetching.
                if let Some(&entity) = st.campaign(campaign)?.by_ref.get(external_ref) {
                    let (event, outcome) = prepare_submit(st, now, user, entity, values, note)?;
                    return Ok((Some(event), outcome));
                }
                let entity = prepare_entity(st, now, campaign, external_ref, &snapshot, user)?;
                // Validate the label against a view where the entity exists.
                let values = st.campaign(campaign)?.schema.normalize_values(values)?;
                let label = crate::model::IndividualLabel {
                    author: user.clone(),
                    entity: entity.id,
                    values,
                    note: note.filter(|n| !n.trim().is_empty()),
                    created_at: now,
                    updated_at: now,
                };
                let outcome = SubmitOutcome {
                    status: crate::engine::SubmitStatus::RecordedAgree,
                    entity: entity.id,
                    campaign,
                    primary_snapshot: label.choices(),
                    primary_revision: 1,
                };
                Ok((Some(Event::QuickLabeled { entity, label }), outcome))
            },
            |_, outcome| outcome,
        )
    }
}
