//! Campaign lifecycle, the living datasheet, the dataset table and its
//! attention-routing sorts, exclusion, talk threads and campaign statistics.

use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::eval::{self, EvalRow, ModelComparison, PredictionSet, Weighting};
use crate::metrics::{self, dimension_stats, CampaignStats, EntityStats, QuadrantThresholds};
use crate::model::{
    choices_differ, CampaignId, Datasheet, DimensionSpec, Entity, EntityId, LabelSchema, Post,
    PostId, PrimaryValue, SectionText, TalkThread, ThreadScope, Timestamp, UserId,
};
use crate::service::Curation;
use crate::state::{CampaignRecord, EntityRecord, Event, State};

pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewCampaign {
    pub name: String,
    pub dimensions: Vec<DimensionSpec>,
    pub datasheet: Vec<SectionText>,
    #[serde(default)]
    pub thresholds: Option<QuadrantThresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignView {
    pub id: CampaignId,
    pub name: String,
    pub schema: LabelSchema,
    pub datasheet: Datasheet,
    pub thresholds: QuadrantThresholds,
    pub created_by: UserId,
    pub created_at: Timestamp,
    pub n_entities: usize,
    pub n_excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortMode {
    /// Ascending label count ("provide more labels").
    FewestLabels,
    /// Descending disagreement ("build consensus").
    HighestDisagreement,
    /// Rows whose primary differs from the viewer's own label first.
    DiffersFromMine,
    /// Most recently active first.
    RecentActivity,
}

impl SortMode {
    pub const ALL: [SortMode; 4] = [
        SortMode::FewestLabels,
        SortMode::HighestDisagreement,
        SortMode::DiffersFromMine,
        SortMode::RecentActivity,
    ];
}

impl FromStr for SortMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fewest_labels" => Ok(SortMode::FewestLabels),
            "highest_disagreement" => Ok(SortMode::HighestDisagreement),
            "differs_from_mine" => Ok(SortMode::DiffersFromMine),
            "recent_activity" => Ok(SortMode::RecentActivity),
            other => Err(format!("unknown sort mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub entity: EntityId,
    pub external_ref: String,
    pub primary: Option<Vec<PrimaryValue>>,
    pub n_labels: usize,
    /// Maximum over dimensions.
    pub disagreement: f64,
    pub has_discussion: bool,
    pub differs_from_viewer: bool,
    pub last_activity: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePage {
    pub rows: Vec<TableRow>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionOutcome {
    Excluded,
    /// The entity was already excluded; nothing changed.
    AlreadyExcluded,
}

fn table_row(
    campaign: &CampaignRecord,
    record: &EntityRecord,
    viewer: Option<&UserId>,
) -> TableRow {
    let stats = dimension_stats(&campaign.schema, &record.labels, campaign.thresholds);
    let differs = match (viewer.and_then(|v| record.label_of(v)), &record.primary) {
        (Some(own), Some(primary)) => choices_differ(&own.values, &primary.values),
        _ => false,
    };
    TableRow {
        entity: record.entity.id,
        external_ref: record.entity.external_ref.clone(),
        primary: record.primary.as_ref().map(|p| p.values.clone()),
        n_labels: record.labels.len(),
        disagreement: stats.iter().map(|s| s.disagreement).fold(0.0, f64::max),
        has_discussion: record.talk.has_posts(),
        differs_from_viewer: differs,
        last_activity: record.last_activity(),
    }
}

fn compare_rows(mode: SortMode, a: &TableRow, b: &TableRow) -> Ordering {
    let by_recent = || b.last_activity.cmp(&a.last_activity);
    let primary = match mode {
        SortMode::FewestLabels => a.n_labels.cmp(&b.n_labels),
        SortMode::HighestDisagreement => b.disagreement.total_cmp(&a.disagreement),
        SortMode::DiffersFromMine => b
            .differs_from_viewer
            .cmp(&a.differs_from_viewer)
            .then_with(by_recent),
        SortMode::RecentActivity => by_recent(),
    };
    primary.then(a.entity.cmp(&b.entity))
}

fn entity_in_campaign(
    st: &State,
    campaign: CampaignId,
    entity: EntityId,
) -> Result<&EntityRecord, CurationError> {
    let c = st.campaign(campaign)?;
    c.entities
        .get(&entity)
        .ok_or(CurationError::UnknownEntity(entity))
}

impl Curation {
    pub fn create_campaign(
        &self,
        spec: NewCampaign,
        user: &UserId,
    ) -> Result<CampaignId, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                if spec.name.trim().is_empty() {
                    return Err(CurationError::InvalidSchema(
                        "campaign name is empty".into(),
                    ));
                }
                if st.campaigns.values().any(|c| c.name == spec.name) {
                    return Err(CurationError::DuplicateName(spec.name.clone()));
                }
                let schema = LabelSchema::new(&spec.dimensions, user, now)?;
                let datasheet = Datasheet::seeded(&spec.datasheet, user, now)?;
                let thresholds = spec.thresholds.unwrap_or_default();
                thresholds.validate()?;
                let id = st.next_campaign_id();
                let record = CampaignRecord {
                    id,
                    name: spec.name.clone(),
                    schema,
                    datasheet,
                    thresholds,
                    talk: TalkThread::new(ThreadScope::Campaign(id)),
                    created_by: user.clone(),
                    created_at: now,
                    authors_pseudonymized: false,
                    entities: Default::default(),
                    by_ref: Default::default(),
                };
                Ok((
                    Some(Event::CampaignCreated {
                        campaign: Box::new(record),
                    }),
                    id,
                ))
            },
            |_, id| id,
        )
    }

    pub fn campaigns(&self) -> Vec<CampaignView> {
        let st = self.read();
        st.campaigns.values().map(campaign_view).collect()
    }

    pub fn campaign(&self, id: CampaignId) -> Result<CampaignView, CurationError> {
        let st = self.read();
        st.campaign(id).map(campaign_view)
    }

    pub fn campaign_by_name(&self, name: &str) -> Option<CampaignId> {
        self.read()
            .campaigns
            .values()
            .find(|c| c.name == name)
            .map(|c| c.id)
    }

    pub fn set_quadrant_thresholds(
        &self,
        campaign: CampaignId,
        thresholds: QuadrantThresholds,
        user: &UserId,
    ) -> Result<(), CurationError> {
        self.commit(
            |st, _| {
                st.require_member(user)?;
                st.campaign(campaign)?;
                thresholds.validate()?;
                Ok((
                    Some(Event::ThresholdsChanged {
                        campaign,
                        thresholds,
                    }),
                    (),
                ))
            },
            |_, ()| (),
        )
    }

    pub fn add_entity(
        &self,
        campaign: CampaignId,
        external_ref: &str,
        content_snapshot: &str,
        user: &UserId,
    ) -> Result<EntityId, CurationError> {
        self.commit(
            |st, now| {
                let entity =
                    prepare_entity(st, now, campaign, external_ref, content_snapshot, user)?;
                let id = entity.id;
                Ok((Some(Event::EntityAdded { entity }), id))
            },
            |_, id| id,
        )
    }

    /// Soft-deletes an entity: it leaves the table, stats and exports but
    /// stays retrievable by id. An audit line is appended to the
    /// datasheet's inclusion criteria.
    pub fn exclude_entity(
        &self,
        campaign: CampaignId,
        entity: EntityId,
        user: &UserId,
        reason: &str,
    ) -> Result<ExclusionOutcome, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                let record = entity_in_campaign(st, campaign, entity)?;
                if record.entity.excluded {
                    return Ok((None, ExclusionOutcome::AlreadyExcluded));
                }
                let audit_line = format!(
                    "- excluded {} (entity {}) by {} on {}: {}",
                    record.entity.external_ref,
                    entity,
                    user,
                    now.format("%Y-%m-%d"),
                    reason.trim()
                );
                Ok((
                    Some(Event::EntityExcluded {
                        entity,
                        by: user.clone(),
                        reason: reason.trim().to_string(),
                        at: now,
                        audit_line,
                    }),
                    ExclusionOutcome::Excluded,
                ))
            },
            |_, outcome| outcome,
        )
    }

    /// One page of the dataset table. Excluded entities never appear;
    /// ties in the sort key break on ascending entity id.
    pub fn list_table(
        &self,
        campaign: CampaignId,
        viewer: Option<&UserId>,
        sort: SortMode,
        page: usize,
        page_size: usize,
    ) -> Result<TablePage, CurationError> {
        let st = self.read();
        let c = st.campaign(campaign)?;
        let mut rows: Vec<TableRow> = c
            .entities
            .values()
            .filter(|r| !r.entity.excluded)
            .map(|r| table_row(c, r, viewer))
            .collect();
        rows.sort_by(|a, b| compare_rows(sort, a, b));
        let page_size = if page_size == 0 {
            DEFAULT_PAGE_SIZE
        } else {
            page_size
        };
        let total = rows.len();
        let rows = rows
            .into_iter()
            .skip(page.saturating_mul(page_size))
            .take(page_size)
            .collect();
        Ok(TablePage {
            rows,
            total,
            page,
            page_size,
        })
    }

    pub fn edit_datasheet_section(
        &self,
        campaign: CampaignId,
        section: &str,
        new_text: &str,
        user: &UserId,
    ) -> Result<u64, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                let c = st.campaign(campaign)?;
                let current = c
                    .datasheet
                    .section(section)
                    .ok_or_else(|| CurationError::UnknownSection(section.to_string()))?;
                Ok((
                    Some(Event::DatasheetEdited {
                        campaign,
                        section: section.to_string(),
                        text: new_text.to_string(),
                        by: user.clone(),
                        at: now,
                    }),
                    current.text.revision() + 1,
                ))
            },
            |_, revision| revision,
        )
    }

    pub fn datasheet(&self, campaign: CampaignId) -> Result<Datasheet, CurationError> {
        Ok(self.read().campaign(campaign)?.datasheet.clone())
    }

    pub fn edit_dimension_definition(
        &self,
        campaign: CampaignId,
        dimension: &str,
        new_text: &str,
        user: &UserId,
    ) -> Result<u64, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                let dim = st
                    .campaign(campaign)?
                    .schema
                    .dimension(dimension)
                    .ok_or_else(|| CurationError::UnknownDimension(dimension.to_string()))?;
                Ok((
                    Some(Event::DefinitionEdited {
                        campaign,
                        dimension: dimension.to_string(),
                        text: new_text.to_string(),
                        by: user.clone(),
                        at: now,
                    }),
                    dim.definition_text.revision() + 1,
                ))
            },
            |_, revision| revision,
        )
    }

    /// Appends a post, creating the topic when the title is new. Replies
    /// nest one level: a reply to a reply attaches to the top-level post.
    pub fn post_to_thread(
        &self,
        scope: ThreadScope,
        topic_title: &str,
        body: &str,
        user: &UserId,
        parent: Option<PostId>,
    ) -> Result<PostId, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                let campaign = match scope {
                    ThreadScope::Campaign(c) => {
                        st.campaign(c).map_err(|_| CurationError::UnknownScope)?
                    }
                    ThreadScope::Entity(e) => {
                        st.entity(e).map_err(|_| CurationError::UnknownScope)?.0
                    }
                };
                let title = topic_title.trim();
                if title.is_empty() {
                    return Err(CurationError::EmptyTopicTitle);
                }
                let thread = campaign.thread(scope).ok_or(CurationError::UnknownScope)?;
                let parent = match parent {
                    None => None,
                    Some(pid) => {
                        let topic = thread
                            .topics
                            .iter()
                            .find(|t| t.title == title)
                            .ok_or(CurationError::UnknownParent(pid))?;
                        let post = topic
                            .posts
                            .iter()
                            .find(|p| p.id == pid)
                            .ok_or(CurationError::UnknownParent(pid))?;
                        Some(post.parent.unwrap_or(post.id))
                    }
                };
                let id = st.next_post_id();
                Ok((
                    Some(Event::Posted {
                        campaign: campaign.id,
                        scope,
                        topic: title.to_string(),
                        post: Post {
                            id,
                            author: user.clone(),
                            body: body.to_string(),
                            timestamp: now,
                            parent,
                        },
                    }),
                    id,
                ))
            },
            |_, id| id,
        )
    }

    pub fn thread(&self, scope: ThreadScope) -> Result<TalkThread, CurationError> {
        let st = self.read();
        let campaign = match scope {
            ThreadScope::Campaign(c) => st.campaign(c).map_err(|_| CurationError::UnknownScope)?,
            ThreadScope::Entity(e) => st.entity(e).map_err(|_| CurationError::UnknownScope)?.0,
        };
        campaign
            .thread(scope)
            .cloned()
            .ok_or(CurationError::UnknownScope)
    }

    /// Per-entity stats for every included entity, plus aggregates.
    pub fn campaign_stats(&self, campaign: CampaignId) -> Result<CampaignStats, CurationError> {
        let st = self.read();
        let c = st.campaign(campaign)?;
        let included: Vec<&EntityRecord> =
            c.entities.values().filter(|r| !r.entity.excluded).collect();
        let entities: Vec<EntityStats> = included
            .iter()
            .map(|r| EntityStats {
                entity: r.entity.id,
                external_ref: r.entity.external_ref.clone(),
                n_labels: r.labels.len(),
                dimensions: dimension_stats(&c.schema, &r.labels, c.thresholds),
            })
            .collect();
        let aggregates = metrics::aggregate(
            &c.schema,
            included
                .iter()
                .map(|r| (r.labels.as_slice(), r.primary.as_ref())),
            &entities,
        );
        Ok(CampaignStats {
            entities,
            aggregates,
        })
    }

    /// Evaluates each prediction set against primary labels on `dimension`,
    /// over included, primary-labeled entities scored by every model.
    pub fn compare_models(
        &self,
        campaign: CampaignId,
        dimension: &str,
        sets: &[PredictionSet],
        weighting: Weighting,
    ) -> Result<ModelComparison, CurationError> {
        let st = self.read();
        let c = st.campaign(campaign)?;
        let dim = c
            .schema
            .dimension(dimension)
            .ok_or_else(|| CurationError::UnknownDimension(dimension.to_string()))?;
        let rows: Vec<EvalRow> = c
            .entities
            .values()
            .filter(|r| !r.entity.excluded)
            .filter_map(|r| {
                let truth = r.primary.as_ref()?.choice(dimension)?;
                let stats = dimension_stats(&c.schema, &r.labels, c.thresholds);
                let s = stats.into_iter().find(|s| s.dimension == dimension)?;
                Some(EvalRow {
                    external_ref: r.entity.external_ref.clone(),
                    truth,
                    n_labels: r.labels.len(),
                    disagreement: s.disagreement,
                    low_conf_fraction: s.low_conf_fraction,
                    quadrant: s.quadrant,
                })
            })
            .collect();
        eval::compare(dim, &rows, sets, weighting)
    }
}

fn campaign_view(c: &CampaignRecord) -> CampaignView {
    CampaignView {
        id: c.id,
        name: c.name.clone(),
        schema: c.schema.clone(),
        datasheet: c.datasheet.clone(),
        thresholds: c.thresholds,
        created_by: c.created_by.clone(),
        created_at: c.created_at,
        n_entities: c.entities.len(),
        n_excluded: c.entities.values().filter(|r| r.entity.excluded).count(),
    }
}

pub(crate) fn prepare_entity(
    st: &State,
    now: Timestamp,
    campaign: CampaignId,
    external_ref: &str,
    content_snapshot: &str,
    user: &UserId,
) -> Result<Entity, CurationError> {
    st.require_member(user)?;
    let c = st.campaign(campaign)?;
    if external_ref.trim().is_empty() {
        return Err(CurationError::SchemaMismatch(
            "external reference is empty".into(),
        ));
    }
    if let Some(&existing) = c.by_ref.get(external_ref) {
        return Err(CurationError::DuplicateExternalRef {
            external_ref: external_ref.to_string(),
            existing,
        });
    }
    Ok(Entity {
        id: st.next_entity_id(),
        campaign,
        external_ref: external_ref.to_string(),
        content_snapshot: content_snapshot.to_string(),
        added_by: user.clone(),
        added_at: now,
        excluded: false,
        exclusion_reason: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SteppingClock;
    use crate::fixtures;
    use crate::model::{
        Choice, Confidence, LabelValue, DATA_STATEMENT, INCLUSION_CRITERIA, LABEL_DEFINITIONS,
    };
    use std::sync::Arc;

    fn service() -> Curation {
        let c = Curation::with_clock(Arc::new(SteppingClock::fixture()));
        for u in ["ana", "ben", "cy"] {
            c.register_member(UserId::new(u), u, None).unwrap();
        }
        c
    }

    fn label(c: &Curation, user: &str, e: EntityId, damage: Choice, conf: Confidence) {
        c.submit_individual_label(
            &user.into(),
            e,
            &[
                LabelValue::new("damage", damage, conf),
                LabelValue::new("intent", Choice::Negative, Confidence::High),
            ],
            None,
        )
        .unwrap();
    }

    #[test]
    fn create_campaign_validation() {
        let c = service();
        let ana = UserId::new("ana");
        let id = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        assert_eq!(c.campaign(id).unwrap().schema.dimensions.len(), 2);
        assert_eq!(
            c.create_campaign(fixtures::edit_quality_campaign("q"), &ana),
            Err(CurationError::DuplicateName("q".into()))
        );
        let mut empty = fixtures::edit_quality_campaign("e");
        empty.dimensions.clear();
        assert!(matches!(
            c.create_campaign(empty, &ana),
            Err(CurationError::InvalidSchema(_))
        ));
        let mut no_statement = fixtures::edit_quality_campaign("s");
        no_statement.datasheet.retain(|s| s.name != DATA_STATEMENT);
        assert!(matches!(
            c.create_campaign(no_statement, &ana),
            Err(CurationError::InvalidSchema(_))
        ));
    }

    #[test]
    fn add_entity_dedups_refs() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        let e = c.add_entity(camp, "diff/9", "text", &ana).unwrap();
        assert_eq!(
            c.add_entity(camp, "diff/9", "other", &ana),
            Err(CurationError::DuplicateExternalRef {
                external_ref: "diff/9".into(),
                existing: e
            })
        );
        label(&c, "ben", e, Choice::Positive, Confidence::High);
        let page = c
            .list_table(camp, None, SortMode::FewestLabels, 0, 50)
            .unwrap();
        assert_eq!(page.rows.len(), 1);
        assert_eq!(page.rows[0].n_labels, 1);
    }

    #[test]
    fn sorts_follow_their_keys() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        let e1 = c.add_entity(camp, "a", "", &ana).unwrap();
        let e2 = c.add_entity(camp, "b", "", &ana).unwrap();
        let e3 = c.add_entity(camp, "c", "", &ana).unwrap();
        // counts {3,1,2}; disagreement {0, 1.0, 0.25}
        for u in ["ana", "ben", "cy"] {
            label(&c, u, e1, Choice::Positive, Confidence::High);
        }
        label(&c, "ana", e2, Choice::Positive, Confidence::High);
        label(&c, "ana", e3, Choice::Positive, Confidence::High);
        label(&c, "ben", e3, Choice::Positive, Confidence::Low);

        let order = |mode| -> Vec<EntityId> {
            c.list_table(camp, Some(&ana), mode, 0, 50)
                .unwrap()
                .rows
                .iter()
                .map(|r| r.entity)
                .collect()
        };
        assert_eq!(order(SortMode::FewestLabels), vec![e2, e3, e1]);

        let ben = UserId::new("ben");
        label(&c, "ben", e2, Choice::Negative, Confidence::High);
        let page = c
            .list_table(camp, None, SortMode::HighestDisagreement, 0, 50)
            .unwrap();
        let d: Vec<f64> = page.rows.iter().map(|r| r.disagreement).collect();
        assert_eq!(d, vec![1.0, 0.25, 0.0]);

        let mine = c
            .list_table(camp, Some(&ben), SortMode::DiffersFromMine, 0, 50)
            .unwrap();
        assert_eq!(mine.rows[0].entity, e2);
        assert!(mine.rows[0].differs_from_viewer);
        assert!(mine.rows[1..].iter().all(|r| !r.differs_from_viewer));
    }

    #[test]
    fn empty_campaign_table_and_stats() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        assert!(c
            .list_table(camp, None, SortMode::RecentActivity, 0, 0)
            .unwrap()
            .rows
            .is_empty());
        let stats = c.campaign_stats(camp).unwrap();
        assert!(stats.entities.is_empty());
        assert_eq!(stats.aggregates.n_entities, 0);
        assert!(stats
            .aggregates
            .composition
            .iter()
            .all(|p| p.positive_fraction == 0.0));
        assert_eq!(
            c.list_table(CampaignId(77), None, SortMode::RecentActivity, 0, 0),
            Err(CurationError::UnknownCampaign(CampaignId(77)))
        );
    }

    #[test]
    fn exclusion_is_soft_and_audited() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        let keep = c.add_entity(camp, "keep", "", &ana).unwrap();
        let drop = c.add_entity(camp, "drop", "", &ana).unwrap();
        label(&c, "ana", keep, Choice::Positive, Confidence::High);
        label(&c, "ana", drop, Choice::Negative, Confidence::High);
        let before = c.campaign_stats(camp).unwrap();
        assert_eq!(before.aggregates.composition[0].positive_fraction, 0.5);

        assert_eq!(
            c.exclude_entity(camp, drop, &ana, "revision deleted")
                .unwrap(),
            ExclusionOutcome::Excluded
        );
        assert_eq!(
            c.exclude_entity(camp, drop, &ana, "again").unwrap(),
            ExclusionOutcome::AlreadyExcluded
        );
        let rows = c
            .list_table(camp, None, SortMode::FewestLabels, 0, 50)
            .unwrap()
            .rows;
        assert_eq!(
            rows.iter().map(|r| r.entity).collect::<Vec<_>>(),
            vec![keep]
        );
        let after = c.campaign_stats(camp).unwrap();
        assert_eq!(after.entities.len(), 1);
        assert_eq!(after.aggregates.composition[0].positive_fraction, 1.0);

        let sheet = c.datasheet(camp).unwrap();
        let criteria = sheet.section(INCLUSION_CRITERIA).unwrap();
        assert_eq!(criteria.text.revisions.len(), 2);
        assert!(criteria.text.current().contains("drop"));
        assert!(criteria.text.current().contains("revision deleted"));
        assert!(c.entity_view(None, drop).unwrap().excluded);
    }

    #[test]
    fn datasheet_revisions_append() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        assert_eq!(
            c.edit_datasheet_section(camp, LABEL_DEFINITIONS, "v2", &ana)
                .unwrap(),
            2
        );
        assert_eq!(
            c.edit_datasheet_section(camp, LABEL_DEFINITIONS, "v2", &ana)
                .unwrap(),
            3
        );
        assert_eq!(
            c.edit_datasheet_section(camp, LABEL_DEFINITIONS, "v4", &ana)
                .unwrap(),
            4
        );
        let sheet = c.datasheet(camp).unwrap();
        assert_eq!(
            sheet
                .section(LABEL_DEFINITIONS)
                .unwrap()
                .text
                .revisions
                .len(),
            4
        );
        assert_eq!(
            c.edit_datasheet_section(camp, "appendix", "x", &ana),
            Err(CurationError::UnknownSection("appendix".into()))
        );
        assert_eq!(
            c.edit_dimension_definition(camp, "damage", "new", &ana)
                .unwrap(),
            2
        );
        assert!(matches!(
            c.edit_dimension_definition(camp, "tone", "x", &ana),
            Err(CurationError::UnknownDimension(_))
        ));
    }

    #[test]
    fn threads_and_replies() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        let e = c.add_entity(camp, "x", "", &ana).unwrap();
        assert!(
            !c.list_table(camp, None, SortMode::FewestLabels, 0, 9)
                .unwrap()
                .rows[0]
                .has_discussion
        );

        let root = c
            .post_to_thread(
                ThreadScope::Entity(e),
                "Is this damaging?",
                "I think so @ben",
                &ana,
                None,
            )
            .unwrap();
        let reply = c
            .post_to_thread(
                ThreadScope::Entity(e),
                "Is this damaging?",
                "no",
                &"ben".into(),
                Some(root),
            )
            .unwrap();
        let nested = c
            .post_to_thread(
                ThreadScope::Entity(e),
                "Is this damaging?",
                "hm",
                &"cy".into(),
                Some(reply),
            )
            .unwrap();
        let thread = c.thread(ThreadScope::Entity(e)).unwrap();
        assert_eq!(thread.topics.len(), 1);
        let posts = &thread.topics[0].posts;
        assert_eq!(posts[1].parent, Some(root));
        assert_eq!(thread.find_post(nested).unwrap().1.parent, Some(root));
        assert!(
            c.list_table(camp, None, SortMode::FewestLabels, 0, 9)
                .unwrap()
                .rows[0]
                .has_discussion
        );

        let mentions = c.list_notifications(&"ben".into(), false).unwrap();
        assert_eq!(mentions.len(), 1);
        assert_eq!(mentions[0].kind, crate::state::NotificationKind::Mentioned);

        c.post_to_thread(
            ThreadScope::Campaign(camp),
            "What does damaging mean?",
            "...",
            &ana,
            None,
        )
        .unwrap();
        assert_eq!(
            c.thread(ThreadScope::Campaign(camp)).unwrap().topics.len(),
            1
        );

        assert_eq!(
            c.post_to_thread(ThreadScope::Entity(EntityId(404)), "t", "b", &ana, None),
            Err(CurationError::UnknownScope)
        );
        assert_eq!(
            c.post_to_thread(ThreadScope::Entity(e), "other", "b", &ana, Some(root)),
            Err(CurationError::UnknownParent(root))
        );
        assert_eq!(
            c.post_to_thread(ThreadScope::Entity(e), "  ", "b", &ana, None),
            Err(CurationError::EmptyTopicTitle)
        );
    }

    #[test]
    fn single_label_is_insufficient() {
        let c = service();
        let ana = UserId::new("ana");
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("q"), &ana)
            .unwrap();
        let e = c.add_entity(camp, "x", "", &ana).unwrap();
        label(&c, "ana", e, Choice::Positive, Confidence::Low);
        let stats = c.campaign_stats(camp).unwrap();
        assert!(stats.entities[0]
            .dimensions
            .iter()
            .all(|d| d.quadrant == metrics::Quadrant::Insufficient && d.disagreement == 0.0));
        assert_eq!(stats.aggregates.labeler_contributions[&ana], 1);
    }

    #[test]
    fn sort_mode_parses() {
        for m in SortMode::ALL {
            let s = serde_json::to_string(&m).unwrap();
            assert_eq!(s.trim_matches('"').parse::<SortMode>().unwrap(), m);
        }
        assert!("alphabetical".parse::<SortMode>().is_err());
    }
}
