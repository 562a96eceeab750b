//! Label lifecycle: individual submissions, the primary label and its
//! compare-and-set edits, disagreement nudges and labeler notifications.

use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::metrics::{dimension_stats, DimensionStats};
use crate::model::{
    choices_differ, CampaignId, Entity, EntityId, IndividualLabel, LabelValue, PrimaryLabel,
    PrimaryValue, TalkThread, Timestamp, UserId,
};
use crate::service::Curation;
use crate::state::{Event, State};

/// Shown to editors before they change a primary label.
pub const PRIMARY_EDIT_ACKNOWLEDGEMENT: &str = "Editing the primary label changes the shared \
dataset for everyone. Make the change if you believe it is right, explain it on the talk page, \
and respect the labels and arguments of other members.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmitStatus {
    RecordedAgree,
    RecordedDisagreeNudge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub status: SubmitStatus,
    pub entity: EntityId,
    pub campaign: CampaignId,
    pub primary_snapshot: Vec<PrimaryValue>,
    pub primary_revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    pub entity: Entity,
    pub excluded: bool,
    pub primary: Option<PrimaryLabel>,
    /// Ordered by `created_at` ascending.
    pub labels: Vec<IndividualLabel>,
    pub own_label: Option<IndividualLabel>,
    pub stats: Vec<DimensionStats>,
    pub talk: TalkThread,
    pub requires_acknowledgement: bool,
}

/// What a client needs to render a primary-label edit form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryEditForm {
    pub primary: PrimaryLabel,
    pub requires_acknowledgement: bool,
    pub acknowledgement: String,
}

pub(crate) fn prepare_submit(
    st: &State,
    now: Timestamp,
    user: &UserId,
    entity_id: EntityId,
    values: &[LabelValue],
    note: Option<String>,
) -> Result<(Event, SubmitOutcome), CurationError> {
    st.require_member(user)?;
    let (campaign, record) = st.entity(entity_id)?;
    if record.entity.excluded {
        return Err(CurationError::ExcludedEntity(entity_id));
    }
    let values = campaign.schema.normalize_values(values)?;
    let created_at = record.label_of(user).map_or(now, |l| l.created_at);
    let label = IndividualLabel {
        author: user.clone(),
        entity: entity_id,
        values,
        note: note.filter(|n| !n.trim().is_empty()),
        created_at,
        updated_at: now,
    };
    let outcome = match &record.primary {
        None => SubmitOutcome {
            status: SubmitStatus::RecordedAgree,
            entity: entity_id,
            campaign: campaign.id,
            primary_snapshot: label.choices(),
            primary_revision: 1,
        },
        Some(primary) => SubmitOutcome {
            status: if choices_differ(&label.values, &primary.values) {
                SubmitStatus::RecordedDisagreeNudge
            } else {
                SubmitStatus::RecordedAgree
            },
            entity: entity_id,
            campaign: campaign.id,
            primary_snapshot: primary.values.clone(),
            primary_revision: primary.revision,
        },
    };
    Ok((Event::LabelSubmitted { label }, outcome))
}

impl Curation {
    /// Records (or replaces) `user`'s label on an entity. The first label on
    /// an entity seeds its primary label; later ones never change it.
    pub fn submit_individual_label(
        &self,
        user: &UserId,
        entity: EntityId,
        values: &[LabelValue],
        note: Option<String>,
    ) -> Result<SubmitOutcome, CurationError> {
        self.commit(
            |st, now| {
                let (event, outcome) = prepare_submit(st, now, user, entity, values, note)?;
                Ok((Some(event), outcome))
            },
            |_, outcome| outcome,
        )
    }

    /// Compare-and-set edit of the primary label. Succeeds only when
    /// `base_revision` is the current revision; every earlier labeler other
    /// than the editor is notified.
    pub fn edit_primary_label(
        &self,
        user: &UserId,
        entity: EntityId,
        new_values: &[PrimaryValue],
        base_revision: u64,
        rationale: Option<String>,
    ) -> Result<PrimaryLabel, CurationError> {
        self.commit(
            |st, now| {
                st.require_member(user)?;
                let (campaign, record) = st.entity(entity)?;
                if record.entity.excluded {
                    return Err(CurationError::ExcludedEntity(entity));
                }
                let primary = record
                    .primary
                    .as_ref()
                    .ok_or(CurationError::NoPrimaryYet(entity))?;
                if primary.revision != base_revision {
                    return Err(CurationError::RevisionConflict {
                        current: primary.revision,
                    });
                }
                let values = campaign.schema.normalize_choices(new_values)?;
                Ok((
                    Some(Event::PrimaryEdited {
                        entity,
                        values,
                        editor: user.clone(),
                        at: now,
                        rationale: rationale.filter(|r| !r.trim().is_empty()),
                    }),
                    (),
                ))
            },
            |st, ()| {
                st.entity(entity)
                    .ok()
                    .and_then(|(_, r)| r.primary.clone())
                    .expect("primary exists after a successful edit")
            },
        )
    }

    pub fn primary_label(&self, entity: EntityId) -> Result<Option<PrimaryLabel>, CurationError> {
        let st = self.read();
        let (_, record) = st.entity(entity)?;
        Ok(record.primary.clone())
    }

    pub fn primary_edit_form(&self, entity: EntityId) -> Result<PrimaryEditForm, CurationError> {
        let primary = self
            .primary_label(entity)?
            .ok_or(CurationError::NoPrimaryYet(entity))?;
        Ok(PrimaryEditForm {
            primary,
            requires_acknowledgement: true,
            acknowledgement: PRIMARY_EDIT_ACKNOWLEDGEMENT.to_string(),
        })
    }

    /// Read-only snapshot of an entity page. Excluded entities stay
    /// retrievable by id and carry `excluded = true`.
    pub fn entity_view(
        &self,
        viewer: Option<&UserId>,
        entity: EntityId,
    ) -> Result<EntityView, CurationError> {
        let st = self.read();
        let (campaign, record) = st.entity(entity)?;
        let mut labels = record.labels.clone();
        labels.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then(a.author.cmp(&b.author))
        });
        Ok(EntityView {
            entity: record.entity.clone(),
            excluded: record.entity.excluded,
            primary: record.primary.clone(),
            own_label: viewer.and_then(|v| record.label_of(v).cloned()),
            stats: dimension_stats(&campaign.schema, &record.labels, campaign.thresholds),
            labels,
            talk: record.talk.clone(),
            requires_acknowledgement: true,
        })
    }

    pub fn entity_by_ref(
        &self,
        campaign: CampaignId,
        external_ref: &str,
    ) -> Result<Option<EntityId>, CurationError> {
        let st = self.read();
        Ok(st.campaign(campaign)?.by_ref.get(external_ref).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SteppingClock;
    use crate::fixtures;
    use crate::model::{Choice, Confidence};
    use std::sync::Arc;

    use Choice::{Negative as N, Positive as P};
    use Confidence::{High as H, Low as L};

    fn setup() -> (Curation, CampaignId, EntityId) {
        let c = Curation::with_clock(Arc::new(SteppingClock::fixture()));
        for u in ["ana", "ben", "cy", "dee"] {
            c.register_member(UserId::new(u), u, None).unwrap();
        }
        let camp = c
            .create_campaign(fixtures::edit_quality_campaign("test"), &UserId::new("ana"))
            .unwrap();
        let e = c
            .add_entity(camp, "diff/1", "snapshot", &UserId::new("ana"))
            .unwrap();
        (c, camp, e)
    }

    fn vals(d: Choice, dc: Confidence, i: Choice, ic: Confidence) -> Vec<LabelValue> {
        vec![
            LabelValue::new("damage", d, dc),
            LabelValue::new("intent", i, ic),
        ]
    }

    fn pv(d: Choice, i: Choice) -> Vec<PrimaryValue> {
        vec![
            PrimaryValue::new("damage", d),
            PrimaryValue::new("intent", i),
        ]
    }

    #[test]
    fn first_label_seeds_primary() {
        let (c, _, e) = setup();
        let out = c
            .submit_individual_label(&"ana".into(), e, &vals(P, H, N, H), None)
            .unwrap();
        assert_eq!(out.status, SubmitStatus::RecordedAgree);
        let p = c.primary_label(e).unwrap().unwrap();
        assert_eq!(p.values, pv(P, N));
        assert_eq!(p.revision, 1);
    }

    #[test]
    fn nudge_ignores_confidence() {
        let (c, _, e) = setup();
        c.submit_individual_label(&"ana".into(), e, &vals(P, H, N, H), None)
            .unwrap();
        let same = c
            .submit_individual_label(&"ben".into(), e, &vals(P, L, N, L), None)
            .unwrap();
        assert_eq!(same.status, SubmitStatus::RecordedAgree);
        let differ = c
            .submit_individual_label(&"cy".into(), e, &vals(P, H, P, H), None)
            .unwrap();
        assert_eq!(differ.status, SubmitStatus::RecordedDisagreeNudge);
        // primary untouched by later submissions
        assert_eq!(c.primary_label(e).unwrap().unwrap().values, pv(P, N));
    }

    #[test]
    fn resubmission_updates_in_place() {
        let (c, _, e) = setup();
        let ana = UserId::new("ana");
        c.submit_individual_label(&ana, e, &vals(P, H, N, H), None)
            .unwrap();
        c.submit_individual_label(&ana, e, &vals(N, L, N, H), Some("changed my mind".into()))
            .unwrap();
        let view = c.entity_view(Some(&ana), e).unwrap();
        assert_eq!(view.labels.len(), 1);
        let own = view.own_label.unwrap();
        assert!(own.updated_at > own.created_at);
        assert_eq!(own.note.as_deref(), Some("changed my mind"));
        assert_eq!(view.primary.unwrap().history.len(), 1);
    }

    #[test]
    fn primary_edit_cas_and_notifications() {
        let (c, _, e) = setup();
        for u in ["ana", "ben", "cy"] {
            c.submit_individual_label(&u.into(), e, &vals(P, H, N, H), None)
                .unwrap();
        }
        let p = c
            .edit_primary_label(&"ben".into(), e, &pv(N, N), 1, Some("see talk".into()))
            .unwrap();
        assert_eq!(p.revision, 2);
        assert_eq!(p.history[1].rationale.as_deref(), Some("see talk"));

        let stale = c.edit_primary_label(&"cy".into(), e, &pv(P, N), 1, None);
        assert_eq!(stale, Err(CurationError::RevisionConflict { current: 2 }));
        assert_eq!(c.primary_label(e).unwrap().unwrap().revision, 2);

        assert_eq!(c.list_notifications(&"ana".into(), true).unwrap().len(), 1);
        assert_eq!(c.list_notifications(&"cy".into(), true).unwrap().len(), 1);
        assert!(c
            .list_notifications(&"ben".into(), false)
            .unwrap()
            .is_empty());
        assert!(c
            .list_notifications(&"dee".into(), false)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sole_labeler_edit_notifies_nobody() {
        let (c, _, e) = setup();
        c.submit_individual_label(&"ana".into(), e, &vals(P, H, N, H), None)
            .unwrap();
        c.edit_primary_label(&"ana".into(), e, &pv(N, N), 1, None)
            .unwrap();
        for u in ["ana", "ben", "cy", "dee"] {
            assert!(c.list_notifications(&u.into(), false).unwrap().is_empty());
        }
    }

    #[test]
    fn marking_read_is_idempotent() {
        let (c, _, e) = setup();
        c.submit_individual_label(&"ana".into(), e, &vals(P, H, N, H), None)
            .unwrap();
        c.edit_primary_label(&"ben".into(), e, &pv(N, N), 1, None)
            .unwrap();
        let ana = UserId::new("ana");
        assert_eq!(c.mark_notifications_read(&ana, None).unwrap(), 1);
        assert_eq!(c.mark_notifications_read(&ana, None).unwrap(), 0);
        assert!(c.list_notifications(&ana, true).unwrap().is_empty());
        assert_eq!(c.list_notifications(&ana, false).unwrap().len(), 1);
    }

    #[test]
    fn submit_errors() {
        let (c, camp, e) = setup();
        let ana = UserId::new("ana");
        assert_eq!(
            c.submit_individual_label(&ana, EntityId(999), &vals(P, H, N, H), None),
            Err(CurationError::UnknownEntity(EntityId(999)))
        );
        assert!(matches!(
            c.submit_individual_label(&ana, e, &vals(P, H, N, H)[..1], None),
            Err(CurationError::SchemaMismatch(_))
        ));
        assert_eq!(
            c.edit_primary_label(&ana, e, &pv(P, P), 0, None),
            Err(CurationError::NoPrimaryYet(e))
        );
        c.exclude_entity(camp, e, &ana, "content removed").unwrap();
        assert_eq!(
            c.submit_individual_label(&ana, e, &vals(P, H, N, H), None),
            Err(CurationError::ExcludedEntity(e))
        );
        assert!(matches!(
            c.submit_individual_label(&"nobody".into(), e, &vals(P, H, N, H), None),
            Err(CurationError::UnknownUser(_))
        ));
    }

    #[test]
    fn entity_view_lists_labels_in_order() {
        let (c, camp, e) = setup();
        for (u, note) in [
            ("cy", Some("looks like vandalism")),
            ("ana", None),
            ("ben", Some("unsure")),
        ] {
            c.submit_individual_label(&u.into(), e, &vals(P, L, N, H), note.map(String::from))
                .unwrap();
        }
        let view = c.entity_view(Some(&"dee".into()), e).unwrap();
        let authors: Vec<&str> = view.labels.iter().map(|l| l.author.as_str()).collect();
        assert_eq!(authors, vec!["cy", "ana", "ben"]);
        assert!(view.own_label.is_none());
        assert_eq!(view.labels[0].note.as_deref(), Some("looks like vandalism"));

        c.exclude_entity(camp, e, &"ana".into(), "hidden").unwrap();
        let view = c.entity_view(None, e).unwrap();
        assert!(view.excluded);
    }
}
