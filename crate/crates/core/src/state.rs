//! In-memory state and the journal events that mutate it.
//!
//! Every mutation is expressed as an [`Event`]. Live operations validate
//! against the current [`State`], append the event to the journal, then
//! apply it; recovery applies the journal in order. `apply` is therefore the
//! only code path that changes state.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::metrics::QuadrantThresholds;
use crate::model::{
    CampaignId, Datasheet, Entity, EntityId, IndividualLabel, LabelSchema, NotificationId, Post,
    PostId, PrimaryLabel, PrimaryValue, TalkThread, ThreadScope, Timestamp, Topic, UserId,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: UserId,
    pub display_name: String,
    /// Hex SHA-256 of the member's bearer token, if one was issued.
    pub credential_digest: Option<String>,
    pub registered_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    PrimaryChanged,
    Mentioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: NotificationId,
    pub recipient: UserId,
    pub campaign: CampaignId,
    pub entity: Option<EntityId>,
    pub kind: NotificationKind,
    pub actor: UserId,
    pub old_values: Option<Vec<PrimaryValue>>,
    pub new_values: Option<Vec<PrimaryValue>>,
    pub post: Option<PostId>,
    pub created_at: Timestamp,
    pub read: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity: Entity,
    /// One label per author, in first-submission order.
    pub labels: Vec<IndividualLabel>,
    pub primary: Option<PrimaryLabel>,
    pub talk: TalkThread,
}

impl EntityRecord {
    pub fn new(entity: Entity) -> Self {
        let talk = TalkThread::new(ThreadScope::Entity(entity.id));
        Self {
            entity,
            labels: Vec::new(),
            primary: None,
            talk,
        }
    }

    pub fn label_of(&self, user: &UserId) -> Option<&IndividualLabel> {
        self.labels.iter().find(|l| &l.author == user)
    }

    pub fn last_activity(&self) -> Timestamp {
        let mut t = self.entity.added_at;
        for label in &self.labels {
            t = t.max(label.updated_at);
        }
        if let Some(at) = self.primary.as_ref().and_then(PrimaryLabel::last_edited_at) {
            t = t.max(at);
        }
        if let Some(at) = self.talk.last_post_at() {
            t = t.max(at);
        }
        t
    }

    fn upsert_label(&mut self, label: &IndividualLabel) {
        match self.labels.iter_mut().find(|l| l.author == label.author) {
            Some(existing) => {
                existing.values = label.values.clone();
                existing.note = label.note.clone();
                existing.updated_at = label.updated_at;
            }
            None => {
                if self.primary.is_none() {
                    self.primary = Some(PrimaryLabel::initial(
                        self.entity.id,
                        label.choices(),
                        label.author.clone(),
                        label.created_at,
                    ));
                }
                self.labels.push(label.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub id: CampaignId,
    pub name: String,
    pub schema: LabelSchema,
    pub datasheet: Datasheet,
    pub thresholds: QuadrantThresholds,
    pub talk: TalkThread,
    pub created_by: UserId,
    pub created_at: Timestamp,
    /// Set when authors are already pseudonyms (e.g. imported from an export).
    pub authors_pseudonymized: bool,
    #[serde(with = "entity_list")]
    pub entities: BTreeMap<EntityId, EntityRecord>,
    #[serde(skip)]
    pub by_ref: HashMap<String, EntityId>,
}

/// Stores the entity map as a list: journal events are internally tagged,
/// and serde cannot read numeric map keys back through that buffering.
mod entity_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::EntityRecord;
    use crate::model::EntityId;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<EntityId, EntityRecord>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<EntityId, EntityRecord>, D::Error> {
        let list = Vec::<EntityRecord>::deserialize(d)?;
        Ok(list.into_iter().map(|r| (r.entity.id, r)).collect())
    }
}

impl CampaignRecord {
    fn reindex(&mut self) {
        self.by_ref = self
            .entities
            .values()
            .map(|r| (r.entity.external_ref.clone(), r.entity.id))
            .collect();
    }

    pub fn thread(&self, scope: ThreadScope) -> Option<&TalkThread> {
        match scope {
            ThreadScope::Campaign(c) if c == self.id => Some(&self.talk),
            ThreadScope::Entity(e) => self.entities.get(&e).map(|r| &r.talk),
            _ => None,
        }
    }

    fn thread_mut(&mut self, scope: ThreadScope) -> Option<&mut TalkThread> {
        match scope {
            ThreadScope::Campaign(c) if c == self.id => Some(&mut self.talk),
            ThreadScope::Entity(e) => self.entities.get_mut(&e).map(|r| &mut r.talk),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    MemberRegistered {
        member: Member,
    },
    CampaignCreated {
        campaign: Box<CampaignRecord>,
    },
    CampaignImported {
        campaign: Box<CampaignRecord>,
        new_members: Vec<Member>,
    },
    ThresholdsChanged {
        campaign: CampaignId,
        thresholds: QuadrantThresholds,
    },
    EntityAdded {
        entity: Entity,
    },
    LabelSubmitted {
        label: IndividualLabel,
    },
    /// Entity creation and its first label, committed together.
    QuickLabeled {
        entity: Entity,
        label: IndividualLabel,
    },
    PrimaryEdited {
        entity: EntityId,
        values: Vec<PrimaryValue>,
        editor: UserId,
        at: Timestamp,
        rationale: Option<String>,
    },
    EntityExcluded {
        entity: EntityId,
        by: UserId,
        reason: String,
        at: Timestamp,
        audit_line: String,
    },
    DatasheetEdited {
        campaign: CampaignId,
        section: String,
        text: String,
        by: UserId,
        at: Timestamp,
    },
    DefinitionEdited {
        campaign: CampaignId,
        dimension: String,
        text: String,
        by: UserId,
        at: Timestamp,
    },
    Posted {
        campaign: CampaignId,
        scope: ThreadScope,
        topic: String,
        post: Post,
    },
    NotificationsRead {
        user: UserId,
        ids: Option<Vec<NotificationId>>,
    },
}

#[derive(Debug, Default)]
pub struct State {
    pub members: BTreeMap<UserId, Member>,
    pub campaigns: BTreeMap<CampaignId, CampaignRecord>,
    pub entity_index: HashMap<EntityId, CampaignId>,
    pub notifications: BTreeMap<UserId, Vec<Notification>>,
    next_campaign: u64,
    next_entity: u64,
    next_post: u64,
    next_notification: u64,
}

fn corrupt(what: impl std::fmt::Display) -> CurationError {
    CurationError::Storage(format!("journal inconsistent with state: {what}"))
}

/// `@name` tokens in a post body.
pub fn mentions(body: &str) -> BTreeSet<UserId> {
    let mut out = BTreeSet::new();
    let mut rest = body;
    while let Some(at) = rest.find('@') {
        let preceded_by_word = rest[..at]
            .chars()
            .next_back()
            .is_some_and(|c| c.is_alphanumeric());
        let tail = &rest[at + 1..];
        let end = tail
            .find(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '-' | '.')))
            .unwrap_or(tail.len());
        let name = tail[..end].trim_end_matches('.');
        if !preceded_by_word && !name.is_empty() {
            out.insert(UserId::new(name));
        }
        rest = &tail[end..];
    }
    out
}

impl State {
    pub fn next_campaign_id(&self) -> CampaignId {
        CampaignId(self.next_campaign.max(1))
    }

    pub fn next_entity_id(&self) -> EntityId {
        EntityId(self.next_entity.max(1))
    }

    pub fn next_post_id(&self) -> PostId {
        PostId(self.next_post.max(1))
    }

    pub fn campaign(&self, id: CampaignId) -> Result<&CampaignRecord, CurationError> {
        self.campaigns
            .get(&id)
            .ok_or(CurationError::UnknownCampaign(id))
    }

    pub fn entity(&self, id: EntityId) -> Result<(&CampaignRecord, &EntityRecord), CurationError> {
        let campaign = self
            .entity_index
            .get(&id)
            .and_then(|c| self.campaigns.get(c))
            .ok_or(CurationError::UnknownEntity(id))?;
        let record = campaign
            .entities
            .get(&id)
            .ok_or(CurationError::UnknownEntity(id))?;
        Ok((campaign, record))
    }

    pub fn require_member(&self, user: &UserId) -> Result<&Member, CurationError> {
        self.members
            .get(user)
            .ok_or_else(|| CurationError::UnknownUser(user.clone()))
    }

    fn entity_mut(&mut self, id: EntityId) -> Result<&mut EntityRecord, CurationError> {
        let campaign = *self.entity_index.get(&id).ok_or_else(|| corrupt(id))?;
        self.campaigns
            .get_mut(&campaign)
            .and_then(|c| c.entities.get_mut(&id))
            .ok_or_else(|| corrupt(id))
    }

    fn campaign_mut(&mut self, id: CampaignId) -> Result<&mut CampaignRecord, CurationError> {
        self.campaigns.get_mut(&id).ok_or_else(|| corrupt(id))
    }

    fn insert_entity(&mut self, entity: Entity) -> Result<&mut EntityRecord, CurationError> {
        let id = entity.id;
        let campaign_id = entity.campaign;
        self.next_entity = self.next_entity.max(id.0 + 1);
        let campaign = self
            .campaigns
            .get_mut(&campaign_id)
            .ok_or_else(|| corrupt(campaign_id))?;
        if campaign.by_ref.contains_key(&entity.external_ref) || campaign.entities.contains_key(&id)
        {
            return Err(corrupt(format!("entity {id} inserted twice")));
        }
        campaign.by_ref.insert(entity.external_ref.clone(), id);
        self.entity_index.insert(id, campaign_id);
        Ok(campaign
            .entities
            .entry(id)
            .or_insert(EntityRecord::new(entity)))
    }

    fn notify(&mut self, mut n: Notification) {
        n.id = NotificationId(self.next_notification.max(1));
        self.next_notification = n.id.0 + 1;
        self.notifications
            .entry(n.recipient.clone())
            .or_default()
            .push(n);
    }

    fn install_campaign(&mut self, mut campaign: CampaignRecord) -> Result<(), CurationError> {
        if self.campaigns.contains_key(&campaign.id) {
            return Err(corrupt(format!("campaign {} created twice", campaign.id)));
        }
        campaign.reindex();
        self.next_campaign = self.next_campaign.max(campaign.id.0 + 1);
        for record in campaign.entities.values() {
            self.entity_index.insert(record.entity.id, campaign.id);
            self.next_entity = self.next_entity.max(record.entity.id.0 + 1);
            for topic in &record.talk.topics {
                for post in &topic.posts {
                    self.next_post = self.next_post.max(post.id.0 + 1);
                }
            }
        }
        self.campaigns.insert(campaign.id, campaign);
        Ok(())
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), CurationError> {
        match event {
            Event::MemberRegistered { member } => {
                self.members.insert(member.id.clone(), member.clone());
            }
            Event::CampaignCreated { campaign } => {
                self.install_campaign((**campaign).clone())?;
            }
            Event::CampaignImported {
                campaign,
                new_members,
            } => {
                for m in new_members {
                    self.members
                        .entry(m.id.clone())
                        .or_insert_with(|| m.clone());
                }
                self.install_campaign((**campaign).clone())?;
            }
            Event::ThresholdsChanged {
                campaign,
                thresholds,
            } => {
                self.campaign_mut(*campaign)?.thresholds = *thresholds;
            }
            Event::EntityAdded { entity } => {
                self.insert_entity(entity.clone())?;
            }
            Event::LabelSubmitted { label } => {
                self.entity_mut(label.entity)?.upsert_label(label);
            }
            Event::QuickLabeled { entity, label } => {
                self.insert_entity(entity.clone())?.upsert_label(label);
            }
            Event::PrimaryEdited {
                entity,
                values,
                editor,
                at,
                rationale,
            } => {
                let record = self.entity_mut(*entity)?;
                let campaign = record.entity.campaign;
                let primary = record.primary.as_mut().ok_or_else(|| corrupt(entity))?;
                let old = primary.values.clone();
                primary.append(values.clone(), editor.clone(), *at, rationale.clone());
                let mut recipients: Vec<UserId> = record
                    .labels
                    .iter()
                    .map(|l| l.author.clone())
                    .filter(|a| a != editor)
                    .collect();
                recipients.sort();
                recipients.dedup();
                for recipient in recipients {
                    self.notify(Notification {
                        id: NotificationId(0),
                        recipient,
                        campaign,
                        entity: Some(*entity),
                        kind: NotificationKind::PrimaryChanged,
                        actor: editor.clone(),
                        old_values: Some(old.clone()),
                        new_values: Some(values.clone()),
                        post: None,
                        created_at: *at,
                        read: false,
                    });
                }
            }
            Event::EntityExcluded {
                entity,
                by,
                reason,
                at,
                audit_line,
            } => {
                let record = self.entity_mut(*entity)?;
                record.entity.excluded = true;
                record.entity.exclusion_reason = Some(reason.clone());
                let campaign = record.entity.campaign;
                let section = self
                    .campaign_mut(campaign)?
                    .datasheet
                    .section_mut(crate::model::INCLUSION_CRITERIA)
                    .ok_or_else(|| corrupt("missing inclusion criteria"))?;
                let mut text = section.text.current().to_string();
                if !text.is_empty() && !text.ends_with('\n') {
                    text.push('\n');
                }
                text.push_str(audit_line);
                section.text.push(text, by.clone(), *at);
            }
            Event::DatasheetEdited {
                campaign,
                section,
                text,
                by,
                at,
            } => {
                self.campaign_mut(*campaign)?
                    .datasheet
                    .section_mut(section)
                    .ok_or_else(|| corrupt(section))?
                    .text
                    .push(text.clone(), by.clone(), *at);
            }
            Event::DefinitionEdited {
                campaign,
                dimension,
                text,
                by,
                at,
            } => {
                self.campaign_mut(*campaign)?
                    .schema
                    .dimensions
                    .iter_mut()
                    .find(|d| &d.name == dimension)
                    .ok_or_else(|| corrupt(dimension))?
                    .definition_text
                    .push(text.clone(), by.clone(), *at);
            }
            Event::Posted {
                campaign,
                scope,
                topic,
                post,
            } => {
                self.next_post = self.next_post.max(post.id.0 + 1);
                let thread = self
                    .campaign_mut(*campaign)?
                    .thread_mut(*scope)
                    .ok_or_else(|| corrupt("thread scope"))?;
                match thread.topics.iter_mut().find(|t| &t.title == topic) {
                    Some(t) => t.posts.push(post.clone()),
                    None => thread.topics.push(Topic {
                        title: topic.clone(),
                        posts: vec![post.clone()],
                    }),
                }
                let entity = match scope {
                    ThreadScope::Entity(e) => Some(*e),
                    ThreadScope::Campaign(_) => None,
                };
                let recipients: Vec<UserId> = mentions(&post.body)
                    .into_iter()
                    .filter(|u| u != &post.author && self.members.contains_key(u))
                    .collect();
                for recipient in recipients {
                    self.notify(Notification {
                        id: NotificationId(0),
                        recipient,
                        campaign: *campaign,
                        entity,
                        kind: NotificationKind::Mentioned,
                        actor: post.author.clone(),
                        old_values: None,
                        new_values: None,
                        post: Some(post.id),
                        created_at: post.timestamp,
                        read: false,
                    });
                }
            }
            Event::NotificationsRead { user, ids } => {
                if let Some(list) = self.notifications.get_mut(user) {
                    for n in list.iter_mut() {
                        if ids.as_ref().is_none_or(|ids| ids.contains(&n.id)) {
                            n.read = true;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
