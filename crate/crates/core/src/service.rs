use std::path::Path;
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard};
use sha2::{Digest, Sha256};

use crate::clock::{Clock, SystemClock};
use crate::error::CurationError;
use crate::model::{NotificationId, Timestamp, UserId};
use crate::state::{Event, Member, Notification, State};
use crate::store::journal::{FileJournal, Journal, NullJournal};

/// The curation service: all campaigns, members and notifications.
///
/// Mutations are serialized through one write lock that also covers the
/// journal append, which makes every operation linearizable (per entity and
/// globally). Reads share the lock and see consistent snapshots.
pub struct Curation {
    state: RwLock<State>,
    journal: Box<dyn Journal>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Curation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Curation").finish_non_exhaustive()
    }
}

impl Default for Curation {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Curation {
    /// A volatile service on the system clock.
    pub fn in_memory() -> Self {
        Self::with_clock(Arc::new(SystemClock))
    }

    pub fn with_clock(clock: Arc<dyn Clock>) -> Self {
        Self {
            state: RwLock::new(State::default()),
            journal: Box::new(NullJournal),
            clock,
        }
    }

    /// Opens a durable service backed by the journal at `path`, replaying
    /// every committed event.
    pub fn open(
        path: impl AsRef<Path>,
        sync: bool,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, CurationError> {
        let (journal, events) = FileJournal::open(path, sync)?;
        let mut state = State::default();
        for event in &events {
            state.apply(event)?;
        }
        Ok(Self {
            state: RwLock::new(state),
            journal: Box::new(journal),
            clock,
        })
    }

    pub(crate) fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub(crate) fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read()
    }

    /// Validates with `prepare`, journals the event, applies it, then lets
    /// `finish` read the result, all under one write lock.
    pub(crate) fn commit<P, T, F, R>(&self, prepare: F, finish: R) -> Result<T, CurationError>
    where
        F: FnOnce(&State, Timestamp) -> Result<(Option<Event>, P), CurationError>,
        R: FnOnce(&State, P) -> T,
    {
        let mut state = self.state.write();
        let now = self.now();
        let (event, pending) = prepare(&state, now)?;
        if let Some(event) = event {
            self.journal.append(&event)?;
            state.apply(&event)?;
        }
        Ok(finish(&state, pending))
    }

    pub fn register_member(
        &self,
        id: UserId,
        display_name: impl Into<String>,
        credential_digest: Option<String>,
    ) -> Result<Member, CurationError> {
        let display_name = display_name.into();
        self.commit(
            |st, now| {
                if id.as_str().trim().is_empty() {
                    return Err(CurationError::UnknownUser(id.clone()));
                }
                if st.members.contains_key(&id) {
                    return Err(CurationError::DuplicateUser(id.clone()));
                }
                let member = Member {
                    id: id.clone(),
                    display_name,
                    credential_digest,
                    registered_at: now,
                };
                Ok((
                    Some(Event::MemberRegistered {
                        member: member.clone(),
                    }),
                    member,
                ))
            },
            |_, member| member,
        )
    }

    pub fn member(&self, id: &UserId) -> Option<Member> {
        self.read().members.get(id).cloned()
    }

    pub fn members(&self) -> Vec<Member> {
        self.read().members.values().cloned().collect()
    }

    pub fn member_by_credential(&self, digest: &str) -> Option<Member> {
        self.read()
            .members
            .values()
            .find(|m| m.credential_digest.as_deref() == Some(digest))
            .cloned()
    }

    /// Newest first.
    pub fn list_notifications(
        &self,
        user: &UserId,
        unread_only: bool,
    ) -> Result<Vec<Notification>, CurationError> {
        let st = self.read();
        st.require_member(user)?;
        let mut out: Vec<Notification> = st
            .notifications
            .get(user)
            .map(|list| {
                list.iter()
                    .filter(|n| !unread_only || !n.read)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.id.cmp(&a.id)));
        Ok(out)
    }

    /// Marks the given notifications (all of them when `ids` is `None`) read.
    /// Returns how many changed state; repeating the call is a no-op.
    pub fn mark_notifications_read(
        &self,
        user: &UserId,
        ids: Option<Vec<NotificationId>>,
    ) -> Result<usize, CurationError> {
        self.commit(
            |st, _| {
                st.require_member(user)?;
                let changed = st
                    .notifications
                    .get(user)
                    .map(|list| {
                        list.iter()
                            .filter(|n| !n.read)
                            .filter(|n| ids.as_ref().is_none_or(|ids| ids.contains(&n.id)))
                            .count()
                    })
                    .unwrap_or(0);
                let event = (changed > 0).then(|| Event::NotificationsRead {
                    user: user.clone(),
                    ids: ids.clone(),
                });
                Ok((event, changed))
            },
            |_, changed| changed,
        )
    }
}

/// Hex SHA-256 of a bearer token, as stored in [`Member::credential_digest`].
pub fn credential_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}
