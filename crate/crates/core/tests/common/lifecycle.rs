//! Reference model of the label lifecycle, checked against the service.

use std::collections::BTreeMap;

use labelcommons_core::model::{Choice, Confidence, EntityId, LabelValue, PrimaryValue, UserId};
use labelcommons_core::{CurationError, NotificationKind, SubmitStatus};
use rand::Rng;

use super::{campaign, choice_of, confidence_of, service, users};

pub const USERS: usize = 4;
pub const ENTITIES: usize = 3;

#[derive(Debug, Clone)]
pub enum Op {
    Submit {
        user: usize,
        entity: usize,
        values: [(bool, bool); 2],
    },
    Edit {
        user: usize,
        entity: usize,
        choices: [bool; 2],
        stale: bool,
    },
    Exclude {
        entity: usize,
    },
}

pub fn random_op<R: Rng>(rng: &mut R) -> Op {
    match rng.gen_range(0..10) {
        0..=5 => Op::Submit {
            user: rng.gen_range(0..USERS),
            entity: rng.gen_range(0..ENTITIES),
            values: [(rng.gen(), rng.gen()), (rng.gen(), rng.gen())],
        },
        6..=8 => Op::Edit {
            user: rng.gen_range(0..USERS),
            entity: rng.gen_range(0..ENTITIES),
            choices: [rng.gen(), rng.gen()],
            stale: rng.gen_bool(0.2),
        },
        _ => Op::Exclude {
            entity: rng.gen_range(0..ENTITIES),
        },
    }
}

pub fn random_ops<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Op> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| random_op(rng)).collect()
}

#[derive(Default)]
struct ModelEntity {
    labels: BTreeMap<usize, [(bool, bool); 2]>,
    primary: Option<([bool; 2], u64)>,
    seed: Option<[bool; 2]>,
    excluded: bool,
}

fn label_values(v: [(bool, bool); 2]) -> Vec<LabelValue> {
    vec![
        LabelValue::new("damage", choice_of(v[0].0), confidence_of(v[0].1)),
        LabelValue::new("intent", choice_of(v[1].0), confidence_of(v[1].1)),
    ]
}

fn primary_values(c: [bool; 2]) -> Vec<PrimaryValue> {
    vec![
        PrimaryValue::new("damage", choice_of(c[0])),
        PrimaryValue::new("intent", choice_of(c[1])),
    ]
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Runs `ops` against a fresh service and the reference model, comparing
/// every response and the full observable state after each step.
pub fn check_sequence(ops: &[Op]) -> Result<(), String> {
    let members = users(USERS);
    let c = service(&members);
    let camp = campaign(&c, "life", &members[0]);
    let ids: Vec<EntityId> = (0..ENTITIES)
        .map(|i| {
            c.add_entity(camp, &format!("e{i}"), "", &members[0])
                .unwrap()
        })
        .collect();
    let mut model: Vec<ModelEntity> = (0..ENTITIES).map(|_| ModelEntity::default()).collect();
    let mut notified = [0usize; USERS];

    for (step, op) in ops.iter().enumerate() {
        let at = |msg: String| format!("step {step} {op:?}: {msg}");
        match *op {
            Op::Submit {
                user,
                entity,
                values,
            } => {
                let m = &mut model[entity];
                let got = c.submit_individual_label(
                    &members[user],
                    ids[entity],
                    &label_values(values),
                    None,
                );
                if m.excluded {
                    ensure(
                        got == Err(CurationError::ExcludedEntity(ids[entity])),
                        || at(format!("{got:?}")),
                    )?;
                    continue;
                }
                let outcome = got.map_err(|e| at(e.to_string()))?;
                let submitted = [values[0].0, values[1].0];
                let expect_nudge = match m.primary {
                    None => {
                        m.primary = Some((submitted, 1));
                        m.seed = Some(submitted);
                        false
                    }
                    Some((p, _)) => p != submitted,
                };
                let expected = if expect_nudge {
                    SubmitStatus::RecordedDisagreeNudge
                } else {
                    SubmitStatus::RecordedAgree
                };
                ensure(outcome.status == expected, || {
                    at(format!("status {:?}", outcome.status))
                })?;
                let (p, rev) = m.primary.unwrap();
                ensure(
                    outcome.primary_snapshot == primary_values(p)
                        && outcome.primary_revision == rev,
                    || at("snapshot".into()),
                )?;
                m.labels.insert(user, values);
            }
            Op::Edit {
                user,
                entity,
                choices,
                stale,
            } => {
                let m = &mut model[entity];
                let current = m.primary.map(|(_, r)| r).unwrap_or(0);
                let base = if stale {
                    current.saturating_sub(1)
                } else {
                    current
                };
                let got = c.edit_primary_label(
                    &members[user],
                    ids[entity],
                    &primary_values(choices),
                    base,
                    None,
                );
                if m.excluded {
                    ensure(
                        got == Err(CurationError::ExcludedEntity(ids[entity])),
                        || at(format!("{got:?}")),
                    )?;
                    continue;
                }
                match m.primary {
                    None => ensure(got == Err(CurationError::NoPrimaryYet(ids[entity])), || {
                        at(format!("{got:?}"))
                    })?,
                    Some((_, rev)) if base != rev => ensure(
                        got == Err(CurationError::RevisionConflict { current: rev }),
                        || at(format!("{got:?}")),
                    )?,
                    Some((_, rev)) => {
                        let label = got.map_err(|e| at(e.to_string()))?;
                        ensure(label.revision == rev + 1, || at("revision".into()))?;
                        m.primary = Some((choices, rev + 1));
                        for &labeler in m.labels.keys() {
                            if labeler != user {
                                notified[labeler] += 1;
                                let newest = c.list_notifications(&members[labeler], true).unwrap();
                                let n = newest
                                    .first()
                                    .ok_or_else(|| at("missing notification".into()))?;
                                ensure(
                                    n.entity == Some(ids[entity])
                                        && n.actor == members[user]
                                        && n.new_values.as_deref()
                                            == Some(&primary_values(choices)[..]),
                                    || at(format!("notification {n:?}")),
                                )?;
                            }
                        }
                    }
                }
            }
            Op::Exclude { entity } => {
                c.exclude_entity(camp, ids[entity], &members[0], "test")
                    .map_err(|e| at(e.to_string()))?;
                model[entity].excluded = true;
            }
        }

        // Full state comparison.
        for (i, m) in model.iter().enumerate() {
            let view = c.entity_view(None, ids[i]).map_err(|e| at(e.to_string()))?;
            ensure(view.excluded == m.excluded, || {
                at(format!("entity {i} excluded flag"))
            })?;
            let primary = view
                .primary
                .as_ref()
                .map(|p| (p.values.clone(), p.revision));
            let expected = m.primary.map(|(p, r)| (primary_values(p), r));
            ensure(primary == expected, || {
                at(format!("entity {i} primary {primary:?} vs {expected:?}"))
            })?;
            if let Some(p) = &view.primary {
                ensure(p.history.len() as u64 == p.revision, || {
                    at("history length".into())
                })?;
                let seed = m.seed.map(primary_values);
                ensure(Some(&p.history[0].values) == seed.as_ref(), || {
                    at("history[0] is the first submission".into())
                })?;
            }
            if view.primary.is_some() != !view.labels.is_empty() {
                return Err(at(format!("entity {i}: primary present iff labeled")));
            }
            let mut labels: Vec<(UserId, Vec<LabelValue>)> = view
                .labels
                .iter()
                .map(|l| (l.author.clone(), l.values.clone()))
                .collect();
            labels.sort_by(|a, b| a.0.cmp(&b.0));
            let expected: Vec<(UserId, Vec<LabelValue>)> = m
                .labels
                .iter()
                .map(|(&u, &v)| (members[u].clone(), label_values(v)))
                .collect();
            ensure(labels == expected, || at(format!("entity {i} labels")))?;
        }
        for (u, &n) in notified.iter().enumerate() {
            let got = c
                .list_notifications(&members[u], false)
                .unwrap()
                .iter()
                .filter(|n| n.kind == NotificationKind::PrimaryChanged)
                .count();
            ensure(got == n, || {
                at(format!("user {u} has {got} notifications, expected {n}"))
            })?;
        }
    }
    Ok(())
}

/// A single-entity nudge check: seeds a primary from `first`, optionally
/// edits it, then submits `second` from another member.
pub fn check_nudge(
    first: [(Choice, Confidence); 2],
    edit: Option<[Choice; 2]>,
    second: [(Choice, Confidence); 2],
) -> Result<(), String> {
    let members = users(3);
    let c = service(&members);
    let camp = campaign(&c, "nudge", &members[0]);
    let e = c.add_entity(camp, "x", "", &members[0]).unwrap();
    let lv = |v: [(Choice, Confidence); 2]| {
        vec![
            LabelValue::new("damage", v[0].0, v[0].1),
            LabelValue::new("intent", v[1].0, v[1].1),
        ]
    };
    c.submit_individual_label(&members[0], e, &lv(first), None)
        .unwrap();
    let mut primary = [first[0].0, first[1].0];
    if let Some(p) = edit {
        c.edit_primary_label(
            &members[2],
            e,
            &[
                PrimaryValue::new("damage", p[0]),
                PrimaryValue::new("intent", p[1]),
            ],
            1,
            None,
        )
        .unwrap();
        primary = p;
    }
    let outcome = c
        .submit_individual_label(&members[1], e, &lv(second), None)
        .unwrap();
    let differs = primary[0] != second[0].0 || primary[1] != second[1].0;
    let expected = if differs {
        SubmitStatus::RecordedDisagreeNudge
    } else {
        SubmitStatus::RecordedAgree
    };
    ensure(outcome.status == expected, || {
        format!("{first:?} {edit:?} {second:?}: got {:?}", outcome.status)
    })?;
    let after = c.primary_label(e).unwrap().unwrap();
    ensure(after.values.iter().map(|v| v.choice).eq(primary), || {
        "submission moved the primary".into()
    })
}
