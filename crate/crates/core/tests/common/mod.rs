#![allow(dead_code)]

pub mod lifecycle;
pub mod observe;
pub mod sort;

use std::sync::Arc;

use labelcommons_core::fixtures;
use labelcommons_core::model::{CampaignId, Choice, Confidence, LabelValue, PrimaryValue, UserId};
use labelcommons_core::{Curation, SteppingClock};

pub const DIMS: [&str; 2] = ["damage", "intent"];

pub fn user(name: &str) -> UserId {
    UserId::new(name)
}

pub fn users(n: usize) -> Vec<UserId> {
    (0..n).map(|i| UserId::new(format!("u{i:03}"))).collect()
}

/// A service on a stepping clock with `members` registered.
pub fn service(members: &[UserId]) -> Curation {
    let c = Curation::with_clock(Arc::new(SteppingClock::fixture()));
    for m in members {
        c.register_member(m.clone(), m.as_str(), None).unwrap();
    }
    c
}

pub fn campaign(c: &Curation, name: &str, by: &UserId) -> CampaignId {
    c.create_campaign(fixtures::edit_quality_campaign(name), by)
        .unwrap()
}

pub fn values(damage: (Choice, Confidence), intent: (Choice, Confidence)) -> Vec<LabelValue> {
    vec![
        LabelValue::new("damage", damage.0, damage.1),
        LabelValue::new("intent", intent.0, intent.1),
    ]
}

pub fn choices(damage: Choice, intent: Choice) -> Vec<PrimaryValue> {
    vec![
        PrimaryValue::new("damage", damage),
        PrimaryValue::new("intent", intent),
    ]
}

pub fn choice_of(bit: bool) -> Choice {
    if bit {
        Choice::Positive
    } else {
        Choice::Negative
    }
}

pub fn confidence_of(bit: bool) -> Confidence {
    if bit {
        Confidence::Low
    } else {
        Confidence::High
    }
}

/// Fills a campaign with `n_entities` entities and random labels, edits,
/// posts and exclusions drawn from `rng`.
pub fn random_campaign<R: rand::Rng>(
    rng: &mut R,
    c: &Curation,
    name: &str,
    members: &[UserId],
    n_entities: usize,
) -> CampaignId {
    let camp = campaign(c, name, &members[0]);
    let snippets = [
        "plain",
        "pipe | inside",
        "comma, \"quote\"",
        "multi\nline\r\ntext",
        "ünïcödé ✓",
        "",
    ];
    let mut ids = Vec::new();
    for i in 0..n_entities {
        let adder = &members[rng.gen_range(0..members.len())];
        let snap = format!("{} #{i}", snippets[rng.gen_range(0..snippets.len())]);
        ids.push(
            c.add_entity(camp, &format!("ref/{i}"), &snap, adder)
                .unwrap(),
        );
    }
    for &e in &ids {
        let n_labels = rng.gen_range(0..=members.len().min(6));
        for m in members.iter().take(n_labels) {
            let v = values(
                (choice_of(rng.gen()), confidence_of(rng.gen_bool(0.3))),
                (choice_of(rng.gen()), confidence_of(rng.gen_bool(0.3))),
            );
            let note = match rng.gen_range(0..4) {
                0 => Some("note | with pipe".to_string()),
                1 => Some("line\nbreak, \"q\"".to_string()),
                _ => None,
            };
            c.submit_individual_label(m, e, &v, note).unwrap();
        }
        if n_labels > 0 && rng.gen_bool(0.3) {
            let editor = &members[rng.gen_range(0..members.len())];
            c.edit_primary_label(
                editor,
                e,
                &choices(choice_of(rng.gen()), choice_of(rng.gen())),
                1,
                None,
            )
            .unwrap();
        }
        if rng.gen_bool(0.1) {
            c.exclude_entity(camp, e, &members[0], "out of scope")
                .unwrap();
        }
    }
    camp
}
