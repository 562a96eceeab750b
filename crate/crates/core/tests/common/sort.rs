//! Independent ordering oracle for the dataset table.

use std::cmp::Reverse;

use labelcommons_core::model::{Choice, Confidence, EntityId, UserId};
use labelcommons_core::{Curation, SortMode};

pub fn encoded(choice: Choice, confidence: Confidence) -> f64 {
    let magnitude = match confidence {
        Confidence::High => 1.0,
        Confidence::Low => 0.5,
    };
    match choice {
        Choice::Positive => -magnitude,
        Choice::Negative => magnitude,
    }
}

pub fn population_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub struct Expected {
    pub id: EntityId,
    pub n_labels: usize,
    pub disagreement: f64,
    pub differs: bool,
    pub last_activity: i64,
}

/// Expected keys, computed from entity views alone.
pub fn expected_rows(c: &Curation, viewer: &UserId, ids: &[EntityId]) -> Vec<Expected> {
    ids.iter()
        .filter_map(|&id| {
            let v = c.entity_view(Some(viewer), id).unwrap();
            if v.excluded {
                return None;
            }
            let dims = ["damage", "intent"];
            let disagreement = dims
                .iter()
                .map(|d| {
                    let xs: Vec<f64> = v
                        .labels
                        .iter()
                        .map(|l| {
                            let lv = l.value(d).unwrap();
                            encoded(lv.choice, lv.confidence)
                        })
                        .collect();
                    population_sd(&xs)
                })
                .fold(0.0, f64::max);
            let differs = match (&v.own_label, &v.primary) {
                (Some(own), Some(p)) => own
                    .values
                    .iter()
                    .any(|lv| p.choice(&lv.dimension) != Some(lv.choice)),
                _ => false,
            };
            let mut last = v.entity.added_at;
            for l in &v.labels {
                last = last.max(l.updated_at);
            }
            if let Some(p) = &v.primary {
                for h in &p.history {
                    last = last.max(h.timestamp);
                }
            }
            for t in &v.talk.topics {
                for p in &t.posts {
                    last = last.max(p.timestamp);
                }
            }
            Some(Expected {
                id,
                n_labels: v.labels.len(),
                disagreement,
                differs,
                last_activity: last.timestamp_micros(),
            })
        })
        .collect()
}

pub fn oracle_order(mut rows: Vec<Expected>, mode: SortMode) -> Vec<EntityId> {
    match mode {
        SortMode::FewestLabels => rows.sort_by_key(|r| (r.n_labels, r.id)),
        // Equal multisets may differ in the last ulp depending on summation
        // order, so compare on a 1e-9 grid.
        SortMode::HighestDisagreement => {
            rows.sort_by_key(|r| (Reverse((r.disagreement * 1e9).round() as i64), r.id))
        }
        SortMode::DiffersFromMine => {
            rows.sort_by_key(|r| (!r.differs, Reverse(r.last_activity), r.id))
        }
        SortMode::RecentActivity => rows.sort_by_key(|r| (Reverse(r.last_activity), r.id)),
    }
    rows.into_iter().map(|r| r.id).collect()
}
