//! Export-independent view of a campaign's exported fields.

use labelcommons_core::model::{CampaignId, UserId};
use labelcommons_core::Curation;

/// Observable content of one included entity, read through entity views
/// rather than the export code.
#[derive(Debug, PartialEq)]
pub struct Observed {
    external_ref: String,
    snapshot: String,
    added_at: String,
    primary: Option<String>,
    labels: Vec<String>,
    stats: Vec<(String, u64, u64)>,
}

pub fn observe(
    c: &Curation,
    camp: CampaignId,
    rename: &dyn Fn(&UserId) -> UserId,
) -> (String, Vec<Observed>) {
    let view = c.campaign(camp).unwrap();
    let meta = format!(
        "{:?} {:?} {:?}",
        view.schema.specs(),
        view.datasheet.current_texts(),
        view.thresholds
    );
    let page = c
        .list_table(
            camp,
            None,
            labelcommons_core::SortMode::FewestLabels,
            0,
            usize::MAX,
        )
        .unwrap();
    let mut rows: Vec<Observed> = page
        .rows
        .iter()
        .map(|row| {
            let v = c.entity_view(None, row.entity).unwrap();
            let mut labels: Vec<String> = v
                .labels
                .iter()
                .map(|l| {
                    format!(
                        "{} {:?} {:?} {} {}",
                        rename(&l.author),
                        l.values,
                        l.note,
                        l.created_at.to_rfc3339(),
                        l.updated_at.to_rfc3339()
                    )
                })
                .collect();
            labels.sort();
            Observed {
                external_ref: v.entity.external_ref.clone(),
                snapshot: v.entity.content_snapshot.clone(),
                added_at: v.entity.added_at.to_rfc3339(),
                primary: v.primary.as_ref().map(|p| format!("{:?}", p.values)),
                labels,
                stats: v
                    .stats
                    .iter()
                    .map(|s| {
                        (
                            s.dimension.clone(),
                            s.disagreement.to_bits(),
                            s.low_conf_fraction.to_bits(),
                        )
                    })
                    .collect(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.external_ref.cmp(&b.external_ref));
    (meta, rows)
}
