//! Ready-made campaign definitions.

use crate::campaign::NewCampaign;
use crate::model::{
    DimensionSpec, SectionText, DATA_STATEMENT, INCLUSION_CRITERIA, LABEL_DEFINITIONS,
};

/// Two-dimension schema for reviewing wiki edits: whether an edit damages
/// the article, and whether its author acted in bad faith.
pub fn edit_quality_campaign(name: &str) -> NewCampaign {
    NewCampaign {
        name: name.to_string(),
        dimensions: vec![
            DimensionSpec::new(
                "damage",
                "damaging",
                "not damaging",
                "An edit is damaging when it makes the article worse for readers, whatever the \
                 editor intended.",
            ),
            DimensionSpec::new(
                "intent",
                "bad faith",
                "good faith",
                "An edit is in bad faith when its author set out to harm the article.",
            ),
        ],
        datasheet: vec![
            SectionText::new(
                LABEL_DEFINITIONS,
                "damage: damaging / not damaging\nintent: bad faith / good faith",
            ),
            SectionText::new(
                DATA_STATEMENT,
                "Edits selected by community members during their regular patrolling.",
            ),
            SectionText::new(
                INCLUSION_CRITERIA,
                "Any edit whose content is publicly visible.",
            ),
        ],
        thresholds: None,
    }
}
