//! Disagreement and confidence statistics over individual labels.
//!
//! Disagreement is the population standard deviation of encoded labels
//! (see [`crate::model::encode`]); confidence is the fraction of labels
//! flagged low confidence. The two axes together place an entity in one of
//! four quadrants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::model::{
    encode_pair, Choice, Confidence, EntityId, IndividualLabel, LabelSchema, LabelValue,
    PrimaryLabel, UserId,
};

/// Population standard deviation of the encoded labels; 0 for fewer than two.
pub fn disagreement(labels: &[LabelValue]) -> f64 {
    disagreement_of(labels.iter().map(|l| (l.choice, l.confidence)))
}

pub(crate) fn disagreement_of(pairs: impl IntoIterator<Item = (Choice, Confidence)>) -> f64 {
    // Work in doubled encodings {-2, -1, 1, 2} so the variance is the exact
    // rational (n*S2 - S1^2) / (4 n^2). Reducing it before the square root
    // makes equal disagreements produce identical floats, which keeps
    // sorting ties exact.
    let (mut n, mut s1, mut s2) = (0i128, 0i128, 0i128);
    for (choice, confidence) in pairs {
        let x = (encode_pair(choice, confidence).value() * 2.0) as i128;
        n += 1;
        s1 += x;
        s2 += x * x;
    }
    if n <= 1 {
        return 0.0;
    }
    let num = n * s2 - s1 * s1;
    let den = 4 * n * n;
    let g = gcd(num, den);
    ((num / g) as f64 / (den / g) as f64).sqrt().min(1.0)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

pub fn low_conf_fraction(labels: &[LabelValue]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let low = labels
        .iter()
        .filter(|l| l.confidence == Confidence::Low)
        .count();
    low as f64 / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    /// Low disagreement, high confidence.
    ClearCut,
    /// High disagreement, low confidence.
    Ambiguous,
    /// High disagreement, high confidence.
    GenuineDifference,
    /// Low disagreement, low confidence.
    AgreedEdgeCase,
    /// Fewer than two labels.
    Insufficient,
}

impl Quadrant {
    pub const ALL: [Quadrant; 5] = [
        Quadrant::ClearCut,
        Quadrant::Ambiguous,
        Quadrant::GenuineDifference,
        Quadrant::AgreedEdgeCase,
        Quadrant::Insufficient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::ClearCut => "clear_cut",
            Quadrant::Ambiguous => "ambiguous",
            Quadrant::GenuineDifference => "genuine_difference",
            Quadrant::AgreedEdgeCase => "agreed_edge_case",
            Quadrant::Insufficient => "insufficient",
        }
    }
}

/// Cut points on the disagreement and low-confidence-fraction axes.
/// A value equal to its threshold counts as high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantThresholds {
    pub disagreement: f64,
    pub low_confidence: f64,
}

impl Default for QuadrantThresholds {
    fn default() -> Self {
        Self {
            disagreement: 0.5,
            low_confidence: 0.5,
        }
    }
}

impl QuadrantThresholds {
    pub fn new(disagreement: f64, low_confidence: f64) -> Result<Self, CurationError> {
        let t = Self {
            disagreement,
            low_confidence,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CurationError> {
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if inside(self.disagreement) && inside(self.low_confidence) {
            Ok(())
        } else {
            Err(CurationError::InvalidThresholds {
                disagreement: self.disagreement,
                low_confidence: self.low_confidence,
            })
        }
    }
}

pub fn quadrant(
    disagreement: f64,
    low_conf_fraction: f64,
    thresholds: QuadrantThresholds,
) -> Quadrant {
    let high_disagreement = disagreement >= thresholds.disagreement;
    let low_confidence = low_conf_fraction >= thresholds.low_confidence;
    match (high_disagreement, low_confidence) {
        (true, true) => Quadrant::Ambiguous,
        (true, false) => Quadrant::GenuineDifference,
        (false, false) => Quadrant::ClearCut,
        (false, true) => Quadrant::AgreedEdgeCase,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub dimension: String,
    pub disagreement: f64,
    pub low_conf_fraction: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityStats {
    pub entity: EntityId,
    pub external_ref: String,
    pub n_labels: usize,
    pub dimensions: Vec<DimensionStats>,
}

impl EntityStats {
    pub fn dimension(&self, name: &str) -> Option<&DimensionStats> {
        self.dimensions.iter().find(|d| d.dimension == name)
    }

    pub fn max_disagreement(&self) -> f64 {
        self.dimensions
            .iter()
            .map(|d| d.disagreement)
            .fold(0.0, f64::max)
    }
}

pub fn dimension_stats(
    schema: &LabelSchema,
    labels: &[IndividualLabel],
    thresholds: QuadrantThresholds,
) -> Vec<DimensionStats> {
    schema
        .dimensions
        .iter()
        .map(|dim| {
            let values: Vec<LabelValue> = labels
                .iter()
                .filter_map(|l| l.value(&dim.name).cloned())
                .collect();
            let d = disagreement(&values);
            let c = low_conf_fraction(&values);
            let q = if values.len() < 2 {
                Quadrant::Insufficient
            } else {
                quadrant(d, c, thresholds)
            };
            DimensionStats {
                dimension: dim.name.clone(),
                disagreement: d,
                low_conf_fraction: c,
                quadrant: q,
            }
        })
        .collect()
}

/// Share of primary labels taking each choice on one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub dimension: String,
    pub positive: usize,
    pub negative: usize,
    pub positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CampaignAggregates {
    pub n_entities: usize,
    pub n_labeled: usize,
    pub n_labels: usize,
    pub composition: Vec<Composition>,
    pub labeler_contributions: BTreeMap<UserId, usize>,
    pub quadrant_counts: Vec<QuadrantCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantCount {
    pub dimension: String,
    pub quadrant: Quadrant,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CampaignStats {
    pub entities: Vec<EntityStats>,
    pub aggregates: CampaignAggregates,
}

pub(crate) fn aggregate<'a>(
    schema: &LabelSchema,
    rows: impl IntoIterator<Item = (&'a [IndividualLabel], Option<&'a PrimaryLabel>)>,
    stats: &[EntityStats],
) -> CampaignAggregates {
    let mut agg = CampaignAggregates::default();
    let mut positive = vec![0usize; schema.dimensions.len()];
    let mut negative = vec![0usize; schema.dimensions.len()];
    for (labels, primary) in rows {
        agg.n_entities += 1;
        agg.n_labels += labels.len();
        for label in labels {
            *agg.labeler_contributions
                .entry(label.author.clone())
                .or_default() += 1;
        }
        if let Some(primary) = primary {
            agg.n_labeled += 1;
            for (i, dim) in schema.dimensions.iter().enumerate() {
                match primary.choice(&dim.name) {
                    Some(Choice::Positive) => positive[i] += 1,
                    Some(Choice::Negative) => negative[i] += 1,
                    None => {}
                }
            }
        }
    }
    agg.composition = schema
        .dimensions
        .iter()
        .enumerate()
        .map(|(i, dim)| {
            let total = positive[i] + negative[i];
            Composition {
                dimension: dim.name.clone(),
                positive: positive[i],
                negative: negative[i],
                positive_fraction: if total == 0 {
                    0.0
                } else {
                    positive[i] as f64 / total as f64
                },
            }
        })
        .collect();
    for dim in &schema.dimensions {
        for q in Quadrant::ALL {
            let count = stats
                .iter()
                .filter(|s| s.dimension(&dim.name).is_some_and(|d| d.quadrant == q))
                .count();
            agg.quadrant_counts.push(QuadrantCount {
                dimension: dim.name.clone(),
                quadrant: q,
                count,
            });
        }
    }
    agg
}
