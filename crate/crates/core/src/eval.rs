//! Model evaluation against curated primary labels.
//!
//! Classification rule everywhere: `score >= threshold` predicts the
//! positive choice of the evaluated dimension.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CurationError;
use crate::metrics::Quadrant;
use crate::model::{Choice, LabelDimension};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("score {value} at index {index} lies outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
    #[error("labels contain a single class; ROC and AUC are undefined")]
    DegenerateLabels,
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Empty => "empty_evaluation",
            EvalError::LengthMismatch { .. } => "length_mismatch",
            EvalError::NonFiniteScore(_) => "non_finite_score",
            EvalError::ScoreOutOfRange { .. } => "score_out_of_range",
            EvalError::DegenerateLabels => "degenerate_labels",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// `None` for the origin, where nothing is predicted positive.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.correct() as f64 / self.total() as f64
        }
    }
}

fn check_inputs(labels: &[Choice], scores: &[f64]) -> Result<(), EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    Ok(())
}

/// Cumulative (fp, tp) counts after each group of equal scores, walking
/// from the highest score down.
struct RocCounts {
    positives: u64,
    negatives: u64,
    steps: Vec<(u64, u64, f64)>,
}

fn roc_counts(labels: &[Choice], scores: &[f64]) -> Result<RocCounts, EvalError> {
    check_inputs(labels, scores)?;
    let positives = labels.iter().filter(|&&l| l == Choice::Positive).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut steps = Vec::new();
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            match labels[order[i]] {
                Choice::Positive => tp += 1,
                Choice::Negative => fp += 1,
            }
            i += 1;
        }
        steps.push((fp, tp, score));
    }
    Ok(RocCounts {
        positives,
        negatives,
        steps,
    })
}

/// ROC points from (0,0) to (1,1), one per distinct score, thresholds descending.
pub fn roc(labels: &[Choice], scores: &[f64]) -> Result<Vec<RocPoint>, EvalError> {
    let counts = roc_counts(labels, scores)?;
    let (p, n) = (counts.positives as f64, counts.negatives as f64);
    let mut points = Vec::with_capacity(counts.steps.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    });
    points.extend(counts.steps.iter().map(|&(fp, tp, s)| RocPoint {
        fpr: fp as f64 / n,
        tpr: tp as f64 / p,
        threshold: Some(s),
    }));
    Ok(points)
}

/// Trapezoidal area under the ROC curve.
pub fn auc(labels: &[Choice], scores: &[f64]) -> Result<f64, EvalError> {
    let counts = roc_counts(labels, scores)?;
    // Twice the area in count units: sum of dfp * (tp_prev + tp).
    let mut doubled: u128 = 0;
    let (mut prev_fp, mut prev_tp) = (0u64, 0u64);
    for &(fp, tp, _) in &counts.steps {
        doubled += (fp - prev_fp) as u128 * (prev_tp + tp) as u128;
        prev_fp = fp;
        prev_tp = tp;
    }
    Ok(doubled as f64 / (2.0 * counts.positives as f64 * counts.negatives as f64))
}

pub fn confusion_at(labels: &[Choice], scores: &[f64], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&label, &score) in labels.iter().zip(scores) {
        match (score >= threshold, label) {
            (true, Choice::Positive) => c.tp += 1,
            (true, Choice::Negative) => c.fp += 1,
            (false, Choice::Negative) => c.tn += 1,
            (false, Choice::Positive) => c.fn_ += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestThreshold {
    pub threshold: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Accuracy-maximizing threshold over the candidates {0, 1} and the
/// midpoints of adjacent distinct scores. Ties go to the smallest threshold.
///
/// Scores must lie in [0, 1]. A single-class label set is allowed here since
/// accuracy stays well defined.
pub fn best_accuracy_threshold(
    labels: &[Choice],
    scores: &[f64],
) -> Result<BestThreshold, EvalError> {
    check_inputs(labels, scores)?;
    if let Some((index, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(EvalError::ScoreOutOfRange { index, value });
    }

    let mut pairs: Vec<(f64, Choice)> =
        scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    // positives_below[k] = positives among the k lowest scores
    let mut positives_below = Vec::with_capacity(pairs.len() + 1);
    positives_below.push(0usize);
    for (_, label) in &pairs {
        let last = *positives_below.last().unwrap();
        positives_below.push(last + usize::from(*label == Choice::Positive));
    }
    let total_pos = *positives_below.last().unwrap();
    let n = pairs.len();

    let mut candidates = vec![0.0, 1.0];
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            candidates.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best: Option<(f64, Confusion)> = None;
    for t in candidates {
        let below = sorted.partition_point(|&s| s < t);
        let fn_ = positives_below[below];
        let tn = below - fn_;
        let tp = total_pos - fn_;
        let fp = (n - below) - tp;
        let c = Confusion { tp, fp, tn, fn_ };
        if best.is_none_or(|(_, b)| c.correct() > b.correct()) {
            best = Some((t, c));
        }
    }
    let (threshold, confusion) = best.expect("candidate set is never empty");
    Ok(BestThreshold {
        threshold,
        accuracy: confusion.accuracy(),
        confusion,
    })
}

/// Scores from one model, keyed by entity external reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    /// Value name the score is the probability of, e.g. "damaging". When it
    /// names the dimension's negative value, scores are flipped to `1 - s`.
    pub positive_means: Option<String>,
    pub dimension: Option<String>,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
struct PredictionHeader {
    model: String,
    positive_means: Option<String>,
    dimension: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PredictionLine {
    #[serde(rename = "ref")]
    external_ref: String,
    score: f64,
}

impl PredictionSet {
    pub fn new(
        model: impl Into<String>,
        scores: BTreeMap<String, f64>,
    ) -> Result<Self, CurationError> {
        let set = Self {
            model: model.into(),
            positive_means: None,
            dimension: None,
            scores,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), CurationError> {
        if self.model.trim().is_empty() {
            return Err(CurationError::InvalidPredictions(
                "model name is empty".into(),
            ));
        }
        for (r, &s) in &self.scores {
            if !(0.0..=1.0).contains(&s) {
                return Err(CurationError::InvalidPredictions(format!(
                    "score {s} for '{r}' lies outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Header line `{model, positive_means, dimension}` then `{ref, score}` lines.
    pub fn from_jsonl(input: &str) -> Result<Self, CurationError> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(CurationError::ParseError {
            line: 1,
            reason: "missing header line".into(),
        })?;
        let header: PredictionHeader =
            serde_json::from_str(header).map_err(|e| CurationError::ParseError {
                line: 1,
                reason: e.to_string(),
            })?;
        let mut scores = BTreeMap::new();
        for (idx, line) in lines {
            let rec: PredictionLine =
                serde_json::from_str(line).map_err(|e| CurationError::ParseError {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            insert_score(&mut scores, rec.external_ref, rec.score, idx + 1)?;
        }
        let set = Self {
            model: header.model,
            positive_means: header.positive_means,
            dimension: header.dimension,
            scores,
        };
        set.validate()?;
        Ok(set)
    }

    /// Two columns, `ref,score`, with a header row.
    pub fn from_csv(input: &str, model: impl Into<String>) -> Result<Self, CurationError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input.as_bytes());
        let mut scores = BTreeMap::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| CurationError::ParseError {
                line,
                reason: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(CurationError::ParseError {
                    line,
                    reason: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let score: f64 = record[1]
                .trim()
                .parse()
                .map_err(|_| CurationError::ParseError {
                    line,
                    reason: format!("'{}' is not a number", &record[1]),
                })?;
            insert_score(&mut scores, record[0].to_string(), score, line)?;
        }
        let set = Self {
            model: model.into(),
            positive_means: None,
            dimension: None,
            scores,
        };
        set.validate()?;
        Ok(set)
    }

    /// Scores as probabilities of the dimension's positive value.
    pub fn oriented_scores(
        &self,
        dim: &LabelDimension,
    ) -> Result<BTreeMap<String, f64>, CurationError> {
        let flip = match self.positive_means.as_deref() {
            None => false,
            Some(v) if v == dim.positive_value => false,
            Some(v) if v == dim.negative_value => true,
            Some(v) => {
                return Err(CurationError::InvalidPredictions(format!(
                    "model '{}' scores '{v}', which is neither '{}' nor '{}'",
                    self.model, dim.positive_value, dim.negative_value
                )))
            }
        };
        Ok(self
            .scores
            .iter()
            .map(|(r, &s)| (r.clone(), if flip { 1.0 - s } else { s }))
            .collect())
    }
}

fn insert_score(
    scores: &mut BTreeMap<String, f64>,
    external_ref: String,
    score: f64,
    line: usize,
) -> Result<(), CurationError> {
    if !score.is_finite() {
        return Err(CurationError::ParseError {
            line,
            reason: "score is not finite".into(),
        });
    }
    if scores.insert(external_ref.clone(), score).is_some() {
        return Err(CurationError::ParseError {
            line,
            reason: format!("duplicate ref '{external_ref}'"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every entity counts once.
    #[default]
    Uniform,
    /// Entities weighted by `1 - disagreement` in the weighted accuracy.
    AgreementWeighted,
}

/// One evaluable entity: truth from its primary label plus its label stats.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub external_ref: String,
    pub truth: Choice,
    pub n_labels: usize,
    pub disagreement: f64,
    pub low_conf_fraction: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantErrors {
    pub quadrant: Quadrant,
    pub n: usize,
    pub errors: usize,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub dimension: String,
    pub n: usize,
    pub roc_points: Vec<RocPoint>,
    /// `None` when the evaluated labels hold a single class.
    pub auc: Option<f64>,
    pub auc_defined: bool,
    pub best_threshold: Option<f64>,
    pub best_accuracy: Option<f64>,
    pub confusion: Option<Confusion>,
    pub weighted_accuracy: Option<f64>,
    pub quadrant_errors: Vec<QuadrantErrors>,
    /// Evaluable entities this model has no score for.
    pub skipped_refs: Vec<String>,
    /// Scored refs that match no included, primary-labeled entity.
    pub unresolved_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    pub model: String,
    pub score: f64,
    pub predicted: Option<Choice>,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub external_ref: String,
    pub truth: Choice,
    pub n_labels: usize,
    pub disagreement: f64,
    pub low_conf_fraction: f64,
    pub quadrant: Quadrant,
    pub predictions: Vec<ModelPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub dimension: String,
    pub weighting: Weighting,
    pub reports: Vec<EvaluationReport>,
    pub entities: Vec<EntityAnnotation>,
    /// Evaluable entities missing from at least one model.
    pub excluded_from_comparison: Vec<String>,
}

/// Evaluates every model over the entities all of them score.
pub fn compare(
    dimension: &LabelDimension,
    rows: &[EvalRow],
    sets: &[PredictionSet],
    weighting: Weighting,
) -> Result<ModelComparison, CurationError> {
    if sets.is_empty() {
        return Err(CurationError::InvalidPredictions(
            "no prediction sets given".into(),
        ));
    }
    let mut names = BTreeSet::new();
    for set in sets {
        set.validate()?;
        if !names.insert(set.model.as_str()) {
            return Err(CurationError::InvalidPredictions(format!(
                "model '{}' given twice",
                set.model
            )));
        }
        if let Some(d) = &set.dimension {
            if d != &dimension.name {
                return Err(CurationError::InvalidPredictions(format!(
                    "model '{}' targets dimension '{d}', not '{}'",
                    set.model, dimension.name
                )));
            }
        }
    }
    let oriented: Vec<BTreeMap<String, f64>> = sets
        .iter()
        .map(|s| s.oriented_scores(dimension))
        .collect::<Result<_, _>>()?;

    let evaluable: BTreeSet<&str> = rows.iter().map(|r| r.external_ref.as_str()).collect();
    let common: Vec<&EvalRow> = rows
        .iter()
        .filter(|r| oriented.iter().all(|s| s.contains_key(&r.external_ref)))
        .collect();
    let excluded_from_comparison: Vec<String> = rows
        .iter()
        .filter(|r| !oriented.iter().all(|s| s.contains_key(&r.external_ref)))
        .map(|r| r.external_ref.clone())
        .collect();

    let truth: Vec<Choice> = common.iter().map(|r| r.truth).collect();
    let mut reports = Vec::with_capacity(sets.len());
    let mut best_thresholds = Vec::with_capacity(sets.len());
    for (set, scores) in sets.iter().zip(&oriented) {
        let model_scores: Vec<f64> = common.iter().map(|r| scores[&r.external_ref]).collect();
        let skipped_refs = rows
            .iter()
            .filter(|r| !scores.contains_key(&r.external_ref))
            .map(|r| r.external_ref.clone())
            .collect();
        let unresolved_refs = scores
            .keys()
            .filter(|k| !evaluable.contains(k.as_str()))
            .cloned()
            .collect();
        let report = evaluate_rows(
            &set.model,
            &dimension.name,
            &common,
            &truth,
            &model_scores,
            weighting,
            skipped_refs,
            unresolved_refs,
        )?;
        best_thresholds.push(report.best_threshold);
        reports.push(report);
    }

    let entities = common
        .iter()
        .map(|row| EntityAnnotation {
            external_ref: row.external_ref.clone(),
            truth: row.truth,
            n_labels: row.n_labels,
            disagreement: row.disagreement,
            low_conf_fraction: row.low_conf_fraction,
            quadrant: row.quadrant,
            predictions: sets
                .iter()
                .zip(&oriented)
                .zip(&best_thresholds)
                .map(|((set, scores), threshold)| {
                    let score = scores[&row.external_ref];
                    let predicted = threshold.map(|t| {
                        if score >= t {
                            Choice::Positive
                        } else {
                            Choice::Negative
                        }
                    });
                    ModelPrediction {
                        model: set.model.clone(),
                        score,
                        predicted,
                        correct: predicted.map(|p| p == row.truth),
                    }
                })
                .collect(),
        })
        .collect();

    Ok(ModelComparison {
        dimension: dimension.name.clone(),
        weighting,
        reports,
        entities,
        excluded_from_comparison,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_rows(
    model: &str,
    dimension: &str,
    rows: &[&EvalRow],
    truth: &[Choice],
    scores: &[f64],
    weighting: Weighting,
    skipped_refs: Vec<String>,
    unresolved_refs: Vec<String>,
) -> Result<EvaluationReport, CurationError> {
    let mut report = EvaluationReport {
        model: model.to_string(),
        dimension: dimension.to_string(),
        n: rows.len(),
        roc_points: Vec::new(),
        auc: None,
        auc_defined: false,
        best_threshold: None,
        best_accuracy: None,
        confusion: None,
        weighted_accuracy: None,
        quadrant_errors: Vec::new(),
        skipped_refs,
        unresolved_refs,
    };
    if rows.is_empty() {
        return Ok(report);
    }
    match roc(truth, scores) {
        Ok(points) => {
            report.roc_points = points;
            report.auc = Some(auc(truth, scores)?);
            report.auc_defined = true;
        }
        Err(EvalError::DegenerateLabels) => {}
        Err(e) => return Err(e.into()),
    }
    let best = best_accuracy_threshold(truth, scores)?;
    report.best_threshold = Some(best.threshold);
    report.best_accuracy = Some(best.accuracy);
    report.confusion = Some(best.confusion);

    let correct: Vec<bool> = truth
        .iter()
        .zip(scores)
        .map(|(&t, &s)| (s >= best.threshold) == (t == Choice::Positive))
        .collect();
    if weighting == Weighting::AgreementWeighted {
        let (num, den) = rows
            .iter()
            .zip(&correct)
            .fold((0.0, 0.0), |(num, den), (r, &ok)| {
                let w = 1.0 - r.disagreement;
                (num + if ok { w } else { 0.0 }, den + w)
            });
        report.weighted_accuracy = Some(if den > 0.0 { num / den } else { 0.0 });
    }
    for q in Quadrant::ALL {
        let (n, errors) = rows
            .iter()
            .zip(&correct)
            .filter(|(r, _)| r.quadrant == q)
            .fold((0, 0), |(n, e), (_, &ok)| (n + 1, e + usize::from(!ok)));
        if n > 0 {
            report.quadrant_errors.push(QuadrantErrors {
                quadrant: q,
                n,
                errors,
                error_rate: errors as f64 / n as f64,
            });
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Plain-text summary table of a comparison.
pub fn render_text(cmp: &ModelComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dimension: {}  weighting: {:?}",
        cmp.dimension, cmp.weighting
    );
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>8} {:>10} {:>9} {:>6} {:>6} {:>6} {:>6} {:>8}",
        "model", "n", "auc", "threshold", "accuracy", "tp", "fp", "tn", "fn", "skipped"
    );
    for r in &cmp.reports {
        let c = r.confusion.unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>8} {:>10} {:>9} {:>6} {:>6} {:>6} {:>6} {:>8}",
            r.model,
            r.n,
            opt(r.auc),
            opt(r.best_threshold),
            opt(r.best_accuracy),
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            r.skipped_refs.len()
        );
    }
    for r in &cmp.reports {
        if r.quadrant_errors.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\nerror rate by quadrant, {}:", r.model);
        for q in &r.quadrant_errors {
            let _ = writeln!(
                out,
                "  {:<20} {:>5}/{:<5} {:.4}",
                q.quadrant.as_str(),
                q.errors,
                q.n,
                q.error_rate
            );
        }
    }
    out
}

/// `fpr,tpr,threshold` rows for external plotting.
pub fn roc_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &report.roc_points {
        let t = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, t);
    }
    out
}
