//! Binary detection metrics and the detection-vs-selection report.
//!
//! Out-of-distribution detection treats in-distribution samples as the
//! positive class: a detector keeps a sample when its score exceeds a
//! threshold, so higher scores should mean "more in-distribution". The
//! metrics here are threshold-free summaries of that sweep:
//!
//! - [`auroc`]: probability a random positive outscores a random negative,
//!   ties counting one half (computed via midranks, exact).
//! - [`aupr`]: average precision, the step-wise integral of precision over
//!   recall with tied scores entering as a group and no interpolation.
//! - [`fpr_at_tpr`]: false-positive rate at the largest threshold whose
//!   true-positive rate reaches the target.
//!
//! [`ood_vs_sc_report`] evaluates one score both ways on a mixed set: as a
//! detector (metrics above) and as a selector (risk-coverage curve over the
//! same rows). A score can be an excellent detector while ranking the
//! in-distribution mistakes above the in-distribution hits; the report
//! makes that visible by pairing the two views with score histograms split
//! into correct, wrong, and label-shifted groups.

use crate::data::{EvalSet, ScoreVector, ShiftTag};
use crate::selection::{rc_curve, zero_one_losses, RCCurve};
use std::fmt;

/// Scores plus ground-truth membership for binary detection. Positive =
/// in-distribution (kept) by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDetectionSet {
    scores: Vec<f64>,
    positive: Vec<bool>,
}

/// Errors from detection-metric computation.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionError {
    LengthMismatch { scores: usize, labels: usize },
    /// Both classes must be represented.
    DegenerateClasses { positives: usize, negatives: usize },
    /// TPR target outside (0, 1].
    InvalidTprTarget { target: f64 },
}

impl fmt::Display for DetectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionError::LengthMismatch { scores, labels } => {
                write!(f, "{scores} scores vs {labels} labels")
            }
            DetectionError::DegenerateClasses {
                positives,
                negatives,
            } => write!(
                f,
                "detection needs both classes, got {positives} positives and {negatives} negatives"
            ),
            DetectionError::InvalidTprTarget { target } => {
                write!(f, "tpr target {target} outside (0, 1]")
            }
        }
    }
}

impl std::error::Error for DetectionError {}

impl BinaryDetectionSet {
    pub fn new(scores: Vec<f64>, positive: Vec<bool>) -> Result<Self, DetectionError> {
        if scores.len() != positive.len() {
            return Err(DetectionError::LengthMismatch {
                scores: scores.len(),
                labels: positive.len(),
            });
        }
        let positives = positive.iter().filter(|&&p| p).count();
        let negatives = positive.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(DetectionError::DegenerateClasses {
                positives,
                negatives,
            });
        }
        Ok(BinaryDetectionSet { scores, positive })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn positive(&self) -> &[bool] {
        &self.positive
    }

    fn num_positive(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }

    /// Indices by score descending; tied scores stay grouped for the sweep.
    fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .expect("detection scores must not be NaN")
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Area under the ROC curve via midranks: rank everything ascending, give
/// tied values their average rank, and count how far the positive ranks sit
/// above the minimum possible. Equals the pairwise statistic with ties
/// worth one half, without the quadratic pass.
pub fn auroc(d: &BinaryDetectionSet) -> f64 {
    let n = d.scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d.scores[a].partial_cmp(&d.scores[b]).expect("no NaN"));
    let mut rank_sum_pos = 0.0_f64;
    let mut at = 0;
    while at < n {
        let mut end = at + 1;
        while end < n && d.scores[idx[end]] == d.scores[idx[at]] {
            end += 1;
        }
        // Ranks are 1-based: positions at..end share the average rank.
        let midrank = (at + 1 + end) as f64 / 2.0;
        for &i in &idx[at..end] {
            if d.positive[i] {
                rank_sum_pos += midrank;
            }
        }
        at = end;
    }
    let pos = d.num_positive() as f64;
    let neg = (n - d.num_positive()) as f64;
    (rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Average precision: precision integrated over recall as a step function,
/// evaluated after each distinct-score group enters.
pub fn aupr(d: &BinaryDetectionSet) -> f64 {
    let order = d.descending();
    let pos = d.num_positive() as f64;
    let mut tp = 0_u64;
    let mut fp = 0_u64;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut at = 0;
    while at < order.len() {
        let mut end = at + 1;
        while end < order.len() && d.scores[order[end]] == d.scores[order[at]] {
            end += 1;
        }
        for &i in &order[at..end] {
            if d.positive[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        at = end;
    }
    area
}

/// False-positive rate at the largest threshold whose TPR reaches the
/// target: sweep distinct-score groups from the top and stop at the first
/// boundary with TPR >= target. The target must be in (0, 1]; TPR reaches 1
/// at the bottom of the sweep, so a result always exists.
pub fn fpr_at_tpr(d: &BinaryDetectionSet, tpr_target: f64) -> Result<f64, DetectionError> {
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(DetectionError::InvalidTprTarget { target: tpr_target });
    }
    let order = d.descending();
    let pos = d.num_positive() as f64;
    let neg = (d.scores.len() - d.num_positive()) as f64;
    let mut tp = 0_u64;
    let mut fp = 0_u64;
    let mut at = 0;
    while at < order.len() {
        let mut end = at + 1;
        while end < order.len() && d.scores[order[end]] == d.scores[order[at]] {
            end += 1;
        }
        for &i in &order[at..end] {
            if d.positive[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        if tp as f64 / pos >= tpr_target {
            return Ok(fp as f64 / neg);
        }
        at = end;
    }
    unreachable!("TPR reaches 1 once every sample is accepted");
}

/// Default TPR operating point for the detection report.
pub const DEFAULT_TPR_TARGET: f64 = 0.95;

/// Number of bins in the report histograms.
pub const HISTOGRAM_BINS: usize = 30;

/// Score histograms over the mixed set, split by what the selector should
/// do with each row. Shared uniform bin edges (length bins + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistograms {
    pub edges: Vec<f64>,
    pub correct_in_d: Vec<u64>,
    pub wrong_in_d: Vec<u64>,
    pub shift_label: Vec<u64>,
}

/// One score evaluated as a detector and as a selector on the same
/// in-distribution + label-shift mix.
#[derive(Debug, Clone, PartialEq)]
pub struct OodScReport {
    pub auroc: f64,
    pub aupr: f64,
    pub tpr_target: f64,
    pub fpr_at_tpr: f64,
    /// Risk-coverage curve over the mixed rows (label-shift rows always
    /// count as errors when accepted).
    pub rc: RCCurve,
    pub histograms: ScoreHistograms,
}

/// Builds the combined report from a scored set. Rows tagged `ShiftCov` are
/// ignored here: the detection question is in-distribution vs unknown
/// classes. Requires at least one row of each.
pub fn ood_vs_sc_report(
    set: &EvalSet,
    scores: &ScoreVector,
    tpr_target: f64,
) -> Result<OodScReport, DetectionError> {
    if scores.values.len() != set.num_samples() {
        return Err(DetectionError::LengthMismatch {
            scores: scores.values.len(),
            labels: set.num_samples(),
        });
    }
    let mut rows = set.rows_with_tag(ShiftTag::InD);
    let split = rows.len();
    rows.extend(set.rows_with_tag(ShiftTag::ShiftLabel));
    let mixed_scores: Vec<f64> = rows.iter().map(|&i| scores.values[i]).collect();
    let positive: Vec<bool> = (0..rows.len()).map(|i| i < split).collect();
    let detection = BinaryDetectionSet::new(mixed_scores.clone(), positive)?;

    let mixed = set.subset(&rows);
    let losses = zero_one_losses(&mixed);
    let rc = rc_curve(&mixed_scores, &losses).expect("mixed set verified non-empty");

    let lo = mixed_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_raw = mixed_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Degenerate range still needs a positive bin width.
    let hi = if hi_raw > lo { hi_raw } else { lo + 1.0 };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|b| lo + width * b as f64).collect();
    let mut histograms = ScoreHistograms {
        edges,
        correct_in_d: vec![0; HISTOGRAM_BINS],
        wrong_in_d: vec![0; HISTOGRAM_BINS],
        shift_label: vec![0; HISTOGRAM_BINS],
    };
    for (i, &score) in mixed_scores.iter().enumerate() {
        let bin = (((score - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        let counts = if i >= split {
            &mut histograms.shift_label
        } else if losses.values[i] == 0 {
            &mut histograms.correct_in_d
        } else {
            &mut histograms.wrong_in_d
        };
        counts[bin] += 1;
    }

    Ok(OodScReport {
        auroc: auroc(&detection),
        aupr: aupr(&detection),
        tpr_target,
        fpr_at_tpr: fpr_at_tpr(&detection, tpr_target)?,
        rc,
        histograms,
    })
}
