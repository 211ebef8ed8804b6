//! Evaluation-set containers and calibration-subset drawing.
//!
//! An [`EvalSet`] bundles everything a scoring run needs: a logit matrix
//! (one row per sample, one column per class), optional penultimate-layer
//! features, integer labels, and a per-row [`ShiftTag`] describing which
//! distribution the row came from. Values are stored as `f64`; on-disk
//! storage is `f32` (see the io module), so loaded values are exactly
//! representable.
//!
//! Construction only enforces shape agreement between the parts. Semantic
//! checks (finiteness, label ranges, tag consistency, head consistency) are
//! the job of [`validate`], which reports every violation it finds instead
//! of stopping at the first.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which distribution a sample row came from.
///
/// `InD` rows are in-distribution test samples with valid labels.
/// `ShiftCov` rows are covariate-shifted but keep an in-vocabulary label.
/// `ShiftLabel` rows come from classes the classifier does not know; their
/// label is the sentinel `-1` and any prediction on them counts as an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftTag {
    InD,
    ShiftCov,
    ShiftLabel,
}

impl ShiftTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftTag::InD => "in_d",
            ShiftTag::ShiftCov => "shift_cov",
            ShiftTag::ShiftLabel => "shift_label",
        }
    }
}

impl fmt::Display for ShiftTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label value marking a row whose true class is outside the training set.
pub const OOD_LABEL: i64 = -1;

/// Errors from constructing or sampling evaluation data.
#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    /// A per-row component has a different length than the logit matrix.
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    /// Fewer in-distribution rows than the calibration rule requires.
    InsufficientCalibrationData { available: usize, required: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::LengthMismatch {
                what,
                got,
                expected,
            } => write!(f, "{what}: expected {expected} rows, got {got}"),
            DataError::InsufficientCalibrationData {
                available,
                required,
            } => write!(
                f,
                "calibration needs {required} in-distribution rows, only {available} available"
            ),
        }
    }
}

impl std::error::Error for DataError {}

/// Immutable evaluation set: logits plus per-row labels, tags, and
/// optional features.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    logits: Array2<f64>,
    features: Option<Array2<f64>>,
    labels: Vec<i64>,
    shift_tags: Vec<ShiftTag>,
}

impl EvalSet {
    /// Bundles the parts into a set, checking only that row counts agree.
    /// Value-level problems are reported by [`validate`], not here.
    pub fn new(
        logits: Array2<f64>,
        features: Option<Array2<f64>>,
        labels: Vec<i64>,
        shift_tags: Vec<ShiftTag>,
    ) -> Result<Self, DataError> {
        let n = logits.nrows();
        if labels.len() != n {
            return Err(DataError::LengthMismatch {
                what: "labels",
                got: labels.len(),
                expected: n,
            });
        }
        if shift_tags.len() != n {
            return Err(DataError::LengthMismatch {
                what: "shift_tags",
                got: shift_tags.len(),
                expected: n,
            });
        }
        if let Some(feats) = &features {
            if feats.nrows() != n {
                return Err(DataError::LengthMismatch {
                    what: "features",
                    got: feats.nrows(),
                    expected: n,
                });
            }
        }
        Ok(EvalSet {
            logits,
            features,
            labels,
            shift_tags,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.logits.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.logits.ncols()
    }

    pub fn logits(&self) -> ArrayView2<'_, f64> {
        self.logits.view()
    }

    /// Logit row `i` as a slice. Rows are contiguous because the matrix is
    /// owned and row-major.
    pub fn logit_row(&self, i: usize) -> &[f64] {
        self.logits
            .row(i)
            .to_slice()
            .expect("owned row-major matrix has contiguous rows")
    }

    pub fn features(&self) -> Option<ArrayView2<'_, f64>> {
        self.features.as_ref().map(|f| f.view())
    }

    pub fn feature_row(&self, i: usize) -> Option<&[f64]> {
        self.features.as_ref().map(|f| {
            f.row(i)
                .to_slice()
                .expect("owned row-major matrix has contiguous rows")
        })
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn shift_tags(&self) -> &[ShiftTag] {
        &self.shift_tags
    }

    /// Indices of rows carrying the given tag, in ascending order.
    pub fn rows_with_tag(&self, tag: ShiftTag) -> Vec<usize> {
        (0..self.num_samples())
            .filter(|&i| self.shift_tags[i] == tag)
            .collect()
    }

    /// New set containing the given rows (in the given order).
    /// Indices must be in bounds.
    pub fn subset(&self, rows: &[usize]) -> EvalSet {
        let k = self.num_classes();
        let logits = Array2::from_shape_fn((rows.len(), k), |(i, j)| self.logits[[rows[i], j]]);
        let features = self.features.as_ref().map(|f| {
            Array2::from_shape_fn((rows.len(), f.ncols()), |(i, j)| f[[rows[i], j]])
        });
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        let shift_tags = rows.iter().map(|&r| self.shift_tags[r]).collect();
        EvalSet {
            logits,
            features,
            labels,
            shift_tags,
        }
    }
}

/// Classifier head description: per-class weight norms, and optionally the
/// full weight matrix (feature dim x classes) and bias used to audit them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weight_norms: Vec<f64>,
    pub weights: Option<Array2<f64>>,
    pub bias: Option<Vec<f64>>,
}

impl ClassifierHead {
    pub fn from_norms(weight_norms: Vec<f64>) -> Self {
        ClassifierHead {
            weight_norms,
            weights: None,
            bias: None,
        }
    }

    /// Head from a full weight matrix (feature dim x classes); norms are the
    /// column L2 norms.
    pub fn from_weights(weights: Array2<f64>, bias: Option<Vec<f64>>) -> Self {
        let weight_norms = weights
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|w| w * w).sum::<f64>().sqrt())
            .collect();
        ClassifierHead {
            weight_norms,
            weights: Some(weights),
            bias,
        }
    }
}

/// One of the ten confidence scores. Used to tag score vectors and to
/// select a scorer by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreId {
    SrMax,
    SrDoctor,
    SrEnt,
    ConfMargin,
    GeoMargin,
    RlMax,
    Energy,
    Knn,
    Vim,
    Sirc,
}

impl ScoreId {
    pub const ALL: [ScoreId; 10] = [
        ScoreId::SrMax,
        ScoreId::SrDoctor,
        ScoreId::SrEnt,
        ScoreId::ConfMargin,
        ScoreId::GeoMargin,
        ScoreId::RlMax,
        ScoreId::Energy,
        ScoreId::Knn,
        ScoreId::Vim,
        ScoreId::Sirc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreId::SrMax => "sr_max",
            ScoreId::SrDoctor => "sr_doctor",
            ScoreId::SrEnt => "sr_ent",
            ScoreId::ConfMargin => "conf_margin",
            ScoreId::GeoMargin => "geo_margin",
            ScoreId::RlMax => "rl_max",
            ScoreId::Energy => "energy",
            ScoreId::Knn => "knn",
            ScoreId::Vim => "vim",
            ScoreId::Sirc => "sirc",
        }
    }
}

impl fmt::Display for ScoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScoreId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScoreId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown score '{s}'"))
    }
}

/// Per-sample confidence values produced by one score function.
/// Higher means more confidently accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub score_id: ScoreId,
    pub values: Vec<f64>,
}

/// Row indices (into an [`EvalSet`]) drawn for calibration, plus the seed
/// that produced them. Indices are distinct, in-distribution, and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationSubset {
    pub indices: Vec<usize>,
    pub seed: u64,
}

/// Draws the calibration subset: five rows per class, uniformly without
/// replacement from the in-distribution rows. Class counts inside the draw
/// may be imbalanced; only the total is fixed. Deterministic per seed.
pub fn draw_calibration(set: &EvalSet, seed: u64) -> Result<CalibrationSubset, DataError> {
    let required = 5 * set.num_classes();
    let in_d = set.rows_with_tag(ShiftTag::InD);
    if in_d.len() < required {
        return Err(DataError::InsufficientCalibrationData {
            available: in_d.len(),
            required,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, in_d.len(), required);
    let mut indices: Vec<usize> = picks.iter().map(|p| in_d[p]).collect();
    indices.sort_unstable();
    Ok(CalibrationSubset { indices, seed })
}

/// A single problem found by [`validate`]. Each variant names the row,
/// column, or class it refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySet,
    TooFewClasses { k: usize },
    NonFiniteLogit { row: usize, col: usize },
    NonFiniteFeature { row: usize, col: usize },
    LabelOutOfRange { row: usize, label: i64 },
    /// Label is -1 but the row is not tagged `ShiftLabel`.
    OodLabelOnUnshiftedRow { row: usize },
    /// Row tagged `ShiftLabel` but its label is not -1.
    ShiftLabelRowWithValidLabel { row: usize, label: i64 },
    WeightNormCount { got: usize, expected: usize },
    NonPositiveWeightNorm { class: usize, norm: f64 },
    WeightMatrixShape { got_classes: usize, expected: usize },
    /// Stored norm disagrees with the column norm of the weight matrix.
    WeightNormMismatch {
        class: usize,
        stored: f64,
        computed: f64,
    },
    BiasCount { got: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySet => write!(f, "set has no rows"),
            Violation::TooFewClasses { k } => write!(f, "needs at least 2 classes, got {k}"),
            Violation::NonFiniteLogit { row, col } => {
                write!(f, "row {row}: non-finite logit at column {col}")
            }
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "row {row}: non-finite feature at column {col}")
            }
            Violation::LabelOutOfRange { row, label } => {
                write!(f, "row {row}: label {label} outside 0..K-1 and -1")
            }
            Violation::OodLabelOnUnshiftedRow { row } => {
                write!(f, "row {row}: label -1 on a row not tagged shift_label")
            }
            Violation::ShiftLabelRowWithValidLabel { row, label } => {
                write!(f, "row {row}: tagged shift_label but label is {label}, not -1")
            }
            Violation::WeightNormCount { got, expected } => {
                write!(f, "head: {got} weight norms for {expected} classes")
            }
            Violation::NonPositiveWeightNorm { class, norm } => {
                write!(f, "head: weight norm for class {class} is {norm}, must be positive")
            }
            Violation::WeightMatrixShape { got_classes, expected } => {
                write!(f, "head: weight matrix has {got_classes} columns for {expected} classes")
            }
            Violation::WeightNormMismatch {
                class,
                stored,
                computed,
            } => write!(
                f,
                "head: stored norm {stored} for class {class} disagrees with column norm {computed}"
            ),
            Violation::BiasCount { got, expected } => {
                write!(f, "head: {got} bias entries for {expected} classes")
            }
        }
    }
}

/// Tolerance for auditing stored weight norms against a full weight matrix.
const NORM_AUDIT_TOL: f64 = 1e-9;

/// Checks every semantic invariant of a set (and head, when given) and
/// returns all violations found. An empty result means the set is fit for
/// scoring and selection.
pub fn validate(set: &EvalSet, head: Option<&ClassifierHead>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = set.num_samples();
    let k = set.num_classes();
    if n == 0 {
        out.push(Violation::EmptySet);
    }
    if k < 2 {
        out.push(Violation::TooFewClasses { k });
    }
    for (row, logit_row) in set.logits.rows().into_iter().enumerate() {
        for (col, v) in logit_row.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFiniteLogit { row, col });
            }
        }
    }
    if let Some(feats) = &set.features {
        for (row, feat_row) in feats.rows().into_iter().enumerate() {
            for (col, v) in feat_row.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation::NonFiniteFeature { row, col });
                }
            }
        }
    }
    for row in 0..n {
        let label = set.labels[row];
        let tag = set.shift_tags[row];
        let in_range = label == OOD_LABEL || (0 <= label && (label as usize) < k);
        if !in_range {
            out.push(Violation::LabelOutOfRange { row, label });
        } else if label == OOD_LABEL && tag != ShiftTag::ShiftLabel {
            out.push(Violation::OodLabelOnUnshiftedRow { row });
        } else if label != OOD_LABEL && tag == ShiftTag::ShiftLabel {
            out.push(Violation::ShiftLabelRowWithValidLabel { row, label });
        }
    }
    if let Some(head) = head {
        if head.weight_norms.len() != k {
            out.push(Violation::WeightNormCount {
                got: head.weight_norms.len(),
                expected: k,
            });
        }
        for (class, &norm) in head.weight_norms.iter().enumerate() {
            if !(norm.is_finite() && norm > 0.0) {
                out.push(Violation::NonPositiveWeightNorm { class, norm });
            }
        }
        if let Some(weights) = &head.weights {
            if weights.ncols() != k {
                out.push(Violation::WeightMatrixShape {
                    got_classes: weights.ncols(),
                    expected: k,
                });
            } else if head.weight_norms.len() == k {
                for (class, col) in weights.columns().into_iter().enumerate() {
                    let computed = col.iter().map(|w| w * w).sum::<f64>().sqrt();
                    let stored = head.weight_norms[class];
                    if (computed - stored).abs() > NORM_AUDIT_TOL {
                        out.push(Violation::WeightNormMismatch {
                            class,
                            stored,
                            computed,
                        });
                    }
                }
            }
        }
        if let Some(bias) = &head.bias {
            if bias.len() != k {
                out.push(Violation::BiasCount {
                    got: bias.len(),
                    expected: k,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_set() -> EvalSet {
        EvalSet::new(
            array![[2.0, 1.0], [0.5, 1.5], [0.0, 3.0]],
            None,
            vec![0, 1, -1],
            vec![ShiftTag::InD, ShiftTag::ShiftCov, ShiftTag::ShiftLabel],
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_length_mismatches() {
        let logits = array![[1.0, 0.0], [0.0, 1.0]];
        let err = EvalSet::new(logits.clone(), None, vec![0], vec![ShiftTag::InD; 2]).unwrap_err();
        assert_eq!(
            err,
            DataError::LengthMismatch {
                what: "labels",
                got: 1,
                expected: 2
            }
        );
        let err =
            EvalSet::new(logits.clone(), None, vec![0, 1], vec![ShiftTag::InD]).unwrap_err();
        assert!(matches!(err, DataError::LengthMismatch { what: "shift_tags", .. }));
        let err = EvalSet::new(
            logits,
            Some(array![[1.0_f64, 2.0, 3.0]]),
            vec![0, 1],
            vec![ShiftTag::InD; 2],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::LengthMismatch { what: "features", .. }));
    }

    #[test]
    fn valid_set_has_no_violations() {
        assert!(validate(&small_set(), None).is_empty());
    }

    #[test]
    fn validate_reports_each_problem_with_its_location() {
        let set = EvalSet::new(
            array![[f64::NAN, 1.0], [0.5, 1.5], [0.0, 3.0]],
            Some(array![[0.0], [f64::INFINITY], [1.0]]),
            vec![5, -1, 1],
            vec![ShiftTag::InD, ShiftTag::InD, ShiftTag::ShiftLabel],
        )
        .unwrap();
        let violations = validate(&set, None);
        assert!(violations.contains(&Violation::NonFiniteLogit { row: 0, col: 0 }));
        assert!(violations.contains(&Violation::NonFiniteFeature { row: 1, col: 0 }));
        assert!(violations.contains(&Violation::LabelOutOfRange { row: 0, label: 5 }));
        assert!(violations.contains(&Violation::OodLabelOnUnshiftedRow { row: 1 }));
        assert!(
            violations.contains(&Violation::ShiftLabelRowWithValidLabel { row: 2, label: 1 })
        );
        assert_eq!(violations.len(), 5);
    }

    #[test]
    fn validate_audits_head_against_set() {
        let set = small_set();
        let bad_norms = ClassifierHead::from_norms(vec![1.0, 0.0, 1.0]);
        let violations = validate(&set, Some(&bad_norms));
        assert!(violations.contains(&Violation::WeightNormCount { got: 3, expected: 2 }));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositiveWeightNorm { class: 1, .. })));

        let mut head = ClassifierHead::from_weights(array![[3.0, 0.0], [4.0, 1.0]], None);
        assert_eq!(head.weight_norms, vec![5.0, 1.0]);
        head.weight_norms[0] = 5.5;
        let violations = validate(&set, Some(&head));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::WeightNormMismatch { class: 0, .. })));

        let head = ClassifierHead {
            weight_norms: vec![1.0, 1.0],
            weights: None,
            bias: Some(vec![0.0; 3]),
        };
        let violations = validate(&set, Some(&head));
        assert_eq!(violations, vec![Violation::BiasCount { got: 3, expected: 2 }]);
    }

    #[test]
    fn empty_and_single_class_sets_are_flagged() {
        let set = EvalSet::new(Array2::zeros((0, 1)), None, vec![], vec![]).unwrap();
        let violations = validate(&set, None);
        assert!(violations.contains(&Violation::EmptySet));
        assert!(violations.contains(&Violation::TooFewClasses { k: 1 }));
    }

    // ─── calibration drawing ───

    fn tagged_set(n_in: usize, n_other: usize, k: usize) -> EvalSet {
        let n = n_in + n_other;
        let logits = Array2::zeros((n, k));
        let mut labels = vec![0_i64; n];
        let mut tags = vec![ShiftTag::InD; n];
        for i in n_in..n {
            tags[i] = ShiftTag::ShiftLabel;
            labels[i] = OOD_LABEL;
        }
        EvalSet::new(logits, None, labels, tags).unwrap()
    }

    #[test]
    fn calibration_draw_is_deterministic_and_in_distribution() {
        let set = tagged_set(40, 10, 3);
        let a = draw_calibration(&set, 7).unwrap();
        let b = draw_calibration(&set, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices.len(), 15);
        assert_eq!(a.seed, 7);
        let mut deduped = a.indices.clone();
        deduped.dedup();
        assert_eq!(deduped.len(), 15, "indices must be distinct and sorted");
        assert!(a.indices.iter().all(|&i| i < 40), "only InD rows qualify");
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));

        let c = draw_calibration(&set, 8).unwrap();
        assert_ne!(a.indices, c.indices, "different seeds should differ here");
    }

    #[test]
    fn calibration_draw_requires_five_rows_per_class() {
        let set = tagged_set(14, 0, 3);
        let err = draw_calibration(&set, 0).unwrap_err();
        assert_eq!(
            err,
            DataError::InsufficientCalibrationData {
                available: 14,
                required: 15
            }
        );
        assert!(draw_calibration(&tagged_set(15, 0, 3), 0).is_ok());
    }

    #[test]
    fn subset_keeps_row_alignment() {
        let set = small_set();
        let sub = set.subset(&[2, 0]);
        assert_eq!(sub.num_samples(), 2);
        assert_eq!(sub.labels(), &[-1, 0]);
        assert_eq!(sub.shift_tags(), &[ShiftTag::ShiftLabel, ShiftTag::InD]);
        assert_eq!(sub.logit_row(0), &[0.0, 3.0]);
        assert_eq!(sub.logit_row(1), &[2.0, 1.0]);
    }
}
