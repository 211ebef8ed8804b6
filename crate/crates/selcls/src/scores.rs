//! Confidence scores over logit rows.
//!
//! Every score maps a sample to a real number where higher means "more
//! confidently accept". Ten scores are provided:
//!
//! | id            | value                                                        | needs            |
//! |---------------|--------------------------------------------------------------|------------------|
//! | `sr_max`      | max softmax probability                                      | logits           |
//! | `sr_doctor`   | 1 - 1/sum(p^2) over softmax p                                | logits           |
//! | `sr_ent`      | sum p*ln(p) (negative entropy; 0 at one-hot is the maximum)  | logits           |
//! | `conf_margin` | top logit minus runner-up                                    | logits           |
//! | `geo_margin`  | top signed distance minus runner-up (logit / weight norm)    | logits + head    |
//! | `rl_max`      | top raw logit                                                | logits           |
//! | `energy`      | log-sum-exp of the logits                                    | logits           |
//! | `knn`         | negated distance to the k-th nearest calibration logit row   | logits + subset  |
//! | `vim`         | energy minus scaled residual off a principal feature subspace| features + fit   |
//! | `sirc`        | softmax-response term gated by a secondary score             | logits + fit     |
//!
//! The softmax-family scores are not invariant to logit scaling; the margin
//! scores are. That contrast is the point of keeping both around, and the
//! asymptotics module quantifies it.
//!
//! Ties in a logit row are broken by ascending class index wherever an
//! ordering is needed.

use crate::data::{CalibrationSubset, ClassifierHead, EvalSet, ScoreId, ScoreVector};
use ndarray::Array2;
use std::fmt;

/// Errors from score evaluation or fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    /// Score needs per-class weight norms but no head was supplied.
    MissingHead { score: ScoreId },
    /// Score needs penultimate features but the set has none.
    MissingFeatures { score: ScoreId },
    /// KNN reference subset has no rows (after excluding the query).
    EmptyReference,
    /// KNN order k exceeds the usable reference rows.
    InsufficientReference { available: usize, k: usize },
    /// Centered calibration features have rank below the requested
    /// principal dimension (singular values under 1e-12).
    DegenerateSpectrum { rank: usize, requested: usize },
    /// Secondary score is constant over calibration, so the gate cannot be
    /// scaled.
    ZeroVariance,
    /// Composite score used as its own secondary.
    InvalidSecondary,
    /// Score requires a fitted config that was not supplied.
    MissingConfig { score: ScoreId },
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::MissingHead { score } => {
                write!(f, "{score} needs classifier weight norms")
            }
            ScoreError::MissingFeatures { score } => {
                write!(f, "{score} needs penultimate features")
            }
            ScoreError::EmptyReference => write!(f, "knn reference set is empty"),
            ScoreError::InsufficientReference { available, k } => {
                write!(f, "knn needs k={k} reference rows, only {available} usable")
            }
            ScoreError::DegenerateSpectrum { rank, requested } => write!(
                f,
                "calibration features have rank {rank}, below the {requested} principal directions requested"
            ),
            ScoreError::ZeroVariance => {
                write!(f, "secondary score is constant over calibration")
            }
            ScoreError::InvalidSecondary => {
                write!(f, "sirc cannot use itself as the secondary score")
            }
            ScoreError::MissingConfig { score } => {
                write!(f, "{score} requires a fitted config")
            }
        }
    }
}

impl std::error::Error for ScoreError {}

// ─── row primitives ───

/// Numerically stable softmax: shifts by the row max before exponentiating.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Indices of the largest and second-largest entries; equal values resolve
/// to the lower index. Needs at least two entries.
pub fn top_two(z: &[f64]) -> (usize, usize) {
    assert!(z.len() >= 2, "top_two needs at least two entries");
    let (mut first, mut second) = if z[1] > z[0] { (1, 0) } else { (0, 1) };
    for j in 2..z.len() {
        if z[j] > z[first] {
            second = first;
            first = j;
        } else if z[j] > z[second] {
            second = j;
        }
    }
    (first, second)
}

/// Maximum softmax probability, in [1/K, 1]; equals 1/K iff all logits tie.
pub fn sr_max(z: &[f64]) -> f64 {
    softmax(z).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// 1 - 1/||p||^2 over softmax probabilities p. Ranges over [1-K, 0], with 0
/// approached at one-hot confidence.
pub fn sr_doctor(z: &[f64]) -> f64 {
    let sq: f64 = softmax(z).into_iter().map(|p| p * p).sum();
    1.0 - 1.0 / sq
}

/// Negative Shannon entropy of the softmax, sum p*ln(p), in [-ln K, 0].
/// Probabilities that underflow to zero contribute zero (the x*ln(x) limit).
pub fn sr_ent(z: &[f64]) -> f64 {
    softmax(z)
        .into_iter()
        .map(|p| if p > 0.0 { p * p.ln() } else { 0.0 })
        .sum()
}

/// Top logit minus runner-up. Invariant under shifting a row by a constant
/// and scales linearly with the row.
pub fn conf_margin(z: &[f64]) -> f64 {
    let (first, second) = top_two(z);
    z[first] - z[second]
}

/// Per-class signed distances to the decision hyperplanes: logit divided by
/// the class weight norm. With bias folded into the logits this is the
/// geometric distance scale of the head.
pub fn signed_distances(z: &[f64], head: &ClassifierHead) -> Vec<f64> {
    z.iter()
        .zip(&head.weight_norms)
        .map(|(&zj, &nj)| zj / nj)
        .collect()
}

/// Top signed distance minus runner-up, the geometric analogue of
/// [`conf_margin`]. Equal to it when all weight norms are 1.
pub fn geo_margin(z: &[f64], head: &ClassifierHead) -> f64 {
    let d = signed_distances(z, head);
    let (first, second) = top_two(&d);
    d[first] - d[second]
}

/// Top raw logit.
pub fn rl_max(z: &[f64]) -> f64 {
    z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Log-sum-exp of the logits, shifted by the max so large rows do not
/// overflow: energy([1000, 0]) = 1000 exactly.
pub fn energy(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

// ─── k-nearest-neighbor score ───

/// KNN score configuration: neighbor order and the calibration rows that
/// serve as the reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub reference: CalibrationSubset,
}

impl KnnConfig {
    /// Default neighbor order.
    pub const DEFAULT_K: usize = 2;

    pub fn new(k: usize, reference: CalibrationSubset) -> Self {
        KnnConfig { k, reference }
    }
}

/// Negated Euclidean distance from the query logit row to its k-th nearest
/// reference logit row. A query that is itself a reference row (by index)
/// is excluded from its own neighbor set; a reference row that merely has
/// identical coordinates still counts.
pub fn knn_score(set: &EvalSet, cfg: &KnnConfig, query_row: usize) -> Result<f64, ScoreError> {
    if cfg.reference.indices.is_empty() {
        return Err(ScoreError::EmptyReference);
    }
    let q = set.logit_row(query_row);
    let mut dists: Vec<f64> = Vec::with_capacity(cfg.reference.indices.len());
    for &r in &cfg.reference.indices {
        if r == query_row {
            continue;
        }
        let d2: f64 = set
            .logit_row(r)
            .iter()
            .zip(q)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        dists.push(d2.sqrt());
    }
    if dists.is_empty() {
        return Err(ScoreError::EmptyReference);
    }
    if cfg.k == 0 || cfg.k > dists.len() {
        return Err(ScoreError::InsufficientReference {
            available: dists.len(),
            k: cfg.k,
        });
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    Ok(-dists[cfg.k - 1])
}

// ─── ViM score ───

/// Fitted ViM parameters: an orthonormal basis of the top principal
/// directions of the centered calibration features, the calibration feature
/// mean, and the scale that puts the residual term on the energy scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VimConfig {
    pub principal_dim: usize,
    /// D x principal_dim, orthonormal columns.
    pub principal_basis: Array2<f64>,
    /// Mean of the calibration features, subtracted before projecting.
    pub mean: Vec<f64>,
    /// mean(max logit) / mean(residual norm) over calibration.
    pub alpha: f64,
}

/// Singular values at or below this are treated as rank-deficient.
const SPECTRUM_TOL: f64 = 1e-12;

/// Fits ViM on the calibration rows: centers their features, takes the top
/// `principal_dim` right singular vectors as the principal basis, and sets
/// alpha so the mean calibration residual matches the mean top logit.
/// All-zero calibration residuals (features already inside the subspace)
/// yield alpha = 0; the residual term is identically zero there anyway.
pub fn fit_vim(
    set: &EvalSet,
    cal: &CalibrationSubset,
    principal_dim: usize,
) -> Result<VimConfig, ScoreError> {
    let feats = set
        .features()
        .ok_or(ScoreError::MissingFeatures { score: ScoreId::Vim })?;
    let d = feats.ncols();
    let m = cal.indices.len();
    assert!(m > 0, "calibration subset must be non-empty");
    assert!(
        principal_dim >= 1 && principal_dim <= d,
        "principal_dim must be in 1..=D"
    );

    let mut mean = vec![0.0; d];
    for &r in &cal.indices {
        for (j, v) in set.feature_row(r).expect("features checked above").iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }

    let mut centered = nalgebra::DMatrix::<f64>::zeros(m, d);
    for (i, &r) in cal.indices.iter().enumerate() {
        for (j, v) in set.feature_row(r).expect("features checked above").iter().enumerate() {
            centered[(i, j)] = v - mean[j];
        }
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > SPECTRUM_TOL)
        .count();
    if rank < principal_dim {
        return Err(ScoreError::DegenerateSpectrum {
            rank,
            requested: principal_dim,
        });
    }
    // Singular values come out descending, so the leading rows of V^T are
    // the top principal directions.
    let principal_basis =
        Array2::from_shape_fn((d, principal_dim), |(j, c)| v_t[(c, j)]);

    let cfg_unscaled = VimConfig {
        principal_dim,
        principal_basis,
        mean,
        alpha: 1.0,
    };
    let mut sum_residual = 0.0;
    let mut sum_max_logit = 0.0;
    for &r in &cal.indices {
        sum_residual += residual_norm(set.feature_row(r).expect("features checked above"), &cfg_unscaled);
        sum_max_logit += rl_max(set.logit_row(r));
    }
    let mean_residual = sum_residual / m as f64;
    let alpha = if mean_residual > SPECTRUM_TOL {
        (sum_max_logit / m as f64) / mean_residual
    } else {
        0.0
    };
    Ok(VimConfig { alpha, ..cfg_unscaled })
}

/// Norm of the component of (f - mean) orthogonal to the principal basis.
pub fn residual_norm(f: &[f64], cfg: &VimConfig) -> f64 {
    let d = cfg.mean.len();
    debug_assert_eq!(f.len(), d);
    let centered: Vec<f64> = f.iter().zip(&cfg.mean).map(|(&a, &b)| a - b).collect();
    // (I - B B^T) x computed as x - B (B^T x).
    let mut coeffs = vec![0.0; cfg.principal_dim];
    for (c, coeff) in coeffs.iter_mut().enumerate() {
        *coeff = (0..d).map(|j| cfg.principal_basis[[j, c]] * centered[j]).sum();
    }
    let mut sq = 0.0;
    for (j, &x) in centered.iter().enumerate() {
        let proj: f64 = (0..cfg.principal_dim)
            .map(|c| cfg.principal_basis[[j, c]] * coeffs[c])
            .sum();
        let r = x - proj;
        sq += r * r;
    }
    sq.sqrt()
}

/// ViM score: energy of the logits minus the scaled feature residual.
pub fn vim_score(z: &[f64], f: &[f64], cfg: &VimConfig) -> f64 {
    energy(z) - cfg.alpha * residual_norm(f, cfg)
}

// ─── SIRC score ───

/// Fitted SIRC gate: the secondary score is shifted by `a` (three standard
/// deviations below its calibration mean) and scaled by `b` (inverse
/// standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SircConfig {
    pub a: f64,
    pub b: f64,
}

/// Fits the SIRC gate from the secondary score's calibration values:
/// a = mean - 3*std, b = 1/std (population std). A constant secondary
/// yields [`ScoreError::ZeroVariance`].
pub fn fit_sirc_from_values(secondary_on_cal: &[f64]) -> Result<SircConfig, ScoreError> {
    assert!(!secondary_on_cal.is_empty(), "calibration values required");
    let n = secondary_on_cal.len() as f64;
    let mean = secondary_on_cal.iter().sum::<f64>() / n;
    let var = secondary_on_cal.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return Err(ScoreError::ZeroVariance);
    }
    Ok(SircConfig {
        a: mean - 3.0 * std,
        b: 1.0 / std,
    })
}

/// Fits the SIRC gate by evaluating the secondary score on the calibration
/// rows. The secondary may be any non-composite score.
pub fn fit_sirc(
    set: &EvalSet,
    cal: &CalibrationSubset,
    secondary: ScoreId,
    inputs: &ScoreInputs,
) -> Result<SircConfig, ScoreError> {
    if secondary == ScoreId::Sirc {
        return Err(ScoreError::InvalidSecondary);
    }
    let all = score_set(set, secondary, inputs)?;
    let on_cal: Vec<f64> = cal.indices.iter().map(|&i| all.values[i]).collect();
    fit_sirc_from_values(&on_cal)
}

/// SIRC value: the (negated) softmax-response deficit, inflated when the
/// secondary score `s2` falls toward or below its calibration range.
/// Always in (-2(1-sr), 0) for finite inputs; higher is more confident.
pub fn sirc_score(z: &[f64], s2: f64, cfg: &SircConfig) -> f64 {
    -(1.0 - sr_max(z)) * (1.0 + (-cfg.b * (s2 - cfg.a)).exp())
}

// ─── whole-set driver ───

/// Everything the driver may need beyond the logits: the classifier head
/// and the fitted configs for the composite scores. Plain logit scores
/// ignore all of it.
#[derive(Debug, Clone, Default)]
pub struct ScoreInputs<'a> {
    pub head: Option<&'a ClassifierHead>,
    pub knn: Option<&'a KnnConfig>,
    pub vim: Option<&'a VimConfig>,
    pub sirc: Option<&'a SircConfig>,
    /// Secondary score gating SIRC. `None` defaults to energy.
    pub sirc_secondary: Option<ScoreId>,
}

/// Default SIRC secondary when none is requested.
pub const DEFAULT_SIRC_SECONDARY: ScoreId = ScoreId::Energy;

/// Evaluates one score on every row of the set. Pure: identical inputs give
/// identical output, and the set is never mutated.
pub fn score_set(
    set: &EvalSet,
    id: ScoreId,
    inputs: &ScoreInputs,
) -> Result<ScoreVector, ScoreError> {
    let n = set.num_samples();
    let mut values = Vec::with_capacity(n);
    match id {
        ScoreId::SrMax => values.extend((0..n).map(|i| sr_max(set.logit_row(i)))),
        ScoreId::SrDoctor => values.extend((0..n).map(|i| sr_doctor(set.logit_row(i)))),
        ScoreId::SrEnt => values.extend((0..n).map(|i| sr_ent(set.logit_row(i)))),
        ScoreId::ConfMargin => values.extend((0..n).map(|i| conf_margin(set.logit_row(i)))),
        ScoreId::GeoMargin => {
            let head = inputs.head.ok_or(ScoreError::MissingHead { score: id })?;
            values.extend((0..n).map(|i| geo_margin(set.logit_row(i), head)));
        }
        ScoreId::RlMax => values.extend((0..n).map(|i| rl_max(set.logit_row(i)))),
        ScoreId::Energy => values.extend((0..n).map(|i| energy(set.logit_row(i)))),
        ScoreId::Knn => {
            let cfg = inputs.knn.ok_or(ScoreError::MissingConfig { score: id })?;
            for i in 0..n {
                values.push(knn_score(set, cfg, i)?);
            }
        }
        ScoreId::Vim => {
            let cfg = inputs.vim.ok_or(ScoreError::MissingConfig { score: id })?;
            for i in 0..n {
                let f = set
                    .feature_row(i)
                    .ok_or(ScoreError::MissingFeatures { score: id })?;
                values.push(vim_score(set.logit_row(i), f, cfg));
            }
        }
        ScoreId::Sirc => {
            let cfg = inputs.sirc.ok_or(ScoreError::MissingConfig { score: id })?;
            let secondary = inputs.sirc_secondary.unwrap_or(DEFAULT_SIRC_SECONDARY);
            if secondary == ScoreId::Sirc {
                return Err(ScoreError::InvalidSecondary);
            }
            let s2 = score_set(set, secondary, inputs)?;
            values.extend(
                (0..n).map(|i| sirc_score(set.logit_row(i), s2.values[i], cfg)),
            );
        }
    }
    debug_assert!(values.iter().all(|v| v.is_finite()), "scores must be finite");
    Ok(ScoreVector { score_id: id, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ShiftTag;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    // ─── softmax-family values against hand-derived constants ───

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[3.0, 3.0, 3.0, 3.0]);
        for v in p {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[0], 1.0);
        assert_eq!(sr_max(&[1000.0, 0.0]), 1.0);
    }

    #[test]
    fn sr_trio_matches_hand_computed_probabilities() {
        // softmax(ln[6,3,1]) = [0.6, 0.3, 0.1] exactly in real arithmetic.
        let z = [6.0_f64.ln(), 3.0_f64.ln(), 0.0];
        assert_abs_diff_eq!(sr_max(&z), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(sr_doctor(&z), -1.1739130434782612, epsilon = 1e-12);
        assert_abs_diff_eq!(sr_ent(&z), -0.8979457248567797, epsilon = 1e-12);
    }

    #[test]
    fn sr_scores_hit_their_uniform_floor_exactly_at_ties() {
        let z = [1.0, 1.0, 1.0, 1.0];
        assert_abs_diff_eq!(sr_max(&z), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sr_doctor(&z), 1.0 - 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sr_ent(&z), -(4.0_f64.ln()), epsilon = 1e-12);
    }

    // ─── margins and raw-logit scores ───

    #[test]
    fn conf_margin_is_top_gap_and_zero_on_ties() {
        assert_eq!(conf_margin(&[0.2, 1.7, -3.0]), 1.7 - 0.2);
        assert_eq!(conf_margin(&[0.2, 1.7, 1.7, -3.0]), 0.0);
    }

    #[test]
    fn top_two_breaks_ties_toward_lower_index() {
        assert_eq!(top_two(&[1.0, 3.0, 3.0]), (1, 2));
        assert_eq!(top_two(&[3.0, 3.0, 1.0]), (0, 1));
        assert_eq!(top_two(&[2.0, 2.0, 2.0]), (0, 1));
    }

    #[test]
    fn geo_margin_divides_by_weight_norms() {
        let head = ClassifierHead::from_norms(vec![2.0, 1.0]);
        // d = [2, 3]: the geometric winner differs from the logit winner.
        assert_abs_diff_eq!(geo_margin(&[4.0, 3.0], &head), 1.0, epsilon = 1e-15);
        let unit = ClassifierHead::from_norms(vec![1.0, 1.0, 1.0]);
        let z = [0.4, -1.0, 2.2];
        assert_eq!(geo_margin(&z, &unit), conf_margin(&z));
    }

    #[test]
    fn rl_max_and_energy_basics() {
        assert_eq!(rl_max(&[-5.0, 2.5, 1.0]), 2.5);
        assert_eq!(energy(&[1000.0, 0.0]), 1000.0);
        assert_abs_diff_eq!(energy(&[0.0, 0.0]), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    // ─── knn ───

    fn knn_fixture() -> EvalSet {
        // Rows 0..3 are the reference candidates; row 3 is a query-only row.
        EvalSet::new(
            array![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [0.5, 0.0]],
            None,
            vec![0, 0, 0, 0],
            vec![ShiftTag::InD; 4],
        )
        .unwrap()
    }

    fn subset(indices: Vec<usize>) -> CalibrationSubset {
        CalibrationSubset { indices, seed: 0 }
    }

    #[test]
    fn knn_distances_are_negated_and_sorted() {
        let set = knn_fixture();
        let reference = subset(vec![0, 1, 2]);
        // Query row 3 = (0.5, 0): distances {0.5, 0.5, 2.5}.
        for (k, want) in [(1, -0.5), (2, -0.5), (3, -2.5)] {
            let cfg = KnnConfig::new(k, reference.clone());
            assert_abs_diff_eq!(knn_score(&set, &cfg, 3).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn knn_excludes_query_by_index_not_by_value() {
        let set = knn_fixture();
        let cfg = KnnConfig::new(1, subset(vec![0, 1, 2]));
        // Row 0 is in the reference: its own zero distance must not count.
        assert_abs_diff_eq!(knn_score(&set, &cfg, 0).unwrap(), -1.0, epsilon = 1e-12);

        // A distinct row with identical coordinates does count.
        let twin = EvalSet::new(
            array![[0.0, 0.0], [0.0, 0.0], [9.0, 0.0]],
            None,
            vec![0, 0, 0],
            vec![ShiftTag::InD; 3],
        )
        .unwrap();
        let cfg = KnnConfig::new(1, subset(vec![0, 1]));
        assert_eq!(knn_score(&twin, &cfg, 0).unwrap(), 0.0);
    }

    #[test]
    fn knn_reference_errors() {
        let set = knn_fixture();
        let cfg = KnnConfig::new(1, subset(vec![]));
        assert_eq!(knn_score(&set, &cfg, 3), Err(ScoreError::EmptyReference));
        // Only the query itself in the reference: nothing usable remains.
        let cfg = KnnConfig::new(1, subset(vec![3]));
        assert_eq!(knn_score(&set, &cfg, 3), Err(ScoreError::EmptyReference));
        let cfg = KnnConfig::new(4, subset(vec![0, 1, 2]));
        assert_eq!(
            knn_score(&set, &cfg, 3),
            Err(ScoreError::InsufficientReference { available: 3, k: 4 })
        );
    }

    // ─── vim ───

    #[test]
    fn vim_fit_recovers_dominant_axis_and_scale() {
        // Calibration features: x-axis spread dominates, y offsets are the
        // residual direction. Cross-covariance is exactly zero, so the top
        // principal direction is exactly e1.
        let feats = array![
            [1.0, 0.0],
            [-1.0, 0.0],
            [2.0, 0.0],
            [-2.0, 0.0],
            [0.0, 1.0],
            [5.0, 0.0] // evaluation row, not in calibration
        ];
        // Max logit over calibration rows is 1.0 everywhere.
        let logits = array![
            [1.0, 0.0],
            [1.0, 0.5],
            [1.0, -2.0],
            [1.0, 0.0],
            [1.0, 0.3],
            [0.0, 0.0]
        ];
        let set = EvalSet::new(logits, Some(feats), vec![0; 6], vec![ShiftTag::InD; 6]).unwrap();
        let cal = subset(vec![0, 1, 2, 3, 4]);
        let cfg = fit_vim(&set, &cal, 1).unwrap();
        assert_eq!(cfg.principal_dim, 1);
        assert_abs_diff_eq!(cfg.principal_basis[[0, 0]].abs(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cfg.principal_basis[[1, 0]].abs(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cfg.mean[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.mean[1], 0.2, epsilon = 1e-12);
        // Residuals |y - 0.2| = [.2, .2, .2, .2, .8], mean 0.32; mean max
        // logit 1.0; alpha = 3.125.
        assert_abs_diff_eq!(cfg.alpha, 3.125, epsilon = 1e-9);
        // Hand case: z = [0,0] has energy ln 2; f = (3, 1.2) has residual 1.
        assert_abs_diff_eq!(
            vim_score(&[0.0, 0.0], &[3.0, 1.2], &cfg),
            -2.4318528194400546,
            epsilon = 1e-9
        );
    }

    #[test]
    fn vim_residual_vanishes_inside_the_principal_subspace() {
        // Calibration features lie exactly in the z=0 plane of a 3-D space.
        let feats = array![
            [1.0, 2.0, 0.0],
            [3.0, -1.0, 0.0],
            [-2.0, 0.5, 0.0],
            [0.0, 1.0, 0.0],
            [2.0, 2.0, 0.0]
        ];
        let logits = Array2::from_elem((5, 2), 1.0);
        let set = EvalSet::new(logits, Some(feats), vec![0; 5], vec![ShiftTag::InD; 5]).unwrap();
        let cfg = fit_vim(&set, &subset(vec![0, 1, 2, 3, 4]), 2).unwrap();
        for i in 0..5 {
            let f = set.feature_row(i).unwrap();
            assert!(residual_norm(f, &cfg) < 1e-9, "row {i} residual must vanish");
        }
        assert_eq!(cfg.alpha, 0.0, "in-subspace calibration pins alpha to zero");
    }

    #[test]
    fn vim_rejects_rank_deficient_calibration() {
        let feats = Array2::from_elem((5, 3), 2.5);
        let logits = Array2::zeros((5, 2));
        let set = EvalSet::new(logits, Some(feats), vec![0; 5], vec![ShiftTag::InD; 5]).unwrap();
        let err = fit_vim(&set, &subset(vec![0, 1, 2, 3, 4]), 1).unwrap_err();
        assert_eq!(err, ScoreError::DegenerateSpectrum { rank: 0, requested: 1 });
    }

    #[test]
    fn vim_requires_features() {
        let set = EvalSet::new(Array2::zeros((5, 2)), None, vec![0; 5], vec![ShiftTag::InD; 5])
            .unwrap();
        let err = fit_vim(&set, &subset(vec![0, 1]), 1).unwrap_err();
        assert_eq!(err, ScoreError::MissingFeatures { score: ScoreId::Vim });
    }

    // ─── sirc ───

    #[test]
    fn sirc_fit_matches_hand_computed_gate() {
        let cfg = fit_sirc_from_values(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(cfg.a, -2.2426406871192857, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.b, 0.7071067811865475, epsilon = 1e-12);
        assert_eq!(
            fit_sirc_from_values(&[1.5; 8]),
            Err(ScoreError::ZeroVariance)
        );
    }

    #[test]
    fn sirc_fit_on_standard_normal_sample_lands_near_minus_three_and_one() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sample: Vec<f64> = (0..2000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let cfg = fit_sirc_from_values(&sample).unwrap();
        assert!((cfg.a + 3.0).abs() < 0.15, "a = {} should be near -3", cfg.a);
        assert!((cfg.b - 1.0).abs() < 0.08, "b = {} should be near 1", cfg.b);
    }

    #[test]
    fn sirc_score_matches_hand_value_and_degrades_with_low_secondary() {
        let cfg = SircConfig { a: 0.0, b: 1.0 };
        assert_abs_diff_eq!(
            sirc_score(&[10.0, 0.0], 0.0, &cfg),
            -9.079573740478075e-5,
            epsilon = 1e-16
        );
        // Lower secondary -> more negative score at equal logits.
        let hi = sirc_score(&[2.0, 0.0], 5.0, &cfg);
        let lo = sirc_score(&[2.0, 0.0], -5.0, &cfg);
        assert!(lo < hi);
        assert!(hi < 0.0);
    }

    // ─── driver ───

    fn driver_set() -> EvalSet {
        EvalSet::new(
            array![[2.0, 0.0], [0.0, 1.0], [3.0, 2.5], [1.0, 1.0]],
            Some(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]]),
            vec![0, 1, 0, 1],
            vec![ShiftTag::InD; 4],
        )
        .unwrap()
    }

    #[test]
    fn score_set_applies_row_scores_in_order() {
        let set = driver_set();
        let sv = score_set(&set, ScoreId::ConfMargin, &ScoreInputs::default()).unwrap();
        assert_eq!(sv.score_id, ScoreId::ConfMargin);
        assert_eq!(sv.values, vec![2.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn score_set_reports_missing_prerequisites() {
        let set = driver_set();
        let inputs = ScoreInputs::default();
        assert_eq!(
            score_set(&set, ScoreId::GeoMargin, &inputs).unwrap_err(),
            ScoreError::MissingHead { score: ScoreId::GeoMargin }
        );
        assert_eq!(
            score_set(&set, ScoreId::Knn, &inputs).unwrap_err(),
            ScoreError::MissingConfig { score: ScoreId::Knn }
        );
        assert_eq!(
            score_set(&set, ScoreId::Vim, &inputs).unwrap_err(),
            ScoreError::MissingConfig { score: ScoreId::Vim }
        );
        assert_eq!(
            score_set(&set, ScoreId::Sirc, &inputs).unwrap_err(),
            ScoreError::MissingConfig { score: ScoreId::Sirc }
        );
    }

    #[test]
    fn score_set_sirc_uses_energy_secondary_by_default() {
        let set = driver_set();
        let cfg = SircConfig { a: 0.0, b: 1.0 };
        let inputs = ScoreInputs {
            sirc: Some(&cfg),
            ..Default::default()
        };
        let got = score_set(&set, ScoreId::Sirc, &inputs).unwrap();
        for i in 0..set.num_samples() {
            let want = sirc_score(set.logit_row(i), energy(set.logit_row(i)), &cfg);
            assert_eq!(got.values[i], want);
        }
        let inputs = ScoreInputs {
            sirc: Some(&cfg),
            sirc_secondary: Some(ScoreId::Sirc),
            ..Default::default()
        };
        assert_eq!(
            score_set(&set, ScoreId::Sirc, &inputs).unwrap_err(),
            ScoreError::InvalidSecondary
        );
    }

    // ─── invariance properties ───

    /// Logits on a coarse grid: well-separated values keep float order
    /// reasoning exact.
    fn grid_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-12800..12800i32).prop_map(|v| v as f64 / 256.0), k)
    }

    proptest! {
        #[test]
        fn margins_are_shift_invariant(z in grid_row(5), c in -100.0..100.0f64) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            prop_assert!((conf_margin(&z) - conf_margin(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn energy_shifts_additively(z in grid_row(4), c in -100.0..100.0f64) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            prop_assert!((energy(&z) + c - energy(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn margin_order_is_exactly_scale_invariant(
            rows in prop::collection::vec(grid_row(4), 2..30),
            pow in -10..10i32,
        ) {
            // Power-of-two scales multiply exactly, so even ties survive.
            let lambda = (2.0_f64).powi(pow);
            let margins: Vec<f64> = rows.iter().map(|r| conf_margin(r)).collect();
            let scaled: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let rs: Vec<f64> = r.iter().map(|v| v * lambda).collect();
                    conf_margin(&rs)
                })
                .collect();
            let order = |v: &[f64]| {
                let mut idx: Vec<usize> = (0..v.len()).collect();
                idx.sort_by(|&a, &b| {
                    v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b))
                });
                idx
            };
            prop_assert_eq!(order(&margins), order(&scaled));
        }

        #[test]
        fn sr_scores_respect_their_ranges(z in grid_row(6)) {
            let k = z.len() as f64;
            let m = sr_max(&z);
            prop_assert!((1.0 / k - 1e-12..=1.0 + 1e-12).contains(&m));
            let d = sr_doctor(&z);
            prop_assert!(d <= 1e-12 && d >= 1.0 - k - 1e-9);
            let e = sr_ent(&z);
            prop_assert!(e <= 1e-12 && e >= -(k.ln()) - 1e-9);
        }

        #[test]
        fn two_class_sr_orderings_follow_the_margin(
            gaps in prop::collection::vec((0..20000i32).prop_map(|v| v as f64 / 1000.0), 2)
        ) {
            // For K = 2 every softmax-family score is a monotone function of
            // the top-two gap.
            let (a, b) = (gaps[0], gaps[1]);
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(sr_max(&[lo, 0.0]) <= sr_max(&[hi, 0.0]));
                prop_assert!(sr_doctor(&[lo, 0.0]) <= sr_doctor(&[hi, 0.0]));
                prop_assert!(sr_ent(&[lo, 0.0]) <= sr_ent(&[hi, 0.0]));
            }
        }
    }

    #[test]
    fn scale_changes_sr_ordering_but_not_margin_ordering() {
        // Witness pair: a narrow top-two gap with far-away tail logits vs a
        // moderate gap with a crowded tail. Searched over the scale grid:
        // some scale must flip the sr_max order while conf_margin never
        // flips.
        let a = [1.0, 0.9, -10.0, -10.0];
        let b = [1.05, 0.0, 0.0, 0.0];
        let lambdas = [0.1, 1.0, 2.0, 4.0];
        let mut orders = Vec::new();
        for &l in &lambdas {
            let sa = sr_max(&a.map(|v| v * l));
            let sb = sr_max(&b.map(|v| v * l));
            assert_ne!(sa, sb);
            orders.push(sa > sb);
            let scaled_margin_order =
                conf_margin(&a.map(|v| v * l)) > conf_margin(&b.map(|v| v * l));
            assert_eq!(scaled_margin_order, conf_margin(&a) > conf_margin(&b));
        }
        assert!(
            orders.iter().any(|&o| o) && orders.iter().any(|&o| !o),
            "sr_max order must flip somewhere across the scale grid: {orders:?}"
        );
    }
}
