//! Selection: thresholds, risk-coverage curves, AURC, and calibration.
//!
//! A selector accepts a sample iff its confidence score strictly exceeds a
//! threshold `gamma`. Sweeping `gamma` traces the risk-coverage (RC) curve:
//! at coverage k/N the risk is the mean 0/1 loss of the k highest-scoring
//! samples. Ties between equal scores are broken by ascending original
//! index, everywhere, so every curve and every ordering in this crate is
//! deterministic.
//!
//! Conventions fixed here and relied on by the rest of the crate:
//! - risk at coverage 0 is 0 (nothing accepted, nothing risked);
//! - the RC curve is the sequence of prefix means, one point per sample,
//!   not a trapezoid interpolation;
//! - AURC is the mean of the prefix risks, and AURC-alpha the mean of the
//!   first floor(alpha*N) of them (so AURC = AURC-1 bit for bit);
//! - fractions like alpha*N or omega*N are rounded to the nearest integer
//!   when within 1e-9 before flooring/ceiling, so exact thirds and the
//!   like do not fall victim to binary representation.

use crate::data::{EvalSet, OOD_LABEL};
use std::fmt;

/// Per-sample 0/1 losses: 0 iff the argmax class (ties to the lowest index)
/// equals the label. Label -1 rows always lose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossVector {
    pub values: Vec<u8>,
}

impl LossVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Overall empirical error rate.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|&l| l as u64).sum::<u64>() as f64 / self.values.len() as f64
    }
}

/// Computes 0/1 losses for every row of the set.
pub fn zero_one_losses(set: &EvalSet) -> LossVector {
    let values = (0..set.num_samples())
        .map(|i| {
            let label = set.labels()[i];
            if label == OOD_LABEL {
                return 1;
            }
            let z = set.logit_row(i);
            let mut argmax = 0;
            for j in 1..z.len() {
                if z[j] > z[argmax] {
                    argmax = j;
                }
            }
            u8::from(argmax as i64 != label)
        })
        .collect();
    LossVector { values }
}

/// Risk-coverage curve: point k (0-based) covers the k+1 highest-scoring
/// samples. `order` is the acceptance order (score descending, ties by
/// ascending index).
#[derive(Debug, Clone, PartialEq)]
pub struct RCCurve {
    pub coverages: Vec<f64>,
    pub risks: Vec<f64>,
    pub order: Vec<usize>,
}

/// Threshold calibration target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationTarget {
    /// Largest threshold whose coverage is at least this value (in (0, 1]).
    CoverageAtLeast(f64),
    /// Among thresholds whose selection risk is at most this value, the one
    /// with the largest coverage.
    RiskAtMost(f64),
}

impl fmt::Display for CalibrationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationTarget::CoverageAtLeast(w) => write!(f, "coverage:{w}"),
            CalibrationTarget::RiskAtMost(l) => write!(f, "risk:{l}"),
        }
    }
}

/// A calibrated threshold plus what it actually achieves on the inputs it
/// was calibrated on. Recomputing coverage and risk at `gamma` reproduces
/// the stored values exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub gamma: f64,
    pub achieved_coverage: f64,
    pub achieved_risk: f64,
    pub target: CalibrationTarget,
}

/// Errors from curve construction and calibration.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionError {
    Empty,
    LengthMismatch { scores: usize, losses: usize },
    /// floor(alpha*N) selects no samples.
    EmptyPrefix { alpha: f64 },
    /// alpha outside (0, 1].
    AlphaOutOfRange { alpha: f64 },
    /// No achievable threshold satisfies the target.
    InfeasibleTarget { target: String },
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionError::Empty => write!(f, "no samples"),
            SelectionError::LengthMismatch { scores, losses } => {
                write!(f, "{scores} scores vs {losses} losses")
            }
            SelectionError::EmptyPrefix { alpha } => {
                write!(f, "alpha = {alpha} selects no samples")
            }
            SelectionError::AlphaOutOfRange { alpha } => {
                write!(f, "alpha = {alpha} outside (0, 1]")
            }
            SelectionError::InfeasibleTarget { target } => {
                write!(f, "no threshold satisfies {target}")
            }
        }
    }
}

impl std::error::Error for SelectionError {}

/// Acceptance mask at threshold `gamma`: strictly greater scores pass.
pub fn select(scores: &[f64], gamma: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > gamma).collect()
}

/// Coverage and selection risk at threshold `gamma`. An empty acceptance
/// set has risk 0 by convention.
pub fn coverage_risk(scores: &[f64], losses: &LossVector, gamma: f64) -> (f64, f64) {
    assert_eq!(scores.len(), losses.len(), "scores and losses must align");
    let mut accepted = 0_u64;
    let mut lost = 0_u64;
    for (&s, &l) in scores.iter().zip(&losses.values) {
        if s > gamma {
            accepted += 1;
            lost += l as u64;
        }
    }
    let coverage = accepted as f64 / scores.len() as f64;
    let risk = if accepted == 0 {
        0.0
    } else {
        lost as f64 / accepted as f64
    };
    (coverage, risk)
}

/// Indices sorted by score descending, equal scores by ascending index.
/// This is the canonical acceptance order used throughout the crate.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must not be NaN")
            .then(a.cmp(&b))
    });
    idx
}

/// Number of samples a fraction `alpha` of `n` covers: floor(alpha*n), with
/// products within 1e-9 of an integer snapped to it first (so alpha = 1/3
/// of 3 samples is 1, not 0).
pub fn prefix_len(n: usize, alpha: f64) -> usize {
    rounded_fraction(n, alpha, false)
}

fn rounded_fraction(n: usize, fraction: f64, ceil: bool) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let snapped = if (x - nearest).abs() < 1e-9 {
        nearest
    } else if ceil {
        x.ceil()
    } else {
        x.floor()
    };
    snapped.max(0.0) as usize
}

/// Risk-coverage curve via prefix means over the canonical order.
pub fn rc_curve(scores: &[f64], losses: &LossVector) -> Result<RCCurve, SelectionError> {
    if scores.len() != losses.len() {
        return Err(SelectionError::LengthMismatch {
            scores: scores.len(),
            losses: losses.len(),
        });
    }
    if scores.is_empty() {
        return Err(SelectionError::Empty);
    }
    let n = scores.len();
    let order = descending_order(scores);
    let mut coverages = Vec::with_capacity(n);
    let mut risks = Vec::with_capacity(n);
    let mut lost = 0_u64;
    for (k, &i) in order.iter().enumerate() {
        lost += losses.values[i] as u64;
        coverages.push((k + 1) as f64 / n as f64);
        risks.push(lost as f64 / (k + 1) as f64);
    }
    Ok(RCCurve {
        coverages,
        risks,
        order,
    })
}

/// Area under the RC curve: the mean of the prefix risks.
pub fn aurc(curve: &RCCurve) -> f64 {
    prefix_mean(&curve.risks, curve.risks.len())
}

/// Normalized partial AURC: the mean prefix risk over coverages up to
/// `alpha`, i.e. over the first floor(alpha*N) points. Equals the partial
/// area divided by the coverage actually spanned. `aurc_alpha(c, 1.0)`
/// reproduces [`aurc`] bit for bit.
pub fn aurc_alpha(curve: &RCCurve, alpha: f64) -> Result<f64, SelectionError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SelectionError::AlphaOutOfRange { alpha });
    }
    let m = prefix_len(curve.risks.len(), alpha);
    if m == 0 {
        return Err(SelectionError::EmptyPrefix { alpha });
    }
    Ok(prefix_mean(&curve.risks, m))
}

fn prefix_mean(risks: &[f64], m: usize) -> f64 {
    risks[..m].iter().sum::<f64>() / m as f64
}

/// Distinct descending score values with their cumulative acceptance
/// counts: thresholds can only realize these prefixes.
fn group_boundaries(scores: &[f64], order: &[usize]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let v = scores[i];
        match out.last_mut() {
            Some((count, last)) if *last == v => *count = k + 1,
            _ => out.push((k + 1, v)),
        }
    }
    out
}

/// Threshold realizing exactly the first `j+1` groups: the midpoint toward
/// the next distinct value, or one below the minimum when everything is
/// accepted.
fn gamma_below(boundaries: &[(usize, f64)], j: usize) -> f64 {
    let v = boundaries[j].1;
    match boundaries.get(j + 1) {
        Some(&(_, next)) => 0.5 * (v + next),
        None => v - 1.0,
    }
}

/// Calibrates a threshold against a coverage or risk target, considering
/// every coverage a strict threshold can actually realize (whole groups of
/// tied scores enter together).
///
/// For `CoverageAtLeast(w)` the smallest qualifying prefix is chosen, which
/// maximizes the threshold. For `RiskAtMost(l)` the largest-coverage
/// qualifying prefix is chosen. The returned report restates the target and
/// what the threshold achieves on these inputs.
pub fn calibrate_threshold(
    scores: &[f64],
    losses: &LossVector,
    target: CalibrationTarget,
) -> Result<ThresholdReport, SelectionError> {
    if scores.len() != losses.len() {
        return Err(SelectionError::LengthMismatch {
            scores: scores.len(),
            losses: losses.len(),
        });
    }
    if scores.is_empty() {
        return Err(SelectionError::Empty);
    }
    let infeasible = || SelectionError::InfeasibleTarget {
        target: target.to_string(),
    };
    let n = scores.len();
    let order = descending_order(scores);
    let boundaries = group_boundaries(scores, &order);

    let chosen = match target {
        CalibrationTarget::CoverageAtLeast(omega) => {
            if !(omega > 0.0 && omega <= 1.0) {
                return Err(infeasible());
            }
            let needed = rounded_fraction(n, omega, true).max(1);
            boundaries.iter().position(|&(count, _)| count >= needed)
        }
        CalibrationTarget::RiskAtMost(lambda) => {
            let mut best = None;
            let mut lost = 0_u64;
            let mut at = 0;
            for (j, &(count, _)) in boundaries.iter().enumerate() {
                while at < count {
                    lost += losses.values[order[at]] as u64;
                    at += 1;
                }
                if lost as f64 / count as f64 <= lambda {
                    best = Some(j);
                }
            }
            best
        }
    };
    let j = chosen.ok_or_else(infeasible)?;
    let gamma = gamma_below(&boundaries, j);
    let (achieved_coverage, achieved_risk) = coverage_risk(scores, losses, gamma);
    Ok(ThresholdReport {
        gamma,
        achieved_coverage,
        achieved_risk,
        target,
    })
}

/// Oracle construction of the RC curve by sweeping concrete thresholds.
///
/// For every distinct score value a realizing threshold is swept and the
/// acceptance set recomputed from scratch through [`select`]; tied groups
/// are then refined one sample at a time in ascending index order, with the
/// risk recomputed by explicit summation over the accepted set. Slower than
/// [`rc_curve`] by design; exists so the fast path has something honest to
/// be compared against.
pub fn rc_curve_bruteforce(scores: &[f64], losses: &LossVector) -> Result<RCCurve, SelectionError> {
    if scores.len() != losses.len() {
        return Err(SelectionError::LengthMismatch {
            scores: scores.len(),
            losses: losses.len(),
        });
    }
    if scores.is_empty() {
        return Err(SelectionError::Empty);
    }
    let n = scores.len();
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| b.partial_cmp(a).expect("scores must not be NaN"));
    distinct.dedup();

    let mut coverages = Vec::with_capacity(n);
    let mut risks = Vec::with_capacity(n);
    let mut accepted: Vec<usize> = Vec::with_capacity(n);
    for (j, &v) in distinct.iter().enumerate() {
        // Members of this tie group, ascending index.
        let group: Vec<usize> = (0..n).filter(|&i| scores[i] == v).collect();
        for &i in &group {
            accepted.push(i);
            let lost: u64 = accepted.iter().map(|&a| losses.values[a] as u64).sum();
            coverages.push(accepted.len() as f64 / n as f64);
            risks.push(lost as f64 / accepted.len() as f64);
        }
        // The group boundary must be realizable by an actual threshold.
        let gamma = match distinct.get(j + 1) {
            Some(&next) => 0.5 * (v + next),
            None => v - 1.0,
        };
        let mask = select(scores, gamma);
        let swept: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let mut sorted_accepted = accepted.clone();
        sorted_accepted.sort_unstable();
        debug_assert_eq!(
            swept, sorted_accepted,
            "threshold sweep disagrees with tie-refined prefix"
        );
    }
    Ok(RCCurve {
        coverages,
        risks,
        order: accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EvalSet, ShiftTag};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn losses(v: &[u8]) -> LossVector {
        LossVector { values: v.to_vec() }
    }

    // ─── losses ───

    #[test]
    fn zero_one_losses_follow_argmax_with_low_index_ties() {
        let set = EvalSet::new(
            array![[2.0, 2.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 5.0], [1.0, 0.0, 0.0]],
            None,
            vec![0, 1, 2, -1],
            vec![
                ShiftTag::InD,
                ShiftTag::InD,
                ShiftTag::InD,
                ShiftTag::ShiftLabel,
            ],
        )
        .unwrap();
        // Row 0: tie resolves to class 0, matching the label.
        // Row 1: same tie, label 1, so it loses.
        // Row 3: label -1 always loses even though argmax is well-defined.
        assert_eq!(zero_one_losses(&set).values, vec![0, 1, 0, 1]);
    }

    // ─── selection and coverage/risk ───

    #[test]
    fn select_is_strict() {
        assert_eq!(select(&[0.5, 0.7, 0.5], 0.5), vec![false, true, false]);
    }

    #[test]
    fn coverage_risk_handles_the_empty_acceptance_set() {
        let (cov, risk) = coverage_risk(&[0.1, 0.2], &losses(&[1, 1]), 5.0);
        assert_eq!((cov, risk), (0.0, 0.0));
    }

    #[test]
    fn coverage_risk_matches_hand_counts() {
        let s = [0.9, 0.8, 0.1];
        let l = losses(&[0, 1, 0]);
        assert_eq!(coverage_risk(&s, &l, 0.85), (1.0 / 3.0, 0.0));
        assert_eq!(coverage_risk(&s, &l, 0.5), (2.0 / 3.0, 0.5));
        assert_eq!(coverage_risk(&s, &l, 0.0), (1.0, 1.0 / 3.0));
    }

    // ─── rc curve ───

    #[test]
    fn rc_curve_is_the_prefix_mean_sequence() {
        let curve = rc_curve(&[0.9, 0.8, 0.1], &losses(&[0, 1, 0])).unwrap();
        assert_eq!(curve.order, vec![0, 1, 2]);
        assert_eq!(curve.coverages, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(curve.risks, vec![0.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn rc_curve_breaks_ties_by_ascending_index() {
        let curve = rc_curve(&[0.5, 0.5, 0.9], &losses(&[1, 0, 0])).unwrap();
        assert_eq!(curve.order, vec![2, 0, 1]);
        assert_eq!(curve.risks, vec![0.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn rc_curve_ends_at_the_overall_error_rate_exactly() {
        let l = losses(&[1, 0, 1, 1, 0, 1, 0]);
        let s = [0.3, 0.9, 0.2, 0.8, 0.1, 0.5, 0.4];
        let curve = rc_curve(&s, &l).unwrap();
        assert_eq!(*curve.coverages.last().unwrap(), 1.0);
        assert_eq!(*curve.risks.last().unwrap(), l.mean());
    }

    #[test]
    fn rc_curve_rejects_degenerate_input() {
        assert_eq!(
            rc_curve(&[], &losses(&[])).unwrap_err(),
            SelectionError::Empty
        );
        assert_eq!(
            rc_curve(&[0.1], &losses(&[0, 1])).unwrap_err(),
            SelectionError::LengthMismatch { scores: 1, losses: 2 }
        );
    }

    // ─── aurc ───

    #[test]
    fn aurc_and_partial_means_match_hand_values() {
        let curve = rc_curve(&[0.9, 0.8, 0.1], &losses(&[0, 1, 0])).unwrap();
        assert_abs_diff_eq!(aurc(&curve), (0.0 + 0.5 + 1.0 / 3.0) / 3.0, epsilon = 1e-15);
        // alpha = 1/3 must reach the first point despite 1/3 * 3 != 1.0 in
        // binary floating point.
        assert_eq!(aurc_alpha(&curve, 1.0 / 3.0).unwrap(), 0.0);
        assert_eq!(aurc_alpha(&curve, 2.0 / 3.0).unwrap(), 0.25);
        assert_eq!(aurc_alpha(&curve, 1.0).unwrap(), aurc(&curve));
    }

    #[test]
    fn aurc_alpha_rejects_empty_and_out_of_range_prefixes() {
        let curve = rc_curve(&[0.9, 0.8, 0.1], &losses(&[0, 1, 0])).unwrap();
        assert_eq!(
            aurc_alpha(&curve, 0.1).unwrap_err(),
            SelectionError::EmptyPrefix { alpha: 0.1 }
        );
        assert!(matches!(
            aurc_alpha(&curve, 0.0),
            Err(SelectionError::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            aurc_alpha(&curve, 1.2),
            Err(SelectionError::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn prefix_len_snaps_near_integer_products() {
        assert_eq!(prefix_len(3, 1.0 / 3.0), 1);
        assert_eq!(prefix_len(3, 0.5), 1);
        assert_eq!(prefix_len(10, 0.5), 5);
        assert_eq!(prefix_len(2000, 0.8), 1600);
        assert_eq!(prefix_len(5, 1.0), 5);
    }

    // ─── calibration ───

    #[test]
    fn risk_target_picks_the_widest_qualifying_prefix() {
        let s = [0.9, 0.8, 0.1];
        let l = losses(&[0, 1, 0]);
        let report = calibrate_threshold(&s, &l, CalibrationTarget::RiskAtMost(0.0)).unwrap();
        assert!(report.gamma >= 0.8 && report.gamma < 0.9);
        assert_eq!(report.achieved_coverage, 1.0 / 3.0);
        assert_eq!(report.achieved_risk, 0.0);

        // Risk dips back under the target at full coverage.
        let report = calibrate_threshold(&s, &l, CalibrationTarget::RiskAtMost(0.4)).unwrap();
        assert_eq!(report.achieved_coverage, 1.0);
        assert_abs_diff_eq!(report.achieved_risk, 1.0 / 3.0, epsilon = 1e-15);

        assert!(matches!(
            calibrate_threshold(&s, &l, CalibrationTarget::RiskAtMost(-0.1)),
            Err(SelectionError::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn coverage_target_takes_the_largest_threshold() {
        let s = [0.9, 0.8, 0.1];
        let l = losses(&[0, 1, 0]);
        let report =
            calibrate_threshold(&s, &l, CalibrationTarget::CoverageAtLeast(1.0)).unwrap();
        assert!(report.gamma < 0.1);
        assert_eq!(report.achieved_coverage, 1.0);

        let report =
            calibrate_threshold(&s, &l, CalibrationTarget::CoverageAtLeast(0.5)).unwrap();
        assert!(report.gamma >= 0.1 && report.gamma < 0.8);
        assert_eq!(report.achieved_coverage, 2.0 / 3.0);

        assert!(matches!(
            calibrate_threshold(&s, &l, CalibrationTarget::CoverageAtLeast(1.5)),
            Err(SelectionError::InfeasibleTarget { .. })
        ));
        assert!(matches!(
            calibrate_threshold(&s, &l, CalibrationTarget::CoverageAtLeast(0.0)),
            Err(SelectionError::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn tied_scores_only_realize_whole_groups() {
        let s = [0.5, 0.5, 0.5];
        let l = losses(&[1, 0, 0]);
        // The only achievable coverages are 0 and 1.
        let report =
            calibrate_threshold(&s, &l, CalibrationTarget::CoverageAtLeast(0.4)).unwrap();
        assert_eq!(report.achieved_coverage, 1.0);
        assert_abs_diff_eq!(report.achieved_risk, 1.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(
            calibrate_threshold(&s, &l, CalibrationTarget::RiskAtMost(0.1)),
            Err(SelectionError::InfeasibleTarget { .. })
        ));
    }

    // ─── oracle agreement and properties ───

    /// Scores from a tiny grid so ties actually happen, f64-exact values.
    fn tied_scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0..12i32).prop_map(|v| v as f64 / 4.0), n..n + 30)
    }

    proptest! {
        #[test]
        fn fast_curve_equals_bruteforce_everywhere(
            scores in tied_scores(1),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = LossVector {
                values: (0..scores.len()).map(|_| rng.gen_range(0..=1u8)).collect(),
            };
            let fast = rc_curve(&scores, &l).unwrap();
            let slow = rc_curve_bruteforce(&scores, &l).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn threshold_report_is_self_consistent(
            scores in tied_scores(1),
            seed in any::<u64>(),
            omega in 0.05..1.0f64,
            lambda in 0.0..1.0f64,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = LossVector {
                values: (0..scores.len()).map(|_| rng.gen_range(0..=1u8)).collect(),
            };
            let cov = calibrate_threshold(&scores, &l, CalibrationTarget::CoverageAtLeast(omega))
                .unwrap();
            prop_assert_eq!(
                coverage_risk(&scores, &l, cov.gamma),
                (cov.achieved_coverage, cov.achieved_risk)
            );
            prop_assert!(cov.achieved_coverage >= omega - 1e-9);

            if let Ok(risk) = calibrate_threshold(&scores, &l, CalibrationTarget::RiskAtMost(lambda)) {
                prop_assert_eq!(
                    coverage_risk(&scores, &l, risk.gamma),
                    (risk.achieved_coverage, risk.achieved_risk)
                );
                prop_assert!(risk.achieved_risk <= lambda + 1e-12);
                // Maximality: no realizable threshold beats it.
                let curve = rc_curve(&scores, &l).unwrap();
                let boundaries = group_boundaries(&scores, &curve.order);
                for (j, &(count, _)) in boundaries.iter().enumerate() {
                    let (c, r) = coverage_risk(&scores, &l, gamma_below(&boundaries, j));
                    prop_assert_eq!(c, count as f64 / scores.len() as f64);
                    if r <= lambda {
                        prop_assert!(c <= risk.achieved_coverage + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn coverage_is_monotone_in_the_threshold(
            scores in tied_scores(1),
            g1 in -1.0..4.0f64,
            g2 in -1.0..4.0f64,
        ) {
            let l = LossVector { values: vec![0; scores.len()] };
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            let (cov_lo, _) = coverage_risk(&scores, &l, lo);
            let (cov_hi, _) = coverage_risk(&scores, &l, hi);
            prop_assert!(cov_lo >= cov_hi);
        }

        #[test]
        fn oracle_score_minimizes_every_prefix_risk(
            seed in any::<u64>(),
            n in 2..60usize,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = LossVector {
                values: (0..n).map(|_| rng.gen_range(0..=1u8)).collect(),
            };
            let oracle: Vec<f64> = l.values.iter().map(|&v| 1.0 - v as f64).collect();
            let other: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let best = rc_curve(&oracle, &l).unwrap();
            let any = rc_curve(&other, &l).unwrap();
            for k in 0..n {
                prop_assert!(best.risks[k] <= any.risks[k] + 1e-15);
            }
        }
    }
}
