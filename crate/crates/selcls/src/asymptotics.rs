//! Large-scale behavior of the softmax-response scores.
//!
//! When the logits are scaled by a growing factor λ, each softmax-response
//! score collapses onto a closed form driven solely by the top-two gap
//! g = z⁽¹⁾ − z⁽²⁾. With t = e^{−λg}:
//!
//! - `sr_max(λz)`    approaches `exp(−t)`,
//! - `sr_doctor(λz)` approaches `1 − exp(2t)`,
//! - `sr_ent(λz)`    approaches `−t` up to a slowly varying factor.
//!
//! All three forms are strictly increasing in g, so at large λ every one of
//! them orders samples exactly like the confidence margin. This module
//! evaluates the forms ([`asymptote`]), measures how fast actual scores
//! approach them ([`convergence_sweep`]), and checks the gap monotonicity
//! ([`monotonicity_check`]).
//!
//! # Convergence metrics and thresholds
//!
//! Write a_i = λ(z_i − z⁽¹⁾) for the descending-sorted logits (a_2 = −λg)
//! and S = 1 + Σ_{i≥2} e^{a_i}, so sr_max(λz) = 1/S. Ratios against the
//! closed forms are computed in factored log-domain arithmetic, never by
//! dividing two underflowing doubles:
//!
//! - sr_max: ratio = exp(e^{a_2} − log1p(Σ_{i≥2} e^{a_i})). The remainder
//!   is Σ_{i≥3} e^{a_i} + O(e^{2a_2}), so the ratio sits within 1e−6 of 1
//!   once λ·g ≥ [`SR_MAX_CONVERGENCE_PRODUCT`].
//! - sr_doctor: with V = Σ_{i≥2} e^{a_i−a_2} and V₂ = Σ_{i≥2} e^{2(a_i−a_2)},
//!   ratio = expm1(2·log1p(e^{a_2}V) − log1p(e^{2a_2}V₂)) / expm1(2e^{a_2}),
//!   which tends to V. The remainder is dominated by e^{λ(z⁽³⁾−z⁽²⁾)} plus
//!   O(e^{a_2}), so convergence needs BOTH the top gap and the second gap
//!   scaled up: λ·min(z⁽¹⁾−z⁽²⁾, z⁽²⁾−z⁽³⁾) ≥
//!   [`SR_DOCTOR_CONVERGENCE_PRODUCT`]. When e^{a_2} underflows the ratio
//!   is evaluated as its analytic limit V.
//! - sr_ent: the plain ratio DIVERGES: sr_ent(λz) = e^{a_2}·W with
//!   W = (1/S)Σ_{i≥2} e^{a_i−a_2}·a_i − log1p(e^{a_2}V)/e^{a_2}, so
//!   score/asymptote → −W ≈ λg. Equivalence holds only up to that slowly
//!   varying factor, which vanishes in the log domain:
//!   ln(−score) = a_2 + ln(−W) and ln(−asymptote) = a_2. The reported
//!   metric is |ln(−score)/ln(−asymptote) − 1| = |ln(−W)/a_2|, of order
//!   ln(λg)/(λg), which drops below 1e−6 once λ·g ≥
//!   [`SR_ENT_CONVERGENCE_PRODUCT`].
//!
//! Orderings for the Kendall-τ comparison are taken from exact monotone
//! transforms of the scores (−log1p(Σe^{a_i}), −ln(S²/T), −ln(−score))
//! evaluated in the log domain, so the ordering stays resolved long after
//! the raw scores saturate at 1 or 0 in double precision.

use crate::data::ScoreId;
use crate::scores;
use ndarray::Array2;
use std::cmp::Ordering;

/// λ·(top-two gap) beyond which the sr_max ratio error is below 1e-6
/// (remainder terms at most e^{-40} ≈ 4e-18 plus double rounding).
pub const SR_MAX_CONVERGENCE_PRODUCT: f64 = 40.0;

/// λ·(smaller of the first two consecutive sorted-logit gaps) beyond which
/// the sr_doctor ratio error is below 1e-6.
pub const SR_DOCTOR_CONVERGENCE_PRODUCT: f64 = 40.0;

/// λ·(top-two gap) beyond which the sr_ent log-domain ratio error is below
/// 1e-6; the metric decays like ln(λg)/(λg), so it needs a far larger
/// product than the other two.
pub const SR_ENT_CONVERGENCE_PRODUCT: f64 = 5e7;

/// Rows whose top-two gap is below this are treated as tied and skipped by
/// sweeps; the closed forms assume a strictly positive gap.
pub const GAP_TOL: f64 = 1e-9;

/// The three scores the closed forms cover.
pub const SR_SCORES: [ScoreId; 3] = [ScoreId::SrMax, ScoreId::SrDoctor, ScoreId::SrEnt];

#[derive(Debug, Clone, PartialEq)]
pub enum AsymptoticsError {
    /// The top two logits coincide, so the gap-driven forms are undefined.
    TiedTopLogits,
    /// Only the softmax-response scores have closed large-scale forms.
    UnsupportedScore { score: ScoreId },
    /// Gap grids must be strictly positive.
    NonPositiveGap { value: f64 },
    /// Every row of the sweep input was tied (or the input was empty).
    NoUsableRows,
}

impl std::fmt::Display for AsymptoticsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AsymptoticsError::TiedTopLogits => {
                write!(f, "top two logits are tied; the closed form needs a positive gap")
            }
            AsymptoticsError::UnsupportedScore { score } => {
                write!(f, "no closed large-scale form for score '{score}'")
            }
            AsymptoticsError::NonPositiveGap { value } => {
                write!(f, "gap grid entries must be > 0, got {value}")
            }
            AsymptoticsError::NoUsableRows => {
                write!(f, "no rows with a resolvable top-two gap")
            }
        }
    }
}

impl std::error::Error for AsymptoticsError {}

/// Closed large-scale form of a softmax-response score on the row `z`
/// scaled by `lambda`, evaluated through the log-domain gap so extreme
/// scales stay finite.
pub fn asymptote(score: ScoreId, z: &[f64], lambda: f64) -> Result<f64, AsymptoticsError> {
    let (top, second) = scores::top_two(z);
    if z[top] == z[second] {
        return Err(AsymptoticsError::TiedTopLogits);
    }
    let t = (lambda * (z[second] - z[top])).exp();
    match score {
        ScoreId::SrMax => Ok((-t).exp()),
        ScoreId::SrDoctor => Ok(-(2.0 * t).exp_m1()),
        ScoreId::SrEnt => Ok(-t),
        other => Err(AsymptoticsError::UnsupportedScore { score: other }),
    }
}

/// Log-domain quantities of one scaled row, shared by the ratio metrics
/// and the ordering keys. `a2 = lambda * (z2 - z1) < 0` for usable rows.
struct ScaledRow {
    a2: f64,
    /// log(1 + sum of e^{a_i}) = -ln sr_max(lambda z).
    log1p_sum: f64,
    /// ln(S^2 / T) >= 0; sr_doctor(lambda z) = 1 - e^q.
    q_doctor: f64,
    /// ln(-sr_ent(lambda z)) = a2 + ln(-W).
    log_neg_ent: f64,
    /// V = sum of e^{a_i - a2} (>= 1): the analytic limit of the
    /// sr_doctor ratio, used directly once e^{a2} underflows.
    v: f64,
}

impl ScaledRow {
    /// `sorted` must be in descending order with sorted[0] > sorted[1].
    fn new(sorted: &[f64], lambda: f64) -> ScaledRow {
        let z1 = sorted[0];
        let a2 = lambda * (sorted[1] - z1);
        let mut sum = 0.0;
        let mut v = 0.0;
        let mut v2 = 0.0;
        let mut weighted = 0.0;
        for &zi in &sorted[1..] {
            let ai = lambda * (zi - z1);
            let bi = ai - a2;
            sum += ai.exp();
            v += bi.exp();
            v2 += (2.0 * bi).exp();
            weighted += bi.exp() * ai;
        }
        let ea = a2.exp();
        let log1p_sum = sum.ln_1p();
        let q_doctor = 2.0 * (ea * v).ln_1p() - (ea * ea * v2).ln_1p();
        // termV = log1p(e^{a2} V)/e^{a2}, with its analytic limit V once
        // e^{a2} underflows.
        let term_v = if ea == 0.0 { v } else { (ea * v).ln_1p() / ea };
        let s = 1.0 + ea * v;
        let w = weighted / s - term_v;
        debug_assert!(w < 0.0, "entropy factor must be negative, got {w}");
        ScaledRow {
            a2,
            log1p_sum,
            q_doctor,
            log_neg_ent: a2 + (-w).ln(),
            v,
        }
    }

    fn ratio_error(&self, score: ScoreId) -> f64 {
        match score {
            // ratio = score / asymptote = exp(e^{a2} - log1p(sum)), exact
            // at any scale, no underflow branch needed.
            ScoreId::SrMax => ((self.a2.exp() - self.log1p_sum).exp() - 1.0).abs(),
            ScoreId::SrDoctor => {
                let ea = self.a2.exp();
                let ratio = if ea == 0.0 {
                    self.v
                } else {
                    self.q_doctor.exp_m1() / (2.0 * ea).exp_m1()
                };
                (ratio - 1.0).abs()
            }
            ScoreId::SrEnt => {
                if self.a2 == 0.0 {
                    // Scale 0 degenerates the log-domain metric; fall back
                    // to the plain ratio there (score = -ln K, form = -1).
                    ((-self.log_neg_ent.exp() / -1.0) - 1.0).abs()
                } else {
                    (self.log_neg_ent / self.a2 - 1.0).abs()
                }
            }
            _ => unreachable!("only softmax-response scores are swept"),
        }
    }

    /// Strictly monotone transform of the score value: equal keys mean the
    /// scores are indistinguishable in log-domain double precision, larger
    /// key means strictly larger score.
    fn ordering_key(&self, score: ScoreId) -> f64 {
        match score {
            ScoreId::SrMax => -self.log1p_sum,
            ScoreId::SrDoctor => -self.q_doctor,
            ScoreId::SrEnt => -self.log_neg_ent,
            _ => unreachable!("only softmax-response scores are swept"),
        }
    }
}

/// Convergence summary of one score at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEntry {
    pub score: ScoreId,
    pub lambda: f64,
    /// Largest per-row ratio metric (see the module docs for the per-score
    /// definitions).
    pub max_ratio_error: f64,
    /// Kendall tau-b between the score's row ordering at this scale and
    /// the confidence-margin ordering; None when one side is all ties.
    pub kendall_tau: Option<f64>,
}

/// Output of [`convergence_sweep`]: entries grouped by score in
/// [`SR_SCORES`] order, scales in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub entries: Vec<ConvergenceEntry>,
    /// Row indices excluded for having a top-two gap below [`GAP_TOL`].
    pub skipped_rows: Vec<usize>,
}

/// Sweeps the scale grid over a set of logit rows: for every score and
/// scale, the worst ratio metric across rows and the rank agreement with
/// the confidence margin. Tied rows are skipped and reported.
pub fn convergence_sweep(
    logits: &Array2<f64>,
    lambdas: &[f64],
) -> Result<AsymptoticReport, AsymptoticsError> {
    assert!(logits.ncols() >= 2, "rows need at least two logits");
    let mut skipped_rows = Vec::new();
    let mut sorted_rows: Vec<Vec<f64>> = Vec::new();
    let mut margins: Vec<f64> = Vec::new();
    for (i, row) in logits.rows().into_iter().enumerate() {
        let mut sorted: Vec<f64> = row.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite logits"));
        let gap = sorted[0] - sorted[1];
        if gap < GAP_TOL {
            skipped_rows.push(i);
        } else {
            margins.push(gap);
            sorted_rows.push(sorted);
        }
    }
    if sorted_rows.is_empty() {
        return Err(AsymptoticsError::NoUsableRows);
    }

    let mut entries = Vec::with_capacity(SR_SCORES.len() * lambdas.len());
    for score in SR_SCORES {
        for &lambda in lambdas {
            let rows: Vec<ScaledRow> = sorted_rows
                .iter()
                .map(|s| ScaledRow::new(s, lambda))
                .collect();
            let max_ratio_error = rows
                .iter()
                .map(|r| r.ratio_error(score))
                .fold(0.0, f64::max);
            debug_assert!(max_ratio_error.is_finite());
            let keys: Vec<f64> = rows.iter().map(|r| r.ordering_key(score)).collect();
            entries.push(ConvergenceEntry {
                score,
                lambda,
                max_ratio_error,
                kendall_tau: kendall_tau(&keys, &margins),
            });
        }
    }
    Ok(AsymptoticReport {
        entries,
        skipped_rows,
    })
}

/// Checks that all three closed forms are strictly increasing across a
/// grid of top-two gaps at the given scale. Duplicated gap values are
/// collapsed first; a single gap is vacuously monotone. Comparisons use
/// the literal form values, so scale-gap products deep in the saturated
/// double-precision regime (λ·g beyond roughly 700) can tie and fail.
pub fn monotonicity_check(gaps: &[f64], lambda: f64) -> Result<bool, AsymptoticsError> {
    for &g in gaps {
        if g.is_nan() || g <= 0.0 {
            return Err(AsymptoticsError::NonPositiveGap { value: g });
        }
    }
    let mut grid = gaps.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("positive gaps"));
    grid.dedup();
    for pair in grid.windows(2) {
        for score in SR_SCORES {
            let lo = asymptote(score, &[pair[0], 0.0], lambda).expect("positive gap");
            let hi = asymptote(score, &[pair[1], 0.0], lambda).expect("positive gap");
            // Wants strictly greater; NaN (a NaN scale) also fails here.
            if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Kendall tau-b between two equal-length value sequences: concordant
/// minus discordant pairs over the geometric mean of the non-tied pair
/// counts. None when either side ties every pair (the coefficient is
/// undefined there).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "sequences must be the same length");
    let n = a.len();
    if n < 2 {
        return None;
    }
    let mut concordant = 0_i64;
    let mut discordant = 0_i64;
    let mut tied_a = 0_i64;
    let mut tied_b = 0_i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i].partial_cmp(&a[j]).expect("finite values");
            let db = b[i].partial_cmp(&b[j]).expect("finite values");
            if da == Ordering::Equal {
                tied_a += 1;
            }
            if db == Ordering::Equal {
                tied_b += 1;
            }
            if da == Ordering::Equal || db == Ordering::Equal {
                continue;
            }
            if da == db {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == tied_a || n0 == tied_b {
        return None;
    }
    let denom = ((n0 - tied_a) as f64 * (n0 - tied_b) as f64).sqrt();
    Some((concordant - discordant) as f64 / denom)
}
