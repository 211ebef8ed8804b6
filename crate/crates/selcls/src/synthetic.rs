//! Synthetic 2-D Gaussian-mixture benchmark.
//!
//! Four isotropic Gaussians sit at unit distance from the origin, one per
//! quadrant, with equal weights. The matching linear classifier uses the
//! component means as weight rows with zero bias; for this mixture that is
//! the Bayes rule, and because every weight has unit norm the geometric and
//! logit margins coincide on it.
//!
//! The benchmark exists to make two things observable with known ground
//! truth:
//! - how scaling the logits reshapes softmax-response selectors while
//!   leaving margin selectors untouched ([`scaled_rc_experiment`]);
//! - how selection interacts with adversarial robustness, via the exact
//!   distance of each sample to its nearest decision boundary
//!   ([`robustness_radius`]) under bounded perturbations ([`perturb`]).

use crate::data::{ClassifierHead, EvalSet, ScoreId, ShiftTag};
use crate::scores::{self, ScoreError};
use crate::selection::{rc_curve, zero_one_losses, RCCurve};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Mixture of four isotropic Gaussians in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub means: [[f64; 2]; 4],
    /// Shared isotropic variance (sigma^2).
    pub variance: f64,
    pub weights: [f64; 4],
}

impl Default for MixtureSpec {
    /// One unit-norm mean per quadrant, counterclockwise from (+,+),
    /// variance 0.15, equal weights.
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        MixtureSpec {
            means: [[h, h], [-h, h], [-h, -h], [h, -h]],
            variance: 0.15,
            weights: [0.25; 4],
        }
    }
}

/// Linear four-class classifier on the plane: logit j is the dot product
/// with weight row j. No bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier2D {
    pub weights: [[f64; 2]; 4],
}

impl LinearClassifier2D {
    /// The classifier matched to a mixture: weight rows are the component
    /// means. For the default spec this is the Bayes rule, since with equal
    /// weights and shared variance the posterior argmax reduces to the
    /// nearest mean, i.e. the largest dot product with unit-norm means.
    pub fn from_spec(spec: &MixtureSpec) -> Self {
        LinearClassifier2D { weights: spec.means }
    }

    /// Head view of the weights (per-class norms) for geometric scores.
    pub fn head(&self) -> ClassifierHead {
        let norms = self
            .weights
            .iter()
            .map(|w| (w[0] * w[0] + w[1] * w[1]).sqrt())
            .collect();
        ClassifierHead::from_norms(norms)
    }

    pub fn logit_row(&self, point: [f64; 2]) -> [f64; 4] {
        let mut z = [0.0; 4];
        for (j, w) in self.weights.iter().enumerate() {
            z[j] = w[0] * point[0] + w[1] * point[1];
        }
        z
    }
}

/// Points drawn from a mixture with their component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    /// n x 2.
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
}

/// Draws `n` points: component by its weight, then an isotropic Gaussian
/// around that component's mean. Deterministic per seed.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> MixtureSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = spec.variance.sqrt();
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.gen();
        let mut component = spec.weights.len() - 1;
        let mut acc = 0.0;
        for (j, &w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = j;
                break;
            }
        }
        let gx: f64 = StandardNormal.sample(&mut rng);
        let gy: f64 = StandardNormal.sample(&mut rng);
        points[[i, 0]] = spec.means[component][0] + sigma * gx;
        points[[i, 1]] = spec.means[component][1] + sigma * gy;
        labels.push(component as i64);
    }
    MixtureSample { points, labels }
}

/// Logit matrix of the classifier over an n x 2 point matrix.
pub fn logits_2d(classifier: &LinearClassifier2D, points: &Array2<f64>) -> Array2<f64> {
    assert_eq!(points.ncols(), 2, "points must be n x 2");
    let n = points.nrows();
    let mut z = Array2::zeros((n, 4));
    for i in 0..n {
        let row = classifier.logit_row([points[[i, 0]], points[[i, 1]]]);
        for j in 0..4 {
            z[[i, j]] = row[j];
        }
    }
    z
}

/// Posterior component probabilities at a point, normalized to sum 1.
/// Computed with shifted exponents so distant points stay finite.
pub fn posterior(spec: &MixtureSpec, point: [f64; 2]) -> [f64; 4] {
    let mut log_terms = [0.0; 4];
    for (j, mean) in spec.means.iter().enumerate() {
        let dx = point[0] - mean[0];
        let dy = point[1] - mean[1];
        log_terms[j] = spec.weights[j].ln() - (dx * dx + dy * dy) / (2.0 * spec.variance);
    }
    let m = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; 4];
    let mut total = 0.0;
    for j in 0..4 {
        out[j] = (log_terms[j] - m).exp();
        total += out[j];
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Largest posterior probability: the confidence of the Bayes rule.
pub fn posterior_score(spec: &MixtureSpec, point: [f64; 2]) -> f64 {
    posterior(spec, point)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact distance from a point to the nearest decision boundary of the
/// classifier around its predicted class (ties to the lowest class index):
/// the smallest margin-to-norm ratio over the competing classes. Zero on a
/// boundary, never negative.
pub fn robustness_radius(classifier: &LinearClassifier2D, point: [f64; 2]) -> f64 {
    let z = classifier.logit_row(point);
    let mut winner = 0;
    for j in 1..4 {
        if z[j] > z[winner] {
            winner = j;
        }
    }
    let wy = classifier.weights[winner];
    let mut radius = f64::INFINITY;
    for (j, wj) in classifier.weights.iter().enumerate() {
        if j == winner {
            continue;
        }
        let diff = [wy[0] - wj[0], wy[1] - wj[1]];
        let norm = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
        let margin = diff[0] * point[0] + diff[1] * point[1];
        radius = radius.min(margin / norm);
    }
    radius
}

/// Bounded perturbation settings: per-dimension uniform noise of a given
/// half-width. Case 1 is the identity, cases 2 and 3 widen the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbCase {
    /// No perturbation.
    Case1,
    /// Uniform noise in [-0.5, 0.5] per dimension.
    Case2,
    /// Uniform noise in [-2, 2] per dimension.
    Case3,
}

impl PerturbCase {
    pub const ALL: [PerturbCase; 3] = [PerturbCase::Case1, PerturbCase::Case2, PerturbCase::Case3];

    pub fn half_width(self) -> f64 {
        match self {
            PerturbCase::Case1 => 0.0,
            PerturbCase::Case2 => 0.5,
            PerturbCase::Case3 => 2.0,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            PerturbCase::Case1 => 1,
            PerturbCase::Case2 => 2,
            PerturbCase::Case3 => 3,
        }
    }
}

impl std::str::FromStr for PerturbCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(PerturbCase::Case1),
            "2" => Ok(PerturbCase::Case2),
            "3" => Ok(PerturbCase::Case3),
            other => Err(format!("unknown perturbation case '{other}', expected 1, 2 or 3")),
        }
    }
}

/// Adds independent uniform noise of the case's half-width to every
/// coordinate. Case 1 returns the input unchanged and consumes no
/// randomness. Deterministic per seed.
pub fn perturb(points: &Array2<f64>, case: PerturbCase, seed: u64) -> Array2<f64> {
    let h = case.half_width();
    if h == 0.0 {
        return points.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Uniform::new_inclusive(-h, h);
    let mut out = points.clone();
    for v in out.iter_mut() {
        *v += noise.sample(&mut rng);
    }
    out
}

/// Default temperature grid for the scale experiment.
pub const DEFAULT_LAMBDAS: [f64; 4] = [0.1, 1.0, 2.0, 4.0];

/// What a curve in the scale experiment was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveLabel {
    /// A confidence score, evaluated on logits scaled by the given factor
    /// when one is present (margin scores need none: their ordering is
    /// scale-invariant).
    Score(ScoreId),
    /// The exact mixture posterior confidence, a scale-free reference.
    Posterior,
}

impl CurveLabel {
    pub fn as_str(self) -> String {
        match self {
            CurveLabel::Score(id) => id.to_string(),
            CurveLabel::Posterior => "posterior".to_string(),
        }
    }
}

/// One curve of the scale experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRcEntry {
    pub label: CurveLabel,
    pub lambda: Option<f64>,
    pub curve: RCCurve,
}

/// Risk-coverage curves of the softmax-response scores across a logit
/// scale grid, with the margin scores and the posterior as scale-invariant
/// references.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRcExperiment {
    pub sample: MixtureSample,
    pub entries: Vec<ScaledRcEntry>,
}

/// Samples the mixture, classifies it, and traces RC curves: each
/// softmax-response score once per scale factor, the two margin scores and
/// the posterior once. Losses come from the unscaled argmax, which every
/// positive scale preserves.
pub fn scaled_rc_experiment(
    spec: &MixtureSpec,
    classifier: &LinearClassifier2D,
    n: usize,
    seed: u64,
    lambdas: &[f64],
) -> ScaledRcExperiment {
    assert!(n > 0, "need at least one sample");
    assert!(lambdas.iter().all(|&l| l > 0.0), "scales must be positive");
    let sample = sample_mixture(spec, n, seed);
    let logits = logits_2d(classifier, &sample.points);
    let set = EvalSet::new(
        logits.clone(),
        None,
        sample.labels.clone(),
        vec![ShiftTag::InD; n],
    )
    .expect("aligned by construction");
    let losses = zero_one_losses(&set);
    let head = classifier.head();

    let mut entries = Vec::new();
    for id in [ScoreId::SrMax, ScoreId::SrDoctor, ScoreId::SrEnt] {
        for &lambda in lambdas {
            let values: Vec<f64> = (0..n)
                .map(|i| {
                    let scaled: Vec<f64> = set.logit_row(i).iter().map(|&z| lambda * z).collect();
                    match id {
                        ScoreId::SrMax => scores::sr_max(&scaled),
                        ScoreId::SrDoctor => scores::sr_doctor(&scaled),
                        _ => scores::sr_ent(&scaled),
                    }
                })
                .collect();
            entries.push(ScaledRcEntry {
                label: CurveLabel::Score(id),
                lambda: Some(lambda),
                curve: rc_curve(&values, &losses).expect("non-empty"),
            });
        }
    }
    for id in [ScoreId::ConfMargin, ScoreId::GeoMargin] {
        let values: Vec<f64> = (0..n)
            .map(|i| match id {
                ScoreId::ConfMargin => scores::conf_margin(set.logit_row(i)),
                _ => scores::geo_margin(set.logit_row(i), &head),
            })
            .collect();
        entries.push(ScaledRcEntry {
            label: CurveLabel::Score(id),
            lambda: None,
            curve: rc_curve(&values, &losses).expect("non-empty"),
        });
    }
    let post: Vec<f64> = (0..n)
        .map(|i| posterior_score(spec, [sample.points[[i, 0]], sample.points[[i, 1]]]))
        .collect();
    entries.push(ScaledRcEntry {
        label: CurveLabel::Posterior,
        lambda: None,
        curve: rc_curve(&post, &losses).expect("non-empty"),
    });
    ScaledRcExperiment { sample, entries }
}

/// Square evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: -2.0,
            max: 2.0,
            steps: 201,
        }
    }
}

impl GridSpec {
    pub fn coordinates(&self) -> Vec<f64> {
        assert!(self.steps >= 2, "grid needs at least 2 steps per axis");
        assert!(self.max > self.min, "grid range must be non-empty");
        let w = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + w * i as f64).collect()
    }
}

/// A score evaluated over a square grid of the plane; `values[[iy, ix]]`
/// belongs to the point `(xs[ix], ys[iy])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Array2<f64>,
}

/// Evaluates one of the logit-only scores (or the geometric margin, using
/// the classifier's own head) at every grid point. Scores needing fitted
/// configs or reference sets are rejected.
pub fn score_grid(
    classifier: &LinearClassifier2D,
    id: ScoreId,
    grid: &GridSpec,
) -> Result<ScoreGrid, ScoreError> {
    let head = classifier.head();
    let eval: fn(&[f64], &ClassifierHead) -> f64 = match id {
        ScoreId::SrMax => |z, _| scores::sr_max(z),
        ScoreId::SrDoctor => |z, _| scores::sr_doctor(z),
        ScoreId::SrEnt => |z, _| scores::sr_ent(z),
        ScoreId::ConfMargin => |z, _| scores::conf_margin(z),
        ScoreId::GeoMargin => scores::geo_margin,
        ScoreId::RlMax => |z, _| scores::rl_max(z),
        ScoreId::Energy => |z, _| scores::energy(z),
        ScoreId::Knn | ScoreId::Vim | ScoreId::Sirc => {
            return Err(ScoreError::MissingConfig { score: id })
        }
    };
    let xs = grid.coordinates();
    let ys = grid.coordinates();
    let mut values = Array2::zeros((ys.len(), xs.len()));
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let z = classifier.logit_row([x, y]);
            values[[iy, ix]] = eval(&z, &head);
        }
    }
    Ok(ScoreGrid { xs, ys, values })
}
