//! Command-line surface.
//!
//! One command per workflow stage: score evaluation (`score`), selection
//! analysis (`rc`, `calibrate`), shift studies (`ood-metrics`), the
//! synthetic benchmark (`synth`, `heatmap`), the scale-convergence report
//! (`lemma`), and the neighbor-count ablation (`sweep-knn`).
//!
//! Conventions shared by every command:
//! - exit 0 on success, exit 2 on any usage or validation failure;
//! - every random draw flows from `--seed` (default 0), so identical
//!   invocations produce byte-identical output files;
//! - datasets come from a manifest (see the io module) and are fully
//!   validated before any computation;
//! - output files are written atomically.

use crate::asymptotics::convergence_sweep;
use crate::data::{
    self, draw_calibration, ClassifierHead, EvalSet, ScoreId, ScoreVector, ShiftTag,
};
use crate::io::{self, FileEntry, FileFormat, FileKind, Manifest, SplitEntry};
use crate::oodmetrics::{ood_vs_sc_report, DEFAULT_TPR_TARGET};
use crate::scores::{fit_sirc, fit_vim, score_set, KnnConfig, ScoreInputs, SircConfig, VimConfig};
use crate::selection::{
    aurc, aurc_alpha, calibrate_threshold, descending_order, prefix_len, rc_curve,
    zero_one_losses, CalibrationTarget, RCCurve,
};
use crate::synthetic::{
    logits_2d, perturb, posterior_score, robustness_radius, sample_mixture, score_grid,
    GridSpec, LinearClassifier2D, MixtureSpec, PerturbCase,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use std::path::{Path, PathBuf};

/// Parses argv and runs one command, translating every failure into the
/// validation exit code. Clap itself exits with the same code on usage
/// errors.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

#[derive(Parser)]
#[command(
    name = "selcls",
    version,
    about = "Confidence scoring and risk-coverage evaluation for selective classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one confidence score on every row of a manifest
    Score(ScoreCmd),
    /// Risk-coverage curve and AURC summaries over chosen splits
    Rc(RcCmd),
    /// Calibrate an acceptance threshold on a drawn calibration subset
    Calibrate(CalibrateCmd),
    /// Detection metrics and selective risk on the in-distribution +
    /// label-shift mix
    OodMetrics(OodMetricsCmd),
    /// Sample the synthetic mixture benchmark and write its artifacts
    Synth(SynthCmd),
    /// Scale-convergence report of the softmax-response scores
    Lemma(LemmaCmd),
    /// One score over a square grid of the plane, for the synthetic
    /// classifier
    Heatmap(HeatmapCmd),
    /// AURC of the knn score across neighbor counts
    SweepKnn(SweepKnnCmd),
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Score(c) => cmd_score(c),
        Command::Rc(c) => cmd_rc(c),
        Command::Calibrate(c) => cmd_calibrate(c),
        Command::OodMetrics(c) => cmd_ood_metrics(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Lemma(c) => cmd_lemma(c),
        Command::Heatmap(c) => cmd_heatmap(c),
        Command::SweepKnn(c) => cmd_sweep_knn(c),
    }
}

/// Flags shared by every command that may have to fit a composite score.
#[derive(Args)]
struct FitFlags {
    /// Neighbor order for the knn score
    #[arg(long, default_value_t = KnnConfig::DEFAULT_K)]
    k: usize,
    /// Principal dimension for the vim score (default: half the feature
    /// dimension, rounded up)
    #[arg(long)]
    vim_dim: Option<usize>,
    /// Secondary score gating sirc
    #[arg(long, default_value = "energy")]
    sirc_secondary: String,
    /// Seed feeding every random draw of the command
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ScoreCmd {
    /// Dataset manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    /// Score name (sr_max, sr_doctor, sr_ent, conf_margin, geo_margin,
    /// rl_max, energy, knn, vim, sirc)
    #[arg(long)]
    score: String,
    #[command(flatten)]
    fit: FitFlags,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RcCmd {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    score: String,
    /// Which rows enter the curve: in, in+cov, in+label or all
    #[arg(long, default_value = "all")]
    splits: String,
    #[command(flatten)]
    fit: FitFlags,
    /// Output CSV path; the AURC summary lands next to it with a .json
    /// extension
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateCmd {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    score: String,
    /// coverage:VALUE or risk:VALUE
    #[arg(long)]
    target: String,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Args)]
struct OodMetricsCmd {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    score: String,
    /// True-positive rate at which the false-positive rate is read off
    #[arg(long, default_value_t = DEFAULT_TPR_TARGET)]
    tpr_target: f64,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Args)]
struct SynthCmd {
    /// Perturbation case: 1 (none), 2 (uniform half-width 0.5) or
    /// 3 (uniform half-width 2)
    #[arg(long, default_value = "1")]
    case: String,
    /// Expected samples per mixture component (the set holds 4n rows)
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LemmaCmd {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale grid, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])]
    lambdas: Vec<f64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeatmapCmd {
    /// Score name; composite scores needing fitted configs are rejected
    #[arg(long)]
    score: String,
    /// Square grid as min,max,steps
    #[arg(long, default_value = "-2,2,201", allow_hyphen_values = true)]
    grid: String,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepKnnCmd {
    #[arg(long)]
    manifest: PathBuf,
    /// Neighbor orders to sweep, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

// ─── shared plumbing ───

fn load_validated(manifest: &Path) -> Result<io::LoadedData> {
    let data = io::load_data(manifest)?;
    let violations = data::validate(&data.set, data.head.as_ref());
    if !violations.is_empty() {
        let mut msg = String::from("dataset failed validation:");
        for v in &violations {
            msg.push_str(&format!("\n  - {v}"));
        }
        bail!(msg);
    }
    Ok(data)
}

fn parse_score(name: &str) -> Result<ScoreId> {
    name.parse::<ScoreId>().map_err(|e| anyhow!(e))
}

/// Owned fitted configs; borrowed into a [`ScoreInputs`] per evaluation.
#[derive(Default)]
struct FittedConfigs {
    knn: Option<KnnConfig>,
    vim: Option<VimConfig>,
    sirc: Option<SircConfig>,
    sirc_secondary: Option<ScoreId>,
}

impl FittedConfigs {
    fn inputs<'a>(&'a self, head: Option<&'a ClassifierHead>) -> ScoreInputs<'a> {
        ScoreInputs {
            head,
            knn: self.knn.as_ref(),
            vim: self.vim.as_ref(),
            sirc: self.sirc.as_ref(),
            sirc_secondary: self.sirc_secondary,
        }
    }
}

/// Fits whatever the requested score needs: the calibration subset is
/// drawn once from the seed and shared by every fitted piece.
fn fit_configs(
    set: &EvalSet,
    head: Option<&ClassifierHead>,
    id: ScoreId,
    fit: &FitFlags,
) -> Result<FittedConfigs> {
    let mut cfgs = FittedConfigs::default();
    let secondary = if id == ScoreId::Sirc {
        let s = parse_score(&fit.sirc_secondary)
            .with_context(|| "parsing --sirc-secondary".to_string())?;
        cfgs.sirc_secondary = Some(s);
        Some(s)
    } else {
        None
    };
    let need_knn = id == ScoreId::Knn || secondary == Some(ScoreId::Knn);
    let need_vim = id == ScoreId::Vim || secondary == Some(ScoreId::Vim);
    if !(need_knn || need_vim || id == ScoreId::Sirc) {
        return Ok(cfgs);
    }
    let cal = draw_calibration(set, fit.seed)?;
    if need_knn {
        cfgs.knn = Some(KnnConfig::new(fit.k, cal.clone()));
    }
    if need_vim {
        let d = set
            .features()
            .ok_or_else(|| anyhow!("score 'vim' needs features in the manifest"))?
            .ncols();
        let dim = fit.vim_dim.unwrap_or_else(|| d.div_ceil(2));
        if dim == 0 || dim > d {
            bail!("--vim-dim must be in 1..={d}, got {dim}");
        }
        cfgs.vim = Some(fit_vim(set, &cal, dim)?);
    }
    if id == ScoreId::Sirc {
        let sirc = fit_sirc(set, &cal, secondary.expect("set above"), &cfgs.inputs(head))?;
        cfgs.sirc = Some(sirc);
    }
    Ok(cfgs)
}

fn evaluate_score(data: &io::LoadedData, id: ScoreId, fit: &FitFlags) -> Result<ScoreVector> {
    let cfgs = fit_configs(&data.set, data.head.as_ref(), id, fit)?;
    Ok(score_set(&data.set, id, &cfgs.inputs(data.head.as_ref()))?)
}

fn header(fields: &[&str]) -> Vec<String> {
    fields.iter().map(|s| s.to_string()).collect()
}

fn write_csv<I>(path: &Path, head: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    io::atomic_write(path, &io::csv_bytes(head, rows))?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    io::atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    // Quietly tolerate a closed pipe (e.g. piping into head).
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn rc_csv_rows(curve: &RCCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    curve
        .coverages
        .iter()
        .zip(&curve.risks)
        .map(|(c, r)| vec![c.to_string(), r.to_string()])
}

// ─── commands ───

fn cmd_score(cmd: ScoreCmd) -> Result<()> {
    let data = load_validated(&cmd.manifest)?;
    let id = parse_score(&cmd.score)?;
    let scores = evaluate_score(&data, id, &cmd.fit)?;
    let rows = scores
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()]);
    write_csv(&cmd.out, &header(&["index", id.as_str()]), rows)
}

fn split_rows(set: &EvalSet, choice: &str) -> Result<Vec<usize>> {
    let wanted: &[ShiftTag] = match choice {
        "in" => &[ShiftTag::InD],
        "in+cov" => &[ShiftTag::InD, ShiftTag::ShiftCov],
        "in+label" => &[ShiftTag::InD, ShiftTag::ShiftLabel],
        "all" => &[ShiftTag::InD, ShiftTag::ShiftCov, ShiftTag::ShiftLabel],
        other => bail!("unknown --splits choice '{other}' (expected in, in+cov, in+label or all)"),
    };
    Ok(set
        .shift_tags()
        .iter()
        .enumerate()
        .filter(|(_, t)| wanted.contains(t))
        .map(|(i, _)| i)
        .collect())
}

fn cmd_rc(cmd: RcCmd) -> Result<()> {
    let data = load_validated(&cmd.manifest)?;
    let id = parse_score(&cmd.score)?;
    // Score the full set first: fitted configs (calibration draw, knn
    // reference) must not depend on the split choice.
    let scores = evaluate_score(&data, id, &cmd.fit)?;
    let rows = split_rows(&data.set, &cmd.splits)?;
    if rows.is_empty() {
        bail!("--splits {} selects no rows", cmd.splits);
    }
    let sub = data.set.subset(&rows);
    let sub_scores: Vec<f64> = rows.iter().map(|&i| scores.values[i]).collect();
    let losses = zero_one_losses(&sub);
    let curve = rc_curve(&sub_scores, &losses)?;
    write_csv(&cmd.out, &header(&["coverage", "risk"]), rc_csv_rows(&curve))?;
    let summary = serde_json::json!({
        "aurc_0.1": aurc_alpha(&curve, 0.1)?,
        "aurc_0.5": aurc_alpha(&curve, 0.5)?,
        "aurc_1.0": aurc(&curve),
    });
    write_json(&cmd.out.with_extension("json"), &summary)
}

fn parse_target(text: &str) -> Result<CalibrationTarget> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("--target must look like coverage:0.8 or risk:0.05"))?;
    let value: f64 = value
        .parse()
        .with_context(|| format!("parsing target value '{value}'"))?;
    match kind {
        "coverage" => Ok(CalibrationTarget::CoverageAtLeast(value)),
        "risk" => Ok(CalibrationTarget::RiskAtMost(value)),
        other => bail!("unknown target kind '{other}' (expected coverage or risk)"),
    }
}

fn cmd_calibrate(cmd: CalibrateCmd) -> Result<()> {
    let data = load_validated(&cmd.manifest)?;
    let id = parse_score(&cmd.score)?;
    let target = parse_target(&cmd.target)?;
    let scores = evaluate_score(&data, id, &cmd.fit)?;
    let cal = draw_calibration(&data.set, cmd.fit.seed)?;
    let cal_set = data.set.subset(&cal.indices);
    let cal_scores: Vec<f64> = cal.indices.iter().map(|&i| scores.values[i]).collect();
    let cal_losses = zero_one_losses(&cal_set);
    let report = calibrate_threshold(&cal_scores, &cal_losses, target)?;
    print_json(&serde_json::json!({
        "gamma": report.gamma,
        "achieved_coverage": report.achieved_coverage,
        "achieved_risk": report.achieved_risk,
        "target": report.target.to_string(),
    }));
    Ok(())
}

fn cmd_ood_metrics(cmd: OodMetricsCmd) -> Result<()> {
    let data = load_validated(&cmd.manifest)?;
    let id = parse_score(&cmd.score)?;
    let scores = evaluate_score(&data, id, &cmd.fit)?;
    let report = ood_vs_sc_report(&data.set, &scores, cmd.tpr_target)?;
    print_json(&serde_json::json!({
        "score": id.as_str(),
        "auroc": report.auroc,
        "aupr": report.aupr,
        "tpr_target": report.tpr_target,
        "fpr_at_tpr": report.fpr_at_tpr,
        "rc": { "coverages": report.rc.coverages, "risks": report.rc.risks },
        "histograms": {
            "edges": report.histograms.edges,
            "correct_in_d": report.histograms.correct_in_d,
            "wrong_in_d": report.histograms.wrong_in_d,
            "shift_label": report.histograms.shift_label,
        },
    }));
    Ok(())
}

/// Scores the synth artifacts cover: everything computable without a
/// calibration draw (the perturbed cases have no in-distribution rows to
/// draw from), plus the exact posterior as a reference.
const SYNTH_SCORES: [ScoreId; 7] = [
    ScoreId::SrMax,
    ScoreId::SrDoctor,
    ScoreId::SrEnt,
    ScoreId::ConfMargin,
    ScoreId::GeoMargin,
    ScoreId::RlMax,
    ScoreId::Energy,
];

/// Selection level at which the radius histograms are taken.
const SYNTH_HIST_COVERAGE: f64 = 0.8;

fn cmd_synth(cmd: SynthCmd) -> Result<()> {
    let case: PerturbCase = cmd.case.parse().map_err(|e: String| anyhow!(e))?;
    if cmd.n == 0 {
        bail!("--n must be positive");
    }
    std::fs::create_dir_all(&cmd.out)
        .with_context(|| format!("creating {}", cmd.out.display()))?;

    let spec = MixtureSpec::default();
    let classifier = LinearClassifier2D::from_spec(&spec);
    let total = 4 * cmd.n;
    let sample = sample_mixture(&spec, total, cmd.seed);
    // The perturbation stream is separate from the sampling stream.
    let points = perturb(&sample.points, case, cmd.seed.wrapping_add(1));
    let logits = logits_2d(&classifier, &points);
    let tag = if case == PerturbCase::Case1 {
        ShiftTag::InD
    } else {
        ShiftTag::ShiftCov
    };
    let head = classifier.head();
    let set = EvalSet::new(
        logits.clone(),
        Some(points.clone()),
        sample.labels.clone(),
        vec![tag; total],
    )?;

    io::write_matrix(&cmd.out.join("points.csv"), FileFormat::Csv, &points)?;
    io::write_matrix(&cmd.out.join("logits.csv"), FileFormat::Csv, &logits)?;
    io::write_labels(&cmd.out.join("labels.csv"), &sample.labels)?;
    let norms = Array2::from_shape_vec((1, 4), head.weight_norms.clone()).expect("4 norms");
    io::write_matrix(&cmd.out.join("norms.csv"), FileFormat::Csv, &norms)?;
    let manifest = Manifest {
        num_classes: 4,
        feature_dim: Some(2),
        splits: vec![SplitEntry {
            shift: tag,
            files: vec![
                file_entry(FileKind::Logits, "logits.csv"),
                file_entry(FileKind::Labels, "labels.csv"),
                file_entry(FileKind::Features, "points.csv"),
                file_entry(FileKind::WeightNorms, "norms.csv"),
            ],
        }],
    };
    manifest.save(&cmd.out.join("manifest.json"))?;

    let radii: Vec<f64> = (0..total)
        .map(|i| robustness_radius(&classifier, [points[[i, 0]], points[[i, 1]]]))
        .collect();
    write_csv(
        &cmd.out.join("radii.csv"),
        &header(&["index", "radius"]),
        radii
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), r.to_string()]),
    )?;

    // One labeled block per score, posterior last.
    let inputs = ScoreInputs { head: Some(&head), ..Default::default() };
    let losses = zero_one_losses(&set);
    let mut labeled: Vec<(String, Vec<f64>)> = Vec::new();
    for id in SYNTH_SCORES {
        labeled.push((id.to_string(), score_set(&set, id, &inputs)?.values));
    }
    let post: Vec<f64> = (0..total)
        .map(|i| posterior_score(&spec, [points[[i, 0]], points[[i, 1]]]))
        .collect();
    labeled.push(("posterior".to_string(), post));

    let mut curve_rows: Vec<Vec<String>> = Vec::new();
    for (name, values) in &labeled {
        let curve = rc_curve(values, &losses)?;
        for (c, r) in curve.coverages.iter().zip(&curve.risks) {
            curve_rows.push(vec![name.clone(), c.to_string(), r.to_string()]);
        }
    }
    write_csv(
        &cmd.out.join("rc_curves.csv"),
        &header(&["score", "coverage", "risk"]),
        curve_rows,
    )?;

    // Radius histograms: everyone, then the samples each score keeps at
    // the reference coverage. Shared edges make the panels comparable.
    let edges = uniform_edges(&radii);
    let mut hist_rows: Vec<Vec<String>> = hist_csv_rows("all", &radii, &edges);
    let keep = prefix_len(total, SYNTH_HIST_COVERAGE);
    for (name, values) in &labeled {
        let order = descending_order(values);
        let selected: Vec<f64> = order[..keep].iter().map(|&i| radii[i]).collect();
        hist_rows.extend(hist_csv_rows(name, &selected, &edges));
    }
    write_csv(
        &cmd.out.join("radius_hist.csv"),
        &header(&["score", "bin_lo", "bin_hi", "count"]),
        hist_rows,
    )
}

fn file_entry(kind: FileKind, path: &str) -> FileEntry {
    FileEntry { kind, path: path.to_string(), format: FileFormat::Csv }
}

/// 30 uniform bins spanning the values (degenerate ranges get unit width).
fn uniform_edges(values: &[f64]) -> Vec<f64> {
    let bins = crate::oodmetrics::HISTOGRAM_BINS;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_raw = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi_raw > lo { hi_raw } else { lo + 1.0 };
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

fn hist_csv_rows(label: &str, values: &[f64], edges: &[f64]) -> Vec<Vec<String>> {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let bin = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[bin] += 1;
    }
    (0..bins)
        .map(|b| {
            vec![
                label.to_string(),
                edges[b].to_string(),
                edges[b + 1].to_string(),
                counts[b].to_string(),
            ]
        })
        .collect()
}

/// Sample size behind the `lemma` report.
const LEMMA_SAMPLE_ROWS: usize = 200;

fn cmd_lemma(cmd: LemmaCmd) -> Result<()> {
    if cmd.lambdas.is_empty() {
        bail!("--lambdas needs at least one value");
    }
    let spec = MixtureSpec::default();
    let classifier = LinearClassifier2D::from_spec(&spec);
    let sample = sample_mixture(&spec, LEMMA_SAMPLE_ROWS, cmd.seed);
    let logits = logits_2d(&classifier, &sample.points);
    let report = convergence_sweep(&logits, &cmd.lambdas)?;
    let skipped = report.skipped_rows.len().to_string();
    let rows = report.entries.iter().map(|e| {
        vec![
            e.score.to_string(),
            e.lambda.to_string(),
            e.max_ratio_error.to_string(),
            e.kendall_tau.map(|t| t.to_string()).unwrap_or_default(),
            skipped.clone(),
        ]
    });
    write_csv(
        &cmd.out,
        &header(&["score", "lambda", "max_ratio_err", "kendall_tau", "skipped_rows"]),
        rows,
    )
}

fn parse_grid(text: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        bail!("--grid must look like min,max,steps");
    }
    let min: f64 = parts[0].parse().context("parsing grid min")?;
    let max: f64 = parts[1].parse().context("parsing grid max")?;
    let steps: usize = parts[2].parse().context("parsing grid steps")?;
    if !min.is_finite() || !max.is_finite() || max <= min {
        bail!("grid needs finite max > min, got {min},{max}");
    }
    if steps < 2 {
        bail!("grid needs at least 2 steps per axis");
    }
    Ok(GridSpec { min, max, steps })
}

fn cmd_heatmap(cmd: HeatmapCmd) -> Result<()> {
    let id = parse_score(&cmd.score)?;
    let grid = parse_grid(&cmd.grid)?;
    let classifier = LinearClassifier2D::from_spec(&MixtureSpec::default());
    let g = score_grid(&classifier, id, &grid)?;
    let mut rows = Vec::with_capacity(g.xs.len() * g.ys.len());
    for (iy, y) in g.ys.iter().enumerate() {
        for (ix, x) in g.xs.iter().enumerate() {
            rows.push(vec![x.to_string(), y.to_string(), g.values[[iy, ix]].to_string()]);
        }
    }
    write_csv(&cmd.out, &header(&["x", "y", id.as_str()]), rows)
}

fn cmd_sweep_knn(cmd: SweepKnnCmd) -> Result<()> {
    let data = load_validated(&cmd.manifest)?;
    let cal = draw_calibration(&data.set, cmd.seed)?;
    let losses = zero_one_losses(&data.set);
    let mut rows = Vec::with_capacity(cmd.k.len());
    for &k in &cmd.k {
        let cfgs = FittedConfigs {
            knn: Some(KnnConfig::new(k, cal.clone())),
            ..Default::default()
        };
        let scores = score_set(&data.set, ScoreId::Knn, &cfgs.inputs(data.head.as_ref()))?;
        let curve = rc_curve(&scores.values, &losses)?;
        rows.push(vec![
            k.to_string(),
            aurc_alpha(&curve, 0.1)?.to_string(),
            aurc_alpha(&curve, 0.5)?.to_string(),
            aurc(&curve).to_string(),
        ]);
    }
    write_csv(
        &cmd.out,
        &header(&["k", "aurc_0.1", "aurc_0.5", "aurc_1.0"]),
        rows,
    )
}
