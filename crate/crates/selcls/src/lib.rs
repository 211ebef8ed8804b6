//! Selective-classification scoring and evaluation toolkit.
//!
//! A selective classifier pairs a base classifier with a selector that
//! abstains on low-confidence inputs: given a confidence score `s` and a
//! threshold `gamma`, a sample is accepted iff `s(x) > gamma`. This crate
//! provides the pieces needed to study that setup end to end:
//!
//! - [`data`]: evaluation sets (logits, optional penultimate features,
//!   labels, distribution-shift tags) and calibration-subset drawing.
//! - [`scores`]: ten confidence scores over logit rows, from softmax
//!   response variants and logit margins to KNN, ViM, and SIRC.
//! - [`selection`]: 0/1 losses, threshold selection, risk-coverage curves,
//!   AURC summaries, and threshold calibration against coverage or risk
//!   targets.
//! - [`oodmetrics`]: binary detection metrics (AUROC, AUPR, FPR at a TPR
//!   target) and a combined detection-vs-selection report.
//! - [`synthetic`]: a four-component 2-D Gaussian mixture benchmark with an
//!   optimal linear classifier, posterior scores, robustness radii, and
//!   bounded perturbation cases.
//! - [`asymptotics`]: large-scale (temperature) limits of the softmax
//!   response scores and convergence diagnostics against the logit margin.
//! - [`io`]: CSV and binary matrix formats plus the evaluation-set manifest.
//! - [`cli`]: the `selcls` command-line interface built on the above.
//!
//! All randomness is seeded explicitly; every operation is deterministic
//! given its inputs.

pub mod asymptotics;
pub mod cli;
pub mod data;
pub mod io;
pub mod oodmetrics;
pub mod scores;
pub mod selection;
pub mod synthetic;
