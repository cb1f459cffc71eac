//! Seeded experiment harness: grid scans over reservoir ensembles.
//!
//! Every experiment follows the same seeding plan. The root seed opens one
//! `ensemble` stream; member `r` of an ensemble derives from it by index, so
//! members are statistically independent while *grid values never shift
//! anyone's draws*: scanning the balance or the linearity parameter reuses
//! the same underlying magnitude/sign/task draws per member, which makes
//! sweep curves directly comparable point to point (paired ensembles). Each
//! member's task data comes from its own `task` sub-stream — structure is
//! sampled once per member and shared by the train and test splits, which
//! draw from separate sub-streams.
//!
//! Grid rows are computed one after another (so a numeric failure leaves
//! the rows finished so far on disk), members within a row in parallel.
//! Aggregation is a sequential reduction over the member-ordered results,
//! so output bytes do not depend on thread count or scheduling.
//!
//! [`execute`] is the artifact entry point: it writes `manifest.json` (the
//! resolved config) into the output directory *before* any result file,
//! streams result CSVs row by row, and finally rewrites the manifest with
//! run metadata (wall time, per-row seeds, output list). Feeding a manifest
//! back in as the config reproduces every CSV byte for byte.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{resolve, ExperimentConfig, ExperimentKind, PartialConfig};

use crate::error::{Error, Result};
use crate::measures::DynamicsReport;
use crate::pca;
use crate::prng::{RngStream, STREAM_ENSEMBLE, STREAM_TASK, STREAM_TASK_TEST, STREAM_TASK_TRAIN};
use crate::readout::{self, ReadoutModel, StateMatrix};
use crate::report;
use crate::reservoir::{diff_traces, run, ActivationKind, ActivationTrace};
use crate::tasks::{Dataset, TaskKind, TASK_CHANNELS};
use crate::topology::{Reservoir, ReservoirParams};

/// Component pairs inspected by the PCA-signature experiment.
pub const PCA_PAIRS: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 4)];

/// Steps both runs of a perturbation comparison evolve freely before the
/// driven run starts receiving input. Shared initial states take this long to
/// settle onto the attractor; diffing from step 0 would mostly measure that
/// settling transient (order 0.1 regardless of balance) instead of the
/// steady-state input response.
pub const PERTURBATION_WARMUP: usize = 100;

/// Ensemble mean with its standard error (sample sd / sqrt(R)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    /// Mean and standard error of a sample; a single observation has se 0.
    pub fn from_samples(samples: &[f64]) -> Stat {
        let r = samples.len();
        assert!(r > 0, "stats need at least one sample");
        let mean = samples.iter().sum::<f64>() / r as f64;
        let se = if r > 1 {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1) as f64;
            (var / r as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, se }
    }
}

/// One grid point of a scan, averaged over the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// Row variant: `free`/`driven` for dynamics scans, the task name for
    /// accuracy scans, the transfer-function variant otherwise.
    pub label: String,
    pub w: f64,
    pub b: f64,
    /// Linearity parameter of the row's transfer function (1 when the
    /// function has none).
    pub s: f64,
    /// Stream id of the `ensemble` stream the row's members derive from;
    /// `RngStream::from_parts(seed, row_seed)` replays the row.
    pub row_seed: u64,
    pub fluctuation: Stat,
    pub correlation: Stat,
    pub nonlinearity: Stat,
    pub rms: Stat,
    /// Test accuracy, present for rows that train a readout.
    pub accuracy: Option<Stat>,
}

/// All rows of one scan, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

/// Free-vs-driven divergence of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMemberRow {
    pub b: f64,
    pub member: usize,
    /// Stream id of this member's stream.
    pub row_seed: u64,
    /// Largest `|driven - free|` over all steps and non-input neurons.
    pub max_abs_diff: f64,
}

/// Member-0 trace pair (and their difference) at one balance value.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationTraces {
    pub b: f64,
    pub free: ActivationTrace,
    pub driven: ActivationTrace,
    /// `steps x |neurons|` signed difference `driven - free`.
    pub diff: DMatrix<f64>,
    /// Neuron indices the difference covers (the non-input neurons).
    pub neurons: Vec<usize>,
}

/// Result of [`perturbation_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub members: Vec<PerturbationMemberRow>,
    pub traces: Vec<PerturbationTraces>,
}

/// Linear separability of one projected component pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaPairScore {
    pub dims: (usize, usize),
    pub separability: f64,
}

/// PCA of the settled state cloud under one transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaActivationReport {
    pub activation: ActivationKind,
    pub row_seed: u64,
    /// Explained variance of every component, nonincreasing.
    pub variances: Vec<f64>,
    pub pairs: Vec<PcaPairScore>,
    /// Component indices of the projected columns.
    pub dims: Vec<usize>,
    /// `episodes x dims.len()` projected state cloud, one row per episode
    /// (the state at the episode's last step).
    pub projected: DMatrix<f64>,
    /// Episode label of each cloud row.
    pub labels: Vec<usize>,
}

/// Result of [`pca_signature`]: one report per transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaSignatureResult {
    pub reports: Vec<PcaActivationReport>,
}

/// One cell of the dense learned-label grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub x0: f64,
    pub x1: f64,
    pub predicted: usize,
}

/// Result of [`readout_only`]: the affine readout fitted on raw points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutOnlyResult {
    pub task: TaskKind,
    /// Stream id of the task stream the datasets derive from.
    pub row_seed: u64,
    pub train_accuracy: f64,
    pub accuracy: f64,
    /// `episodes x 2` test points.
    pub test_points: DMatrix<f64>,
    pub test_labels: Vec<usize>,
    pub predictions: Vec<usize>,
    /// `episodes x classes` pre-argmax score rows for the test points.
    pub scores: DMatrix<f64>,
    /// Learned label over a `resolution x resolution` grid of cell centers.
    pub grid: Vec<GridCell>,
    pub model: ReadoutModel,
    pub train_data: Dataset,
}

/// What an experiment computed, for callers that want more than files.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Scan(ScanResult),
    Perturbation(PerturbationResult),
    Pca(PcaSignatureResult),
    ReadoutOnly(Box<ReadoutOnlyResult>),
    Trace(ActivationTrace),
}

/// Run metadata appended to the manifest after a successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    /// Wall-clock duration of the computation, in milliseconds.
    pub wall_ms: u64,
    /// `row_seed` of every result row, in output order.
    pub row_seeds: Vec<u64>,
    /// File names written into the output directory, manifest excluded.
    pub outputs: Vec<String>,
}

/// Files written and results computed by one [`execute`] call.
#[derive(Debug)]
pub struct ExecutionReport {
    pub out_dir: PathBuf,
    /// Manifest first, then result files in creation order.
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u64,
    pub output: ExperimentOutput,
}

// ---------------------------------------------------------------------------
// Scan plumbing shared by the four scan experiments.

/// How one scan row exercises its reservoirs.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RowMode {
    /// Free-running trace, measures only.
    Free,
    /// Task-driven trace, measures only.
    Driven,
    /// Train a readout, evaluate on held-out data, measure the test trace.
    TrainEval,
}

/// Fully resolved description of one scan row.
#[derive(Debug, Clone)]
struct ScanSpec {
    label: String,
    w: f64,
    b: f64,
    s: f64,
    activation: ActivationKind,
    w_prime: f64,
    mode: RowMode,
}

/// Per-member measurements feeding one row's statistics.
struct MemberSample {
    fluctuation: f64,
    correlation: f64,
    nonlinearity: f64,
    rms: f64,
    accuracy: Option<f64>,
}

/// The linearity parameter a transfer function reports in scan rows.
fn linearity_of(activation: ActivationKind) -> f64 {
    match activation {
        ActivationKind::ScaledTanh(s) => s,
        _ => 1.0,
    }
}

/// Expands a config into its ordered list of scan rows.
fn scan_specs(cfg: &ExperimentConfig) -> Vec<ScanSpec> {
    let mut specs = Vec::new();
    match cfg.experiment {
        ExperimentKind::DynamicsScan => {
            for &w in &cfg.w {
                for &b in &cfg.b {
                    let base = ScanSpec {
                        label: "free".to_string(),
                        w,
                        b,
                        s: linearity_of(cfg.activation),
                        activation: cfg.activation,
                        w_prime: cfg.w_prime,
                        mode: RowMode::Free,
                    };
                    if cfg.with_input {
                        let mut driven = base.clone();
                        driven.label = "driven".to_string();
                        driven.mode = RowMode::Driven;
                        specs.push(base);
                        specs.push(driven);
                    } else {
                        specs.push(base);
                    }
                }
            }
        }
        ExperimentKind::AccuracyScan => {
            for &w in &cfg.w {
                for &b in &cfg.b {
                    specs.push(ScanSpec {
                        label: cfg.task.name().to_string(),
                        w,
                        b,
                        s: linearity_of(cfg.activation),
                        activation: cfg.activation,
                        w_prime: cfg.w_prime,
                        mode: RowMode::TrainEval,
                    });
                }
            }
        }
        ExperimentKind::LinearitySweep => {
            for &s in &cfg.s {
                specs.push(ScanSpec {
                    label: "scaled-tanh".to_string(),
                    w: cfg.w[0],
                    b: cfg.b[0],
                    s,
                    activation: ActivationKind::ScaledTanh(s),
                    w_prime: cfg.w_prime,
                    mode: RowMode::TrainEval,
                });
            }
        }
        ExperimentKind::ZeroBiasCircle => {
            let variants: [(&str, ActivationKind, f64); 4] = [
                ("tanh-biased", ActivationKind::Tanh, cfg.w_prime),
                ("tanh-zero-bias", ActivationKind::Tanh, 0.0),
                ("gaussian-zero-bias", ActivationKind::Gaussian, 0.0),
                ("cosine-zero-bias", ActivationKind::Cosine, 0.0),
            ];
            for (label, activation, w_prime) in variants {
                specs.push(ScanSpec {
                    label: label.to_string(),
                    w: cfg.w[0],
                    b: cfg.b[0],
                    s: 1.0,
                    activation,
                    w_prime,
                    mode: RowMode::TrainEval,
                });
            }
        }
        _ => {}
    }
    specs
}

/// Prefixes numeric/argument errors with the grid point they occurred at.
fn row_context(e: Error, spec: &ScanSpec) -> Error {
    let at = format!("row '{}' (w={}, b={}, s={})", spec.label, spec.w, spec.b, spec.s);
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{at}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{at}: {m}")),
        Error::Generation(m) => Error::Generation(format!("{at}: {m}")),
        other => other,
    }
}

/// Rejects traces that left the finite range (diverging linear dynamics).
fn ensure_finite(trace: &ActivationTrace) -> Result<()> {
    if trace.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric("activations diverged to non-finite values"))
    }
}

fn sample_from_trace(trace: &ActivationTrace, accuracy: Option<f64>) -> Result<MemberSample> {
    ensure_finite(trace)?;
    let report = DynamicsReport::from_trace(trace)?;
    Ok(MemberSample {
        fluctuation: report.fluctuation,
        correlation: report.correlation,
        nonlinearity: report.nonlinearity,
        rms: report.rms,
        accuracy,
    })
}

fn reservoir_params(cfg: &ExperimentConfig, spec: &ScanSpec) -> ReservoirParams {
    ReservoirParams::new(cfg.n, TASK_CHANNELS, spec.w, spec.b)
        .with_activation(spec.activation)
        .with_w_prime(spec.w_prime)
        .with_density(cfg.density)
}

/// Runs one ensemble member of one scan row.
fn member_sample(
    cfg: &ExperimentConfig,
    spec: &ScanSpec,
    params: &ReservoirParams,
    member: &RngStream,
) -> Result<MemberSample> {
    let res = Reservoir::sample(params, member)?;
    match spec.mode {
        RowMode::Free => {
            let trace = run(&res, None, cfg.steps)?;
            sample_from_trace(&trace, None)
        }
        RowMode::Driven => {
            let task_stream = member.derive(STREAM_TASK);
            let instance = cfg.task.instantiate(cfg.episode_steps, &task_stream)?;
            let episodes = cfg.steps.div_ceil(cfg.episode_steps);
            let data = instance.generate(episodes, &task_stream)?;
            let trace = run(&res, Some(&data.concat_frames()), cfg.steps)?;
            sample_from_trace(&trace, None)
        }
        RowMode::TrainEval => {
            let task_stream = member.derive(STREAM_TASK);
            let instance = cfg.task.instantiate(cfg.episode_steps, &task_stream)?;
            let train = instance.generate(cfg.train_episodes, &task_stream.derive(STREAM_TASK_TRAIN))?;
            let test = instance.generate(cfg.test_episodes, &task_stream.derive(STREAM_TASK_TEST))?;
            let train_states = readout::collect_states(&res, &train)?;
            let model = readout::fit(&train_states, cfg.task.class_count(), cfg.rcond)?;
            let (test_states, trace) = readout::collect_states_with_trace(&res, &test)?;
            let accuracy = readout::evaluate(&model, &test_states)?;
            sample_from_trace(&trace, Some(accuracy))
        }
    }
}

/// Computes one scan row: members in parallel, reduction in member order.
fn compute_scan_row(cfg: &ExperimentConfig, spec: &ScanSpec) -> Result<ScanRow> {
    let ensemble = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE);
    let params = reservoir_params(cfg, spec);
    let samples: Vec<Result<MemberSample>> = (0..cfg.ensemble as u64)
        .into_par_iter()
        .map(|r| member_sample(cfg, spec, &params, &ensemble.derive_index(r)))
        .collect();
    let mut fluctuation = Vec::with_capacity(cfg.ensemble);
    let mut correlation = Vec::with_capacity(cfg.ensemble);
    let mut nonlinearity = Vec::with_capacity(cfg.ensemble);
    let mut rms = Vec::with_capacity(cfg.ensemble);
    let mut accuracy = Vec::with_capacity(cfg.ensemble);
    for sample in samples {
        let sample = sample.map_err(|e| row_context(e, spec))?;
        fluctuation.push(sample.fluctuation);
        correlation.push(sample.correlation);
        nonlinearity.push(sample.nonlinearity);
        rms.push(sample.rms);
        if let Some(a) = sample.accuracy {
            accuracy.push(a);
        }
    }
    Ok(ScanRow {
        label: spec.label.clone(),
        w: spec.w,
        b: spec.b,
        s: spec.s,
        row_seed: ensemble.stream_id(),
        fluctuation: Stat::from_samples(&fluctuation),
        correlation: Stat::from_samples(&correlation),
        nonlinearity: Stat::from_samples(&nonlinearity),
        rms: Stat::from_samples(&rms),
        accuracy: if spec.mode == RowMode::TrainEval { Some(Stat::from_samples(&accuracy)) } else { None },
    })
}

/// Computes all rows, handing each finished row to `sink` (the CSV writer
/// during [`execute`], a no-op for the pure entry points).
fn scan_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<ScanResult>
where
    F: FnMut(&ScanRow) -> Result<()>,
{
    let mut rows = Vec::new();
    for spec in scan_specs(cfg) {
        let row = compute_scan_row(cfg, &spec)?;
        sink(&row)?;
        rows.push(row);
    }
    Ok(ScanResult { rows })
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment == kind {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "config describes experiment '{}' but '{}' was requested",
            cfg.experiment, kind
        )))
    }
}

// ---------------------------------------------------------------------------
// Public experiment entry points (pure: no file output).

/// Ensemble measures of free (and optionally task-driven) dynamics on the
/// `w x b` grid.
pub fn dynamics_scan(cfg: &ExperimentConfig) -> Result<ScanResult> {
    expect_kind(cfg, ExperimentKind::DynamicsScan)?;
    cfg.validate()?;
    scan_with(cfg, |_| Ok(()))
}

/// Train/test accuracy plus driven measures on the `w x b` grid.
pub fn accuracy_scan(cfg: &ExperimentConfig) -> Result<ScanResult> {
    expect_kind(cfg, ExperimentKind::AccuracyScan)?;
    cfg.validate()?;
    scan_with(cfg, |_| Ok(()))
}

/// Accuracy and activation scale across the `s` grid at fixed `(w, b)`.
pub fn linearity_sweep(cfg: &ExperimentConfig) -> Result<ScanResult> {
    expect_kind(cfg, ExperimentKind::LinearitySweep)?;
    cfg.validate()?;
    scan_with(cfg, |_| Ok(()))
}

/// Circle-task accuracy for biased tanh, zero-bias tanh, and the even
/// transfer functions without biases.
pub fn zero_bias_circle(cfg: &ExperimentConfig) -> Result<ScanResult> {
    expect_kind(cfg, ExperimentKind::ZeroBiasCircle)?;
    cfg.validate()?;
    scan_with(cfg, |_| Ok(()))
}

/// Computes all members of one perturbation row (one balance value).
fn perturbation_row(cfg: &ExperimentConfig, b: f64) -> Result<(Vec<PerturbationMemberRow>, PerturbationTraces)> {
    let ensemble = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE);
    let params = ReservoirParams::new(cfg.n, TASK_CHANNELS, cfg.w[0], b)
        .with_activation(cfg.activation)
        .with_w_prime(cfg.w_prime)
        .with_density(cfg.density);
    let per_member: Vec<Result<(PerturbationMemberRow, Option<PerturbationTraces>)>> = (0..cfg.ensemble as u64)
        .into_par_iter()
        .map(|r| {
            let member = ensemble.derive_index(r);
            let res = Reservoir::sample(&params, &member)?;
            let total = PERTURBATION_WARMUP + cfg.steps;
            let free_full = run(&res, None, total)?;
            let task_stream = member.derive(STREAM_TASK);
            let instance = cfg.task.instantiate(cfg.episode_steps, &task_stream)?;
            let episodes = cfg.steps.div_ceil(cfg.episode_steps);
            let data = instance.generate(episodes, &task_stream)?;
            // Zero frames are no input, so the driven run shares the free
            // run's warm-up trajectory exactly and the post-warm-up diff
            // isolates the response to the task input.
            let frames = data.concat_frames();
            let mut padded = DMatrix::zeros(PERTURBATION_WARMUP + frames.nrows(), frames.ncols());
            padded
                .view_mut((PERTURBATION_WARMUP, 0), (frames.nrows(), frames.ncols()))
                .copy_from(&frames);
            let driven_full = run(&res, Some(&padded), total)?;
            ensure_finite(&free_full)?;
            ensure_finite(&driven_full)?;
            let free = free_full.tail(cfg.steps);
            let driven = driven_full.tail(cfg.steps);
            let neurons: Vec<usize> = (res.m()..res.n()).collect();
            let diff = diff_traces(&driven, &free, &neurons)?;
            let row = PerturbationMemberRow {
                b,
                member: r as usize,
                row_seed: member.stream_id(),
                max_abs_diff: diff.amax(),
            };
            let traces =
                (r == 0).then(|| PerturbationTraces { b, free, driven, diff, neurons });
            Ok((row, traces))
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.ensemble);
    let mut first_traces = None;
    for entry in per_member {
        let (row, traces) = entry.map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("b={b}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("b={b}: {m}")),
            Error::Generation(m) => Error::Generation(format!("b={b}: {m}")),
            other => other,
        })?;
        rows.push(row);
        if let Some(t) = traces {
            first_traces = Some(t);
        }
    }
    let traces = first_traces.expect("member 0 always records traces");
    Ok((rows, traces))
}

/// Free vs task-driven traces on identical reservoirs and initial states;
/// reports the largest per-member divergence on non-input neurons.
pub fn perturbation_compare(cfg: &ExperimentConfig) -> Result<PerturbationResult> {
    expect_kind(cfg, ExperimentKind::PerturbationCompare)?;
    cfg.validate()?;
    let mut members = Vec::new();
    let mut traces = Vec::new();
    for &b in &cfg.b {
        let (rows, t) = perturbation_row(cfg, b)?;
        members.extend(rows);
        traces.push(t);
    }
    Ok(PerturbationResult { members, traces })
}

/// Transfer functions compared by the PCA-signature experiment.
const PCA_ACTIVATIONS: [ActivationKind; 2] = [ActivationKind::Tanh, ActivationKind::Linear];

/// Principal components of the settled state cloud for tanh vs linear
/// neurons on identical wiring, with per-pair linear separability.
///
/// The cloud holds one state per episode, sampled at the episode's last step,
/// where the state is as close as the run gets to a pure image of that
/// episode's input point. Mid-episode rows still carry the decaying previous
/// episode at a scale that rivals the faint nonlinear components this
/// experiment is after, and the row sampled one step later (the readout's
/// convention) already mixes in the next episode's input.
pub fn pca_signature(cfg: &ExperimentConfig) -> Result<PcaSignatureResult> {
    expect_kind(cfg, ExperimentKind::PcaSignature)?;
    cfg.validate()?;
    let member = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE).derive_index(0);
    let params = ReservoirParams::new(cfg.n, TASK_CHANNELS, cfg.w[0], cfg.b[0])
        .with_w_prime(cfg.w_prime)
        .with_density(cfg.density);
    let base = Reservoir::sample(&params, &member)?;
    let task_stream = member.derive(STREAM_TASK);
    let instance = cfg.task.instantiate(cfg.episode_steps, &task_stream)?;
    let data = instance.generate(cfg.train_episodes, &task_stream.derive(STREAM_TASK_TRAIN))?;
    let labels = data.labels();
    let dims: Vec<usize> = {
        let mut d: Vec<usize> = PCA_PAIRS.iter().flat_map(|&(a, b)| [a, b]).collect();
        d.dedup();
        d
    };
    let frames = data.concat_frames();
    let mut reports = Vec::with_capacity(PCA_ACTIVATIONS.len());
    for activation in PCA_ACTIVATIONS {
        let res = base.with_activation(activation);
        let trace = run(&res, Some(&frames), frames.nrows())?;
        ensure_finite(&trace)?;
        let values = trace.values();
        let mut cloud = DMatrix::zeros(labels.len(), res.n());
        for e in 0..labels.len() {
            cloud.row_mut(e).copy_from(&values.row((e + 1) * cfg.episode_steps - 1));
        }
        let model = pca::fit_pca(&cloud)?;
        let projected = pca::project(&model, &cloud, &dims)?;
        let mut pairs = Vec::with_capacity(PCA_PAIRS.len());
        for (a, b) in PCA_PAIRS {
            let ca = dims.iter().position(|&d| d == a).expect("dim listed");
            let cb = dims.iter().position(|&d| d == b).expect("dim listed");
            let mut plane = DMatrix::zeros(projected.nrows(), 2);
            plane.column_mut(0).copy_from(&projected.column(ca));
            plane.column_mut(1).copy_from(&projected.column(cb));
            pairs.push(PcaPairScore {
                dims: (a, b),
                separability: pca::separability_score(&plane, &labels)?,
            });
        }
        reports.push(PcaActivationReport {
            activation,
            row_seed: member.stream_id(),
            variances: model.variances.iter().copied().collect(),
            pairs,
            dims: dims.clone(),
            projected,
            labels: labels.clone(),
        });
    }
    Ok(PcaSignatureResult { reports })
}

/// The affine readout alone on raw task points: accuracy, pre-argmax
/// scores, and the learned label over a dense grid.
pub fn readout_only(cfg: &ExperimentConfig) -> Result<ReadoutOnlyResult> {
    expect_kind(cfg, ExperimentKind::ReadoutOnly)?;
    cfg.validate()?;
    let task_stream = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE).derive_index(0).derive(STREAM_TASK);
    let instance = cfg.task.instantiate(cfg.episode_steps, &task_stream)?;
    let train = instance.generate(cfg.train_episodes, &task_stream.derive(STREAM_TASK_TRAIN))?;
    let test = instance.generate(cfg.test_episodes, &task_stream.derive(STREAM_TASK_TEST))?;
    let train_points = train.episode_points()?;
    let test_points = test.episode_points()?;
    let classes = cfg.task.class_count();
    let model = readout::fit_direct(&train_points, &train.labels(), classes, cfg.rcond)?;
    let train_accuracy =
        readout::evaluate(&model, &StateMatrix::new(train_points, train.labels())?)?;
    let test_labels = test.labels();
    let episodes = test_points.nrows();
    let mut predictions = Vec::with_capacity(episodes);
    let mut scores = DMatrix::zeros(episodes, classes);
    let mut correct = 0usize;
    for p in 0..episodes {
        let point = test_points.row(p).transpose();
        scores.row_mut(p).tr_copy_from(&readout::scores(&model, &point)?);
        let predicted = readout::predict(&model, &point)?;
        if predicted == test_labels[p] {
            correct += 1;
        }
        predictions.push(predicted);
    }
    let accuracy = correct as f64 / episodes as f64;
    let resolution = cfg.grid_resolution;
    let mut grid = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let x0 = -1.0 + (i as f64 + 0.5) * 2.0 / resolution as f64;
        for j in 0..resolution {
            let x1 = -1.0 + (j as f64 + 0.5) * 2.0 / resolution as f64;
            let point = nalgebra::DVector::from_vec(vec![x0, x1]);
            grid.push(GridCell { x0, x1, predicted: readout::predict(&model, &point)? });
        }
    }
    Ok(ReadoutOnlyResult {
        task: cfg.task,
        row_seed: task_stream.stream_id(),
        train_accuracy,
        accuracy,
        test_points,
        test_labels,
        predictions,
        scores,
        grid,
        model,
        train_data: train,
    })
}

/// Free-running activation trace of ensemble member 0.
pub fn dump_trace(cfg: &ExperimentConfig) -> Result<ActivationTrace> {
    expect_kind(cfg, ExperimentKind::DumpTrace)?;
    cfg.validate()?;
    let member = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE).derive_index(0);
    let params = ReservoirParams::new(cfg.n, TASK_CHANNELS, cfg.w[0], cfg.b[0])
        .with_activation(cfg.activation)
        .with_w_prime(cfg.w_prime)
        .with_density(cfg.density);
    let res = Reservoir::sample(&params, &member)?;
    run(&res, None, cfg.steps)
}

// ---------------------------------------------------------------------------
// Artifact entry point.

/// Paths and row seeds accumulated while a run writes its files.
struct RunContext {
    out_dir: PathBuf,
    outputs: Vec<PathBuf>,
    row_seeds: Vec<u64>,
}

impl RunContext {
    fn file(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.outputs.push(path.clone());
        path
    }
}

/// Runs the configured experiment into `out_dir`.
///
/// `manifest.json` (the resolved config) is written before any result file
/// and rewritten with run metadata after success. Result CSVs are flushed
/// row by row, so a numeric failure mid-sweep leaves the finished rows on
/// disk and returns the error; the manifest then still carries `"run": null`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExecutionReport> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    report::write_manifest(&manifest_path, cfg, None)?;
    let mut ctx = RunContext { out_dir: out_dir.to_path_buf(), outputs: Vec::new(), row_seeds: Vec::new() };
    let output = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?
            .install(|| run_experiment(cfg, &mut ctx)),
        None => run_experiment(cfg, &mut ctx),
    }?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let run_info = RunInfo {
        wall_ms,
        row_seeds: ctx.row_seeds,
        outputs: ctx
            .outputs
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
    };
    report::write_manifest(&manifest_path, cfg, Some(&run_info))?;
    let mut outputs = vec![manifest_path];
    outputs.extend(ctx.outputs);
    Ok(ExecutionReport { out_dir: out_dir.to_path_buf(), outputs, wall_ms, output })
}

fn run_experiment(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::DynamicsScan
        | ExperimentKind::AccuracyScan
        | ExperimentKind::LinearitySweep
        | ExperimentKind::ZeroBiasCircle => {
            let path = ctx.file("scan.csv");
            let mut writer = report::ScanCsvWriter::create(&path)?;
            let mut seeds = Vec::new();
            let result = scan_with(cfg, |row| {
                writer.write_row(row)?;
                seeds.push(row.row_seed);
                Ok(())
            });
            ctx.row_seeds.extend(seeds);
            let result = result?;
            writer.finish()?;
            Ok(ExperimentOutput::Scan(result))
        }
        ExperimentKind::PerturbationCompare => {
            let path = ctx.file("summary.csv");
            let mut writer = report::PerturbationCsvWriter::create(&path)?;
            let mut members = Vec::new();
            let mut traces = Vec::new();
            for (i, &b) in cfg.b.iter().enumerate() {
                let (rows, t) = perturbation_row(cfg, b)?;
                for row in &rows {
                    writer.write_row(row)?;
                    ctx.row_seeds.push(row.row_seed);
                }
                report::write_trace_csv(&ctx.file(&format!("free_b{i}.csv")), &t.free)?;
                report::write_trace_csv(&ctx.file(&format!("driven_b{i}.csv")), &t.driven)?;
                report::write_diff_csv(&ctx.file(&format!("diff_b{i}.csv")), &t.diff, &t.neurons)?;
                members.extend(rows);
                traces.push(t);
            }
            writer.finish()?;
            Ok(ExperimentOutput::Perturbation(PerturbationResult { members, traces }))
        }
        ExperimentKind::PcaSignature => {
            let result = pca_signature(cfg)?;
            for report_entry in &result.reports {
                let name = format!("cloud_{}.csv", report_entry.activation.slug());
                report::write_cloud_csv(&ctx.file(&name), report_entry)?;
                ctx.row_seeds.push(report_entry.row_seed);
            }
            report::write_pca_summary_csv(&ctx.file("summary.csv"), &result)?;
            report::write_variances_csv(&ctx.file("variances.csv"), &result)?;
            Ok(ExperimentOutput::Pca(result))
        }
        ExperimentKind::ReadoutOnly => {
            let result = readout_only(cfg)?;
            ctx.row_seeds.push(result.row_seed);
            report::write_readout_summary_csv(&ctx.file("summary.csv"), &result)?;
            report::write_z_csv(&ctx.file("z.csv"), &result)?;
            report::write_grid_csv(&ctx.file("grid.csv"), &result)?;
            report::write_dataset_csv(&ctx.file("train_data.csv"), &result.train_data)?;
            report::write_dataset_manifest(&ctx.file("dataset.json"), &result.train_data, result.row_seed)?;
            fs::write(ctx.file("model.json"), result.model.to_json()? + "\n")?;
            Ok(ExperimentOutput::ReadoutOnly(Box::new(result)))
        }
        ExperimentKind::DumpTrace => {
            let trace = dump_trace(cfg)?;
            let member = RngStream::new(cfg.seed).derive(STREAM_ENSEMBLE).derive_index(0);
            ctx.row_seeds.push(member.stream_id());
            report::write_trace_csv(&ctx.file("trace.csv"), &trace)?;
            Ok(ExperimentOutput::Trace(trace))
        }
    }
}
