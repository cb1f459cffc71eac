//! Experiment configuration: kinds, per-kind defaults, JSON documents, and
//! override resolution.
//!
//! A run is described by one flat JSON object whose keys mirror
//! [`ExperimentConfig`]. Resolution is layered: the experiment kind supplies
//! defaults, an optional config file overrides them, and explicit flag
//! overrides win last. A run's `manifest.json` echoes the fully resolved
//! config (plus a `run` block), so a manifest is itself a valid config
//! document — re-running from it reproduces every result file byte for byte.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::DEFAULT_RCOND;
use crate::reservoir::ActivationKind;
use crate::tasks::{TaskKind, TASK_CHANNELS};

/// The eight runnable experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Ensemble measures of free-running (optionally also task-driven)
    /// dynamics over a `w x b` grid.
    DynamicsScan,
    /// Train/test classification accuracy plus driven measures over a
    /// `w x b` grid.
    AccuracyScan,
    /// Accuracy and activation scale as functions of the transfer-function
    /// linearity parameter `s`.
    LinearitySweep,
    /// Circle-task accuracy with and without bias spread, across transfer
    /// functions of different symmetry.
    ZeroBiasCircle,
    /// Free vs task-driven trace difference on matched reservoirs.
    PerturbationCompare,
    /// Principal-component separability of driven state clouds for tanh vs
    /// linear neurons on identical wiring.
    PcaSignature,
    /// Baseline: the affine readout alone on raw task points, without any
    /// reservoir.
    ReadoutOnly,
    /// Raw free-running activation trace of a single reservoir.
    DumpTrace,
}

impl ExperimentKind {
    /// Canonical kebab-case name (matches the CLI subcommand).
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::DynamicsScan => "dynamics-scan",
            ExperimentKind::AccuracyScan => "accuracy-scan",
            ExperimentKind::LinearitySweep => "linearity-sweep",
            ExperimentKind::ZeroBiasCircle => "zero-bias-circle",
            ExperimentKind::PerturbationCompare => "perturbation-compare",
            ExperimentKind::PcaSignature => "pca-signature",
            ExperimentKind::ReadoutOnly => "readout-only",
            ExperimentKind::DumpTrace => "dump-trace",
        }
    }

    /// All kinds, in CLI declaration order.
    pub fn all() -> [ExperimentKind; 8] {
        [
            ExperimentKind::DynamicsScan,
            ExperimentKind::AccuracyScan,
            ExperimentKind::LinearitySweep,
            ExperimentKind::ZeroBiasCircle,
            ExperimentKind::PerturbationCompare,
            ExperimentKind::PcaSignature,
            ExperimentKind::ReadoutOnly,
            ExperimentKind::DumpTrace,
        ]
    }

    /// The kind's complete default configuration.
    pub fn default_config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: self,
            seed: 42,
            n: 10,
            w: vec![0.1],
            b: vec![0.0],
            s: vec![1.0],
            w_prime: 0.1,
            density: 1.0,
            activation: ActivationKind::Tanh,
            task: TaskKind::Circle,
            episode_steps: 6,
            train_episodes: 1000,
            test_episodes: 1000,
            ensemble: 100,
            steps: 500,
            with_input: false,
            rcond: DEFAULT_RCOND,
            grid_resolution: 100,
            out_dir: None,
            jobs: None,
        };
        match self {
            ExperimentKind::DynamicsScan => {
                cfg.w = vec![0.1, 0.3, 0.5];
                cfg.b = balance_grid();
                cfg.task = default_temporal_task();
            }
            ExperimentKind::AccuracyScan => {}
            ExperimentKind::LinearitySweep => {
                cfg.s = linearity_grid();
            }
            ExperimentKind::ZeroBiasCircle => {}
            ExperimentKind::PerturbationCompare => {
                cfg.w = vec![0.5];
                cfg.b = vec![-0.9, 0.0, 0.9];
                cfg.ensemble = 20;
                cfg.task = default_temporal_task();
            }
            ExperimentKind::PcaSignature => {
                cfg.ensemble = 1;
            }
            ExperimentKind::ReadoutOnly => {
                cfg.task = TaskKind::Line;
                cfg.ensemble = 1;
            }
            ExperimentKind::DumpTrace => {
                cfg.w = vec![0.5];
                cfg.ensemble = 1;
                cfg.steps = 200;
            }
        }
        cfg
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Default balance grid: 21 evenly spaced points covering [-1, 1].
pub fn balance_grid() -> Vec<f64> {
    (0..=20).map(|k| (k as f64 - 10.0) / 10.0).collect()
}

/// Default linearity grid: 21 half-decade points covering ten orders of
/// magnitude, 10^-5 .. 10^5.
pub fn linearity_grid() -> Vec<f64> {
    (0..=20).map(|k| 10f64.powf(-5.0 + 0.5 * k as f64)).collect()
}

/// Default temporal stimulus for driven-dynamics experiments.
fn default_temporal_task() -> TaskKind {
    TaskKind::Spatiotemporal { eta: 0.4, zero_tail: 1 }
}

/// Fully resolved description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Which experiment to run.
    pub experiment: ExperimentKind,
    /// Root seed; every random draw in the run derives from it.
    pub seed: u64,
    /// Reservoir size (number of neurons).
    pub n: usize,
    /// Coupling-strength grid.
    pub w: Vec<f64>,
    /// Excitation/inhibition balance grid.
    pub b: Vec<f64>,
    /// Linearity-parameter grid (consumed by `linearity-sweep`).
    pub s: Vec<f64>,
    /// Bias spread.
    pub w_prime: f64,
    /// Connection density.
    pub density: f64,
    /// Neuron transfer function.
    pub activation: ActivationKind,
    /// Task family and parameters.
    pub task: TaskKind,
    /// Frames per episode (`T`).
    pub episode_steps: usize,
    /// Training episodes per evaluation.
    pub train_episodes: usize,
    /// Test episodes per evaluation.
    pub test_episodes: usize,
    /// Reservoirs per grid point (`R`).
    pub ensemble: usize,
    /// Free-running trace length in steps.
    pub steps: usize,
    /// For `dynamics-scan`: additionally record task-driven rows.
    pub with_input: bool,
    /// Pseudoinverse singular-value cutoff, relative to the largest one.
    pub rcond: f64,
    /// Side length of the dense label grid exported by `readout-only`.
    pub grid_resolution: usize,
    /// Output directory recorded by the run (flag override wins).
    pub out_dir: Option<String>,
    /// Worker-thread cap; unset means one per available core.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Checks grid shapes, parameter ranges, and per-kind requirements.
    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.b.is_empty() || self.s.is_empty() {
            return Err(Error::invalid("w, b and s grids must be nonempty"));
        }
        if let Some(bad) = self.w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("coupling strengths must be finite and >= 0, got {bad}")));
        }
        if let Some(bad) = self.b.iter().find(|v| !(v.is_finite() && v.abs() <= 1.0)) {
            return Err(Error::invalid(format!("balance values must lie in [-1, 1], got {bad}")));
        }
        if let Some(bad) = self.s.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("linearity values must be finite and > 0, got {bad}")));
        }
        if self.n < TASK_CHANNELS {
            return Err(Error::invalid(format!(
                "reservoir size {} cannot host {TASK_CHANNELS} input channels",
                self.n
            )));
        }
        if !(self.w_prime.is_finite() && self.w_prime >= 0.0) {
            return Err(Error::invalid(format!("bias spread must be finite and >= 0, got {}", self.w_prime)));
        }
        if !(self.density.is_finite() && (0.0..=1.0).contains(&self.density)) {
            return Err(Error::invalid(format!("density must lie in [0, 1], got {}", self.density)));
        }
        self.activation.validate()?;
        self.task.validate(self.episode_steps)?;
        if self.ensemble == 0 {
            return Err(Error::invalid("ensemble size must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("trace length must be >= 1 step"));
        }
        if self.train_episodes < 2 || self.test_episodes < 2 {
            return Err(Error::invalid("state collection needs at least two episodes per dataset"));
        }
        if !(self.rcond.is_finite() && (0.0..1.0).contains(&self.rcond)) {
            return Err(Error::invalid(format!("rcond must lie in [0, 1), got {}", self.rcond)));
        }
        if self.grid_resolution == 0 {
            return Err(Error::invalid("label-grid resolution must be >= 1"));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs must be >= 1 when set"));
        }
        match self.experiment {
            ExperimentKind::PerturbationCompare => {
                if self.n <= TASK_CHANNELS {
                    return Err(Error::invalid(format!(
                        "perturbation-compare measures non-input neurons and needs n > {TASK_CHANNELS}, got {}",
                        self.n
                    )));
                }
                Ok(())
            }
            ExperimentKind::PcaSignature => {
                if self.n < 5 {
                    return Err(Error::invalid(format!(
                        "pca-signature inspects components 3 and 4 and needs n >= 5, got {}",
                        self.n
                    )));
                }
                if self.task.class_count() != 2 {
                    return Err(Error::invalid("pca-signature separability is defined for binary tasks"));
                }
                Ok(())
            }
            ExperimentKind::ReadoutOnly => {
                if !self.task.is_spatial() {
                    return Err(Error::invalid(
                        "readout-only is a baseline for tasks whose episodes are single points; \
                         time-varying tasks have no such baseline",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A config document with every field optional: the overlay unit for
/// file- and flag-level overrides.
///
/// Accepts (and ignores) the `schema` and `run` keys so a run manifest can
/// be fed back in as a config; any other unknown key is rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub w: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub w_prime: Option<f64>,
    pub density: Option<f64>,
    pub activation: Option<ActivationKind>,
    pub task: Option<TaskKind>,
    pub episode_steps: Option<usize>,
    pub train_episodes: Option<usize>,
    pub test_episodes: Option<usize>,
    pub ensemble: Option<usize>,
    pub steps: Option<usize>,
    pub with_input: Option<bool>,
    pub rcond: Option<f64>,
    pub grid_resolution: Option<usize>,
    pub out_dir: Option<String>,
    pub jobs: Option<usize>,
    pub schema: Option<String>,
    pub run: Option<serde_json::Value>,
}

impl PartialConfig {
    /// Parses a JSON config document, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    /// Overwrites `cfg` with every field this overlay sets.
    pub fn apply_to(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.experiment {
            cfg.experiment = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = &self.w {
            cfg.w = v.clone();
        }
        if let Some(v) = &self.b {
            cfg.b = v.clone();
        }
        if let Some(v) = &self.s {
            cfg.s = v.clone();
        }
        if let Some(v) = self.w_prime {
            cfg.w_prime = v;
        }
        if let Some(v) = self.density {
            cfg.density = v;
        }
        if let Some(v) = self.activation {
            cfg.activation = v;
        }
        if let Some(v) = self.task {
            cfg.task = v;
        }
        if let Some(v) = self.episode_steps {
            cfg.episode_steps = v;
        }
        if let Some(v) = self.train_episodes {
            cfg.train_episodes = v;
        }
        if let Some(v) = self.test_episodes {
            cfg.test_episodes = v;
        }
        if let Some(v) = self.ensemble {
            cfg.ensemble = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.with_input {
            cfg.with_input = v;
        }
        if let Some(v) = self.rcond {
            cfg.rcond = v;
        }
        if let Some(v) = self.grid_resolution {
            cfg.grid_resolution = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = Some(v.clone());
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
    }
}

/// Layers kind defaults, an optional config file, and flag overrides into a
/// validated config. A file written for a different experiment kind is
/// rejected rather than silently reinterpreted.
pub fn resolve(
    kind: ExperimentKind,
    file: Option<&PartialConfig>,
    flags: &PartialConfig,
) -> Result<ExperimentConfig> {
    if let Some(found) = file.and_then(|f| f.experiment) {
        if found != kind {
            return Err(Error::invalid(format!(
                "config file describes experiment '{found}' but the '{kind}' command was invoked"
            )));
        }
    }
    let mut cfg = kind.default_config();
    if let Some(file) = file {
        file.apply_to(&mut cfg);
    }
    flags.apply_to(&mut cfg);
    cfg.experiment = kind;
    cfg.validate()?;
    Ok(cfg)
}
