//! `rescomp` — command-line front end for the experiment harness.
//!
//! One subcommand per experiment. Every run resolves its configuration in
//! three layers — built-in defaults for the experiment, then an optional
//! JSON config file (`--config`), then individual flag overrides — writes
//! `manifest.json` (the fully resolved configuration) into the output
//! directory before any result file, and streams versioned CSVs next to it.
//! Feeding a manifest back in via `--config` reproduces every result file
//! byte for byte.
//!
//! Output directory precedence: `--out`, else the config file's `out_dir`,
//! else `$RESCOMP_OUT`, else `runs/<experiment>`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error (bad flags, bad or
//! missing config, invalid parameter combination), 3 numeric failure
//! (diverging dynamics, non-converging decomposition); on a mid-sweep
//! numeric failure the rows finished so far stay on disk.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use rescomp_core::harness::{self, config, ExperimentKind, ExperimentOutput, PartialConfig};
use rescomp_core::reservoir::ActivationKind;
use rescomp_core::tasks::TaskKind;
use rescomp_core::{Error, Result};

/// Environment variable consulted for the default output directory.
const OUT_ENV: &str = "RESCOMP_OUT";

const SCAN_CSV_HELP: &str = "\
Output files:
  manifest.json  resolved configuration; rerun with `--config manifest.json`
  scan.csv       one row per grid point: row index (header cell carries the
                 schema version), label, w, b, s, row_seed, then mean and
                 standard error of fluctuation (f), neighbor-step
                 correlation (c), nonlinearity (alpha) and RMS activation,
                 then accuracy_mean/accuracy_se (empty on measure-only rows)";

const PERTURBATION_CSV_HELP: &str = "\
Output files:
  manifest.json    resolved configuration
  summary.csv      b, member, row_seed, max_abs_diff (largest activation
                   difference on non-input neurons, per ensemble member)
  free_b<i>.csv    free-running trace of member 0 at the i-th balance value
                   (one y<k> column per neuron, one row per step)
  driven_b<i>.csv  the same reservoir and steps, but task-driven
  diff_b<i>.csv    driven minus free on non-input neurons (d<k> columns)";

const PCA_CSV_HELP: &str = "\
Output files:
  manifest.json   resolved configuration
  cloud_<fn>.csv  per transfer function: one row per episode with its class
                  label and the state cloud projected onto components c0..c4
  summary.csv     activation, dim_a, dim_b, separability per component pair
  variances.csv   activation, component, variance (full spectrum)";

const READOUT_CSV_HELP: &str = "\
Output files:
  manifest.json   resolved configuration
  summary.csv     task, row_seed, train_accuracy, test_accuracy
  z.csv           per held-out point: x0, x1, label, predicted, then one
                  z<k> column per class with the pre-argmax scores
  grid.csv        learned label over a dense grid on [-1,1]^2: x0, x1,
                  predicted
  train_data.csv  the training episodes: episode, t, x0, x1, label
  dataset.json    training-set summary (task, sizes, seed)
  model.json      fitted readout weights and biases";

const TRACE_CSV_HELP: &str = "\
Output files:
  manifest.json  resolved configuration
  trace.csv      free-running activations: one row per step, one y<k>
                 column per neuron";

#[derive(Parser)]
#[command(
    name = "rescomp",
    version,
    about = "Random-reservoir experiments: dynamics scans, task accuracy, readout baselines",
    after_help = "Every run writes manifest.json first; pass it back via --config to \
                  reproduce the result files byte for byte. All CSV headers carry a \
                  schema version in their first cell."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble dynamics measures (F, C, alpha, RMS) over the w x b grid
    #[command(after_help = SCAN_CSV_HELP)]
    DynamicsScan(RunArgs),
    /// Held-out task accuracy plus driven measures over the w x b grid
    #[command(after_help = SCAN_CSV_HELP)]
    AccuracyScan(RunArgs),
    /// Accuracy and activation scale across the transfer-function linearity grid
    #[command(after_help = SCAN_CSV_HELP)]
    LinearitySweep(RunArgs),
    /// Circle-task accuracy with and without biases, for odd and even activations
    #[command(after_help = SCAN_CSV_HELP)]
    ZeroBiasCircle(RunArgs),
    /// Free vs task-driven traces on identical reservoirs; per-member max |dy|
    #[command(after_help = PERTURBATION_CSV_HELP)]
    PerturbationCompare(RunArgs),
    /// Principal components of the settled state cloud, tanh vs linear neurons
    #[command(after_help = PCA_CSV_HELP)]
    PcaSignature(RunArgs),
    /// The affine readout alone on raw task points (no reservoir)
    #[command(after_help = READOUT_CSV_HELP)]
    ReadoutOnly(RunArgs),
    /// Free-running activation trace of a single reservoir
    #[command(after_help = TRACE_CSV_HELP)]
    DumpTrace(RunArgs),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::DynamicsScan(a) => (ExperimentKind::DynamicsScan, a),
            Command::AccuracyScan(a) => (ExperimentKind::AccuracyScan, a),
            Command::LinearitySweep(a) => (ExperimentKind::LinearitySweep, a),
            Command::ZeroBiasCircle(a) => (ExperimentKind::ZeroBiasCircle, a),
            Command::PerturbationCompare(a) => (ExperimentKind::PerturbationCompare, a),
            Command::PcaSignature(a) => (ExperimentKind::PcaSignature, a),
            Command::ReadoutOnly(a) => (ExperimentKind::ReadoutOnly, a),
            Command::DumpTrace(a) => (ExperimentKind::DumpTrace, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file (flat keys matching the manifest; unknown keys rejected)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed; every random draw derives from it
    #[arg(long)]
    seed: Option<u64>,

    /// Reservoir size (number of neurons)
    #[arg(long)]
    n: Option<usize>,

    /// Coupling-strength grid, comma-separated
    #[arg(long, value_delimiter = ',')]
    w: Option<Vec<f64>>,

    /// Excitation/inhibition balance grid in [-1,1], comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,

    /// Linearity-parameter grid (linearity-sweep), comma-separated
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,

    /// Bias spread
    #[arg(long)]
    w_prime: Option<f64>,

    /// Connection density in (0,1]
    #[arg(long)]
    density: Option<f64>,

    /// Transfer function: tanh, linear, gaussian, cosine, or scaled-tanh:<s>
    #[arg(long)]
    activation: Option<String>,

    /// Task: line, circle, xor, patches, spatiotemporal
    #[arg(long)]
    task: Option<String>,

    /// Patch grid side length (with --task patches)
    #[arg(long)]
    patch_grid: Option<usize>,

    /// Number of patch classes (with --task patches)
    #[arg(long)]
    patch_classes: Option<usize>,

    /// Signal mixing rate in [0,1] (with --task spatiotemporal)
    #[arg(long)]
    eta: Option<f64>,

    /// Zero frames appended per episode (with --task spatiotemporal)
    #[arg(long)]
    zero_tail: Option<usize>,

    /// Frames per episode
    #[arg(long)]
    episode_steps: Option<usize>,

    /// Training episodes per evaluation
    #[arg(long)]
    train_episodes: Option<usize>,

    /// Test episodes per evaluation
    #[arg(long)]
    test_episodes: Option<usize>,

    /// Reservoirs per grid point
    #[arg(long)]
    ensemble: Option<usize>,

    /// Free-running trace length in steps
    #[arg(long)]
    steps: Option<usize>,

    /// Also record task-driven rows (dynamics-scan)
    #[arg(long, action = ArgAction::SetTrue)]
    with_input: bool,

    /// Pseudoinverse singular-value cutoff, relative to the largest
    #[arg(long)]
    rcond: Option<f64>,

    /// Side length of the readout-only label grid
    #[arg(long)]
    grid_resolution: Option<usize>,

    /// Output directory (default: config out_dir, then $RESCOMP_OUT, then runs/<experiment>)
    #[arg(long, value_name = "DIR")]
    out: Option<String>,

    /// Worker-thread cap (default: one per available core)
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    /// The task named by `--task` and its parameter flags.
    fn task_override(&self) -> Result<Option<TaskKind>> {
        let patch_flags = self.patch_grid.is_some() || self.patch_classes.is_some();
        let temporal_flags = self.eta.is_some() || self.zero_tail.is_some();
        let Some(name) = self.task.as_deref() else {
            if patch_flags {
                return Err(Error::invalid("--patch-grid/--patch-classes need --task patches"));
            }
            if temporal_flags {
                return Err(Error::invalid("--eta/--zero-tail need --task spatiotemporal"));
            }
            return Ok(None);
        };
        let task = match name {
            "line" | "circle" | "xor" if !patch_flags && !temporal_flags => match name {
                "line" => TaskKind::Line,
                "circle" => TaskKind::Circle,
                _ => TaskKind::Xor,
            },
            "patches" if !temporal_flags => TaskKind::Patches {
                grid: self.patch_grid.unwrap_or(3),
                classes: self.patch_classes.unwrap_or(3),
            },
            "spatiotemporal" if !patch_flags => TaskKind::Spatiotemporal {
                eta: self.eta.unwrap_or(0.4),
                zero_tail: self.zero_tail.unwrap_or(1),
            },
            "line" | "circle" | "xor" | "patches" | "spatiotemporal" => {
                return Err(Error::invalid(format!(
                    "task '{name}' does not take the given task-parameter flags"
                )))
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown task '{other}' (expected line, circle, xor, patches or spatiotemporal)"
                )))
            }
        };
        Ok(Some(task))
    }

    /// The transfer function named by `--activation`.
    fn activation_override(&self) -> Result<Option<ActivationKind>> {
        let Some(name) = self.activation.as_deref() else {
            return Ok(None);
        };
        let kind = match name {
            "tanh" => ActivationKind::Tanh,
            "linear" => ActivationKind::Linear,
            "gaussian" => ActivationKind::Gaussian,
            "cosine" => ActivationKind::Cosine,
            other => match other.strip_prefix("scaled-tanh:").and_then(|v| v.parse().ok()) {
                Some(s) => ActivationKind::ScaledTanh(s),
                None => {
                    return Err(Error::invalid(format!(
                        "unknown activation '{other}' (expected tanh, linear, gaussian, \
                         cosine or scaled-tanh:<s>)"
                    )))
                }
            },
        };
        Ok(Some(kind))
    }

    /// Collects all flag overrides into a config overlay.
    fn overlay(&self) -> Result<PartialConfig> {
        let mut flags = PartialConfig::default();
        flags.seed = self.seed;
        flags.n = self.n;
        flags.w = self.w.clone();
        flags.b = self.b.clone();
        flags.s = self.s.clone();
        flags.w_prime = self.w_prime;
        flags.density = self.density;
        flags.activation = self.activation_override()?;
        flags.task = self.task_override()?;
        flags.episode_steps = self.episode_steps;
        flags.train_episodes = self.train_episodes;
        flags.test_episodes = self.test_episodes;
        flags.ensemble = self.ensemble;
        flags.steps = self.steps;
        flags.with_input = self.with_input.then_some(true);
        flags.rcond = self.rcond;
        flags.grid_resolution = self.grid_resolution;
        flags.out_dir = self.out.clone();
        flags.jobs = self.jobs;
        Ok(flags)
    }
}

/// Reads the `--config` file; a missing or unreadable file is a usage error.
fn read_config(path: &Path) -> Result<PartialConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
    PartialConfig::from_json(&text)
}

/// Output directory: --out (already folded into the config), then the
/// config file's out_dir, then $RESCOMP_OUT, then runs/<experiment>.
fn choose_out_dir(cfg_out: &Option<String>, kind: ExperimentKind) -> PathBuf {
    if let Some(dir) = cfg_out {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUT_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("runs").join(kind.name())
}

/// One informative line about what the run computed.
fn summarize(output: &ExperimentOutput) -> String {
    match output {
        ExperimentOutput::Scan(result) => {
            let accuracies: Vec<f64> = result
                .rows
                .iter()
                .filter_map(|r| r.accuracy.as_ref().map(|a| a.mean))
                .collect();
            let lo = accuracies.iter().cloned().reduce(f64::min);
            let hi = accuracies.iter().cloned().reduce(f64::max);
            match (lo, hi) {
                (Some(lo), Some(hi)) => format!(
                    "{} rows, mean accuracy {lo:.3}..{hi:.3}",
                    result.rows.len()
                ),
                _ => format!("{} rows", result.rows.len()),
            }
        }
        ExperimentOutput::Perturbation(result) => {
            let parts: Vec<String> = result
                .traces
                .iter()
                .map(|t| {
                    let diffs: Vec<f64> = result
                        .members
                        .iter()
                        .filter(|m| m.b == t.b)
                        .map(|m| m.max_abs_diff)
                        .collect();
                    let lo = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = diffs.iter().cloned().fold(0.0f64, f64::max);
                    format!("b={}: max |dy| {lo:.1e}..{hi:.1e}", t.b)
                })
                .collect();
            parts.join("; ")
        }
        ExperimentOutput::Pca(result) => {
            let parts: Vec<String> = result
                .reports
                .iter()
                .map(|r| {
                    let pairs: Vec<String> = r
                        .pairs
                        .iter()
                        .map(|p| format!("({},{})={:.2}", p.dims.0, p.dims.1, p.separability))
                        .collect();
                    format!("{}: separability {}", r.activation.slug(), pairs.join(" "))
                })
                .collect();
            parts.join("; ")
        }
        ExperimentOutput::ReadoutOnly(result) => format!(
            "{}: train accuracy {:.4}, test accuracy {:.4}",
            result.task.name(),
            result.train_accuracy,
            result.accuracy
        ),
        ExperimentOutput::Trace(trace) => {
            format!("{} steps x {} neurons", trace.n_steps(), trace.n_neurons())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (kind, args) = cli.command.split();
    let file = match &args.config {
        Some(path) => Some(read_config(path)?),
        None => None,
    };
    let flags = args.overlay()?;
    let cfg = config::resolve(kind, file.as_ref(), &flags)?;
    let out_dir = choose_out_dir(&cfg.out_dir, kind);
    let report = harness::execute(&cfg, &out_dir)?;
    println!("{}: {}", kind.name(), summarize(&report.output));
    println!(
        "wrote {} files to {} in {} ms",
        report.outputs.len(),
        report.out_dir.display(),
        report.wall_ms
    );
    Ok(())
}

/// Maps library errors onto the documented exit codes.
fn exit_for(error: &Error) -> u8 {
    match error {
        Error::InvalidArgument(_) | Error::Json(_) => 2,
        Error::Numeric(_) | Error::Generation(_) => 3,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_for(&error))
        }
    }
}
