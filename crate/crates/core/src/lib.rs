//! Random recurrent reservoirs with one-shot linear readouts.
//!
//! The crate builds small tanh-style reservoir networks from four scalar
//! knobs — size `N`, coupling strength `w`, excitation/inhibition balance
//! `b`, and bias spread `w'` — drives them with synthetic classification
//! tasks, trains an affine readout by pseudoinverse, and measures the
//! resulting dynamics (fluctuation, neighbor-step correlation, nonlinearity
//! score, RMS activation). On top of the primitives sits a scan harness that
//! sweeps the knob grid over seeded reservoir ensembles and writes
//! deterministic CSV/JSON artifacts.
//!
//! Module map:
//! * [`prng`] — named, replayable random streams;
//! * [`topology`] — reservoir parameters and weight/bias/state sampling;
//! * [`reservoir`] — activation functions and trace simulation;
//! * [`tasks`] — episode generators for the five benchmark tasks;
//! * [`readout`] — state collection, pseudoinverse fit, evaluation;
//! * [`measures`] — dynamical summary statistics of traces;
//! * [`pca`] — principal components of state clouds and separability;
//! * [`harness`] — seeded grid-scan experiments;
//! * [`report`] — CSV/JSON writers shared by the harness and the CLI.
//!
//! Everything is deterministic given a root seed: reruns produce
//! byte-identical artifacts regardless of thread count or phase order.

pub mod error;
pub mod harness;
pub mod measures;
pub mod pca;
pub mod prng;
pub mod readout;
pub mod report;
pub mod reservoir;
pub mod tasks;
pub mod topology;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentKind, PartialConfig};
pub use measures::DynamicsReport;
pub use pca::PcaModel;
pub use prng::RngStream;
pub use readout::{ReadoutModel, StateMatrix};
pub use reservoir::{ActivationKind, ActivationTrace};
pub use tasks::{Dataset, Episode, TaskInstance, TaskKind};
pub use topology::{Reservoir, ReservoirParams};
