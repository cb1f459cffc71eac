//! Activation functions, state updates, and simulation traces.
//!
//! The network is a synchronous discrete-time map: every neuron recomputes
//! its activation in lockstep from the *previous* state vector,
//!
//! ```text
//! y_n(t) = f( b_n + sum_m I[n][m] * x_m(t-1) + sum_k W[n][k] * y_k(t-1) )
//! ```
//!
//! so one [`step`] is a pure function of `(previous state, previous input
//! frame)` and neuron update order cannot matter. [`run`] iterates the map
//! and records one trace row per step; the row at index `t` holds the state
//! *after* `t + 1` updates, and the input frame consumed by that update is
//! `input[t]`. Free-running dynamics are the same map with the input term
//! absent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Reservoir;

/// Neuron transfer function.
///
/// `ScaledTanh(s)` is `s * tanh(u / s)`: it interpolates between plain tanh
/// (`s = 1`) and the identity (`s -> inf`), with output bounded by `s`.
/// `Gaussian` (`exp(-u^2)`) and `Cosine` are even functions; both map into
/// `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Tanh,
    ScaledTanh(f64),
    Linear,
    Gaussian,
    Cosine,
}

impl ActivationKind {
    /// Applies the transfer function to a single pre-activation.
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            ActivationKind::Tanh => u.tanh(),
            ActivationKind::ScaledTanh(s) => s * (u / s).tanh(),
            ActivationKind::Linear => u,
            ActivationKind::Gaussian => (-u * u).exp(),
            ActivationKind::Cosine => u.cos(),
        }
    }

    /// Checks the kind's own parameters (`ScaledTanh` needs `s > 0`).
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::ScaledTanh(s) if !(s.is_finite() && s > 0.0) => Err(Error::invalid(
                format!("scaled-tanh linearity parameter must be finite and > 0, got {s}"),
            )),
            _ => Ok(()),
        }
    }

    /// Largest possible activation magnitude, if the function is bounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            ActivationKind::Tanh | ActivationKind::Gaussian | ActivationKind::Cosine => Some(1.0),
            ActivationKind::ScaledTanh(s) => Some(s),
            ActivationKind::Linear => None,
        }
    }

    /// Kebab-case name without parameters, for labels and file names.
    pub fn slug(&self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::ScaledTanh(_) => "scaled-tanh",
            ActivationKind::Linear => "linear",
            ActivationKind::Gaussian => "gaussian",
            ActivationKind::Cosine => "cosine",
        }
    }
}

/// Recorded state sequence of a simulation run: one row per time step, one
/// column per neuron. Row `t` is the state after `t + 1` synchronous updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    values: DMatrix<f64>,
}

impl ActivationTrace {
    /// Wraps a `steps x neurons` matrix as a trace.
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        ActivationTrace { values }
    }

    /// Number of recorded steps.
    pub fn n_steps(&self) -> usize {
        self.values.nrows()
    }

    /// Number of neurons.
    pub fn n_neurons(&self) -> usize {
        self.values.ncols()
    }

    /// Full `steps x neurons` matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// State vector recorded at step index `t` (0-based).
    pub fn state_at(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    /// The last `n` recorded steps as their own trace.
    ///
    /// Panics if fewer than `n` steps were recorded.
    pub fn tail(&self, n: usize) -> ActivationTrace {
        let skip = self.values.nrows() - n;
        ActivationTrace { values: self.values.rows(skip, n).clone_owned() }
    }
}

/// One synchronous update of the whole network.
///
/// `x_prev` is the input frame consumed by this update (`None` for
/// free-running dynamics). Dimensions are checked against the reservoir.
pub fn step(res: &Reservoir, y_prev: &DVector<f64>, x_prev: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = res.params.n;
    if y_prev.len() != n {
        return Err(Error::invalid(format!(
            "state has {} entries but the reservoir has {n} neurons",
            y_prev.len()
        )));
    }
    if let Some(x) = x_prev {
        if x.len() != res.params.m {
            return Err(Error::invalid(format!(
                "input frame has {} channels but the reservoir expects {}",
                x.len(),
                res.params.m
            )));
        }
    }
    let mut u = res.biases.clone();
    u.gemv(1.0, &res.weights, y_prev, 1.0);
    if let Some(x) = x_prev {
        u.gemv(1.0, &res.input, x, 1.0);
    }
    Ok(u.map(|v| res.params.activation.apply(v)))
}

/// Iterates the network for `n_steps` updates from its stored initial state
/// and records every state.
///
/// With `input = Some(frames)` (`frames` is `steps x channels`, row `t`
/// consumed by update `t`), the run is input-driven; the frame matrix must
/// supply at least `n_steps` rows. With `input = None` the network runs free.
pub fn run(res: &Reservoir, input: Option<&DMatrix<f64>>, n_steps: usize) -> Result<ActivationTrace> {
    let n = res.params.n;
    if let Some(frames) = input {
        if frames.ncols() != res.params.m {
            return Err(Error::invalid(format!(
                "input frames have {} channels but the reservoir expects {}",
                frames.ncols(),
                res.params.m
            )));
        }
        if frames.nrows() < n_steps {
            return Err(Error::invalid(format!(
                "{n_steps} steps requested but only {} input frames supplied",
                frames.nrows()
            )));
        }
    }
    let mut trace = DMatrix::zeros(n_steps, n);
    let mut y = res.initial_state.clone();
    let mut u = DVector::zeros(n);
    let mut x = DVector::zeros(res.params.m);
    for t in 0..n_steps {
        u.copy_from(&res.biases);
        u.gemv(1.0, &res.weights, &y, 1.0);
        if let Some(frames) = input {
            for c in 0..res.params.m {
                x[c] = frames[(t, c)];
            }
            u.gemv(1.0, &res.input, &x, 1.0);
        }
        for k in 0..n {
            y[k] = res.params.activation.apply(u[k]);
        }
        trace.row_mut(t).tr_copy_from(&y);
    }
    Ok(ActivationTrace::from_matrix(trace))
}

/// Elementwise difference `a - b` of two equally shaped traces, restricted to
/// the given neuron columns (in the order given).
pub fn diff_traces(a: &ActivationTrace, b: &ActivationTrace, neurons: &[usize]) -> Result<DMatrix<f64>> {
    if a.n_steps() != b.n_steps() || a.n_neurons() != b.n_neurons() {
        return Err(Error::invalid(format!(
            "trace shapes differ: {}x{} vs {}x{}",
            a.n_steps(),
            a.n_neurons(),
            b.n_steps(),
            b.n_neurons()
        )));
    }
    if let Some(&bad) = neurons.iter().find(|&&k| k >= a.n_neurons()) {
        return Err(Error::invalid(format!(
            "neuron index {bad} out of range for {} neurons",
            a.n_neurons()
        )));
    }
    let mut out = DMatrix::zeros(a.n_steps(), neurons.len());
    for t in 0..a.n_steps() {
        for (c, &k) in neurons.iter().enumerate() {
            out[(t, c)] = a.values()[(t, k)] - b.values()[(t, k)];
        }
    }
    Ok(out)
}
