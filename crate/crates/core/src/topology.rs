//! Reservoir parameters and random network construction.
//!
//! A reservoir is wired once from four scalar knobs and then frozen:
//!
//! * couplings `W[i][j] = |N(0, w)| * mask * sign`, where the mask keeps an
//!   entry with probability `density` and the sign is `+1` with probability
//!   `(1 + balance) / 2` — so `balance = -1` is purely inhibitory, `+1`
//!   purely excitatory, `0` sign-symmetric;
//! * biases `b_n ~ N(0, w_prime)`;
//! * input couplings `I[k][k] = w` for the first `m` neurons, zero elsewhere
//!   (channel `k` feeds neuron `k`, scaled like the recurrent couplings);
//! * initial state `y0 ~ U[-1, 1)`, stored so repeated runs of the same
//!   reservoir start identically.
//!
//! Magnitudes, mask, signs, biases, and initial state come from five
//! *separate* sub-streams of the sampling stream. Because the balance enters
//! only through the sign threshold, scanning `balance` at a fixed seed
//! re-signs the same magnitude matrix instead of resampling it, which makes
//! ensemble scans smooth; likewise `w` and `w_prime` only scale otherwise
//! identical draws.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prng::{
    RngStream, STREAM_BIASES, STREAM_INIT, STREAM_MASK, STREAM_SIGNS, STREAM_WEIGHTS,
};
use crate::reservoir::ActivationKind;

/// Scalar knobs that define a reservoir family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    /// Number of neurons.
    pub n: usize,
    /// Number of input channels (each drives one dedicated neuron).
    pub m: usize,
    /// Coupling strength: scale of the half-normal weight magnitudes and of
    /// the input couplings.
    pub w: f64,
    /// Bias spread: scale of the normal bias draws.
    pub w_prime: f64,
    /// Connection probability of each directed pair (1 = fully connected).
    pub density: f64,
    /// Excitation/inhibition balance in `[-1, 1]`.
    pub balance: f64,
    /// Neuron transfer function.
    pub activation: ActivationKind,
}

impl ReservoirParams {
    /// Standard parameter set: bias spread 0.1, full connectivity, tanh.
    pub fn new(n: usize, m: usize, w: f64, balance: f64) -> Self {
        ReservoirParams { n, m, w, w_prime: 0.1, density: 1.0, balance, activation: ActivationKind::Tanh }
    }

    /// Replaces the transfer function.
    pub fn with_activation(mut self, kind: ActivationKind) -> Self {
        self.activation = kind;
        self
    }

    /// Replaces the bias spread.
    pub fn with_w_prime(mut self, w_prime: f64) -> Self {
        self.w_prime = w_prime;
        self
    }

    /// Replaces the connection density.
    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    /// Checks all parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("reservoir needs at least one neuron"));
        }
        if self.m > self.n {
            return Err(Error::invalid(format!(
                "{} input channels cannot feed {} neurons one-to-one",
                self.m, self.n
            )));
        }
        if !(self.w.is_finite() && self.w >= 0.0) {
            return Err(Error::invalid(format!("coupling strength must be finite and >= 0, got {}", self.w)));
        }
        if !(self.w_prime.is_finite() && self.w_prime >= 0.0) {
            return Err(Error::invalid(format!("bias spread must be finite and >= 0, got {}", self.w_prime)));
        }
        if !(self.density.is_finite() && (0.0..=1.0).contains(&self.density)) {
            return Err(Error::invalid(format!("density must lie in [0, 1], got {}", self.density)));
        }
        if !(self.balance.is_finite() && (-1.0..=1.0).contains(&self.balance)) {
            return Err(Error::invalid(format!("balance must lie in [-1, 1], got {}", self.balance)));
        }
        self.activation.validate()
    }
}

/// Keeps ensembles statistically comparable across sizes: scales a coupling
/// strength quoted at `n_ref` neurons to an `n`-neuron network so the summed
/// input variance per neuron stays fixed (`w * sqrt(n_ref / n)`).
pub fn scale_coupling_for_size(w_ref: f64, n_ref: usize, n: usize) -> Result<f64> {
    if !(w_ref.is_finite() && w_ref >= 0.0) || n_ref == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "scale_coupling_for_size needs w_ref >= 0 and positive sizes, got ({w_ref}, {n_ref}, {n})"
        )));
    }
    Ok(w_ref * (n_ref as f64 / n as f64).sqrt())
}

/// Samples the `n x n` coupling matrix from the stream's `weights`, `mask`
/// and `signs` sub-streams (row-major entry order; all three sub-streams
/// advance once per entry even when the mask drops it, so changing one knob
/// never shifts another knob's draws).
pub fn sample_weight_matrix(params: &ReservoirParams, stream: &RngStream) -> Result<DMatrix<f64>> {
    params.validate()?;
    let mut magnitudes = stream.derive(STREAM_WEIGHTS);
    let mut mask = stream.derive(STREAM_MASK);
    let mut signs = stream.derive(STREAM_SIGNS);
    let p_plus = (1.0 + params.balance) / 2.0;
    let n = params.n;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let magnitude = magnitudes.normal(0.0, params.w)?.abs();
            let keep = mask.bernoulli(params.density)?;
            let sign = if signs.bernoulli(p_plus)? { 1.0 } else { -1.0 };
            w[(i, j)] = if keep { sign * magnitude } else { 0.0 };
        }
    }
    Ok(w)
}

/// Samples the `n` neuron biases from the stream's `biases` sub-stream.
pub fn sample_biases(params: &ReservoirParams, stream: &RngStream) -> Result<DVector<f64>> {
    params.validate()?;
    let mut biases = stream.derive(STREAM_BIASES);
    let mut b = DVector::zeros(params.n);
    for k in 0..params.n {
        b[k] = biases.normal(0.0, params.w_prime)?;
    }
    Ok(b)
}

/// Builds the fixed `n x m` input coupling matrix: channel `k` drives neuron
/// `k` with strength `w`, all other entries are zero.
pub fn build_input_matrix(params: &ReservoirParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let mut i = DMatrix::zeros(params.n, params.m);
    for k in 0..params.m {
        i[(k, k)] = params.w;
    }
    Ok(i)
}

/// Samples the initial state `y0 ~ U[-1, 1)` from the stream's `init`
/// sub-stream.
pub fn sample_initial_state(params: &ReservoirParams, stream: &RngStream) -> Result<DVector<f64>> {
    params.validate()?;
    let mut init = stream.derive(STREAM_INIT);
    let mut y0 = DVector::zeros(params.n);
    for k in 0..params.n {
        y0[k] = init.uniform(-1.0, 1.0)?;
    }
    Ok(y0)
}

/// A fully wired network: parameters plus the sampled matrices and the
/// stored initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    pub params: ReservoirParams,
    /// Recurrent couplings, `n x n`.
    pub weights: DMatrix<f64>,
    /// Neuron biases, length `n`.
    pub biases: DVector<f64>,
    /// Input couplings, `n x m`.
    pub input: DMatrix<f64>,
    /// Initial state reused by every run of this reservoir.
    pub initial_state: DVector<f64>,
}

/// Serialized form of a [`Reservoir`]: matrices as row-major nested arrays.
#[derive(Serialize, Deserialize)]
struct ReservoirDoc {
    params: ReservoirParams,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    input: Vec<Vec<f64>>,
    initial_state: Vec<f64>,
}

impl Reservoir {
    /// Samples a complete reservoir from one stream (see the module docs for
    /// the sub-stream layout).
    pub fn sample(params: &ReservoirParams, stream: &RngStream) -> Result<Self> {
        Ok(Reservoir {
            params: *params,
            weights: sample_weight_matrix(params, stream)?,
            biases: sample_biases(params, stream)?,
            input: build_input_matrix(params)?,
            initial_state: sample_initial_state(params, stream)?,
        })
    }

    /// Number of neurons.
    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Number of input channels.
    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Same wiring and initial state, different transfer function — for
    /// activation comparisons on identical networks.
    pub fn with_activation(&self, kind: ActivationKind) -> Self {
        let mut copy = self.clone();
        copy.params.activation = kind;
        copy
    }

    /// Serializes to a JSON document.
    pub fn to_json(&self) -> Result<String> {
        let doc = ReservoirDoc {
            params: self.params,
            weights: matrix_rows(&self.weights),
            biases: self.biases.iter().copied().collect(),
            input: matrix_rows(&self.input),
            initial_state: self.initial_state.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Restores a reservoir serialized with [`to_json`](Self::to_json),
    /// re-validating parameters and dimensions.
    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ReservoirDoc = serde_json::from_str(json)?;
        doc.params.validate()?;
        let (n, m) = (doc.params.n, doc.params.m);
        let weights = matrix_from_rows(&doc.weights, n, n, "weights")?;
        let input = matrix_from_rows(&doc.input, n, m, "input")?;
        if doc.biases.len() != n || doc.initial_state.len() != n {
            return Err(Error::invalid("bias or initial-state length does not match neuron count"));
        }
        Ok(Reservoir {
            params: doc.params,
            weights,
            biases: DVector::from_vec(doc.biases),
            input,
            initial_state: DVector::from_vec(doc.initial_state),
        })
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(format!("{what} matrix is not {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_is_a_pure_function_of_the_stream() {
        let params = ReservoirParams::new(10, 2, 0.5, 0.3);
        let stream = RngStream::new(17);
        assert_eq!(Reservoir::sample(&params, &stream).unwrap(), Reservoir::sample(&params, &stream).unwrap());
        assert_ne!(
            Reservoir::sample(&params, &RngStream::new(17)).unwrap().weights,
            Reservoir::sample(&params, &RngStream::new(18)).unwrap().weights,
        );
    }

    #[test]
    fn extreme_balance_fixes_all_signs() {
        let stream = RngStream::new(4);
        let excitatory = sample_weight_matrix(&ReservoirParams::new(20, 2, 0.5, 1.0), &stream).unwrap();
        assert!(excitatory.iter().all(|&v| v > 0.0), "balance +1 must give positive couplings");
        let inhibitory = sample_weight_matrix(&ReservoirParams::new(20, 2, 0.5, -1.0), &stream).unwrap();
        assert!(inhibitory.iter().all(|&v| v < 0.0), "balance -1 must give negative couplings");
    }

    #[test]
    fn balanced_signs_and_halfnormal_magnitudes() {
        // 100 x 100 entries: sign frequency and mean magnitude against their
        // analytic values (mean of |N(0, w)| is w * sqrt(2 / pi)).
        let params = ReservoirParams::new(100, 2, 0.5, 0.0);
        let w = sample_weight_matrix(&params, &RngStream::new(2024)).unwrap();
        let n_entries = (100 * 100) as f64;
        let positive = w.iter().filter(|&&v| v > 0.0).count() as f64 / n_entries;
        assert!((positive - 0.5).abs() < 0.02, "positive fraction {positive}");
        let mean_abs = w.iter().map(|v| v.abs()).sum::<f64>() / n_entries;
        let expected = 0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_abs - expected).abs() < 0.01, "mean magnitude {mean_abs} vs {expected}");
    }

    #[test]
    fn magnitudes_pass_a_halfnormal_ks_test() {
        // Kolmogorov-Smirnov at alpha = 0.01 on the 10^4 sampled magnitudes;
        // half-normal CDF is 2 Phi(x / w) - 1.
        use statrs::distribution::{ContinuousCDF, Normal};
        let params = ReservoirParams::new(100, 2, 0.5, 0.0);
        let w = sample_weight_matrix(&params, &RngStream::new(77)).unwrap();
        let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let phi = Normal::new(0.0, 0.5).unwrap();
        let n = mags.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in mags.iter().enumerate() {
            let cdf = 2.0 * phi.cdf(x) - 1.0;
            d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
        }
        let critical = 1.628 / n.sqrt();
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }

    #[test]
    fn balance_rescans_only_signs() {
        // Same stream, different balance: magnitudes must match entrywise.
        let stream = RngStream::new(5);
        let a = sample_weight_matrix(&ReservoirParams::new(30, 2, 0.5, 0.0), &stream).unwrap();
        let b = sample_weight_matrix(&ReservoirParams::new(30, 2, 0.5, 0.8), &stream).unwrap();
        assert_eq!(a.map(f64::abs), b.map(f64::abs));
        assert_ne!(a, b, "sign pattern should differ at balance 0.8");
        // And raising the balance can only flip signs - to +, never back.
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(!(x > &0.0 && y < &0.0), "balance increase flipped {x} negative");
        }
    }

    #[test]
    fn bias_spread_scales_draws() {
        let stream = RngStream::new(6);
        let narrow = sample_biases(&ReservoirParams::new(1000, 2, 0.5, 0.0), &stream).unwrap();
        let zero = sample_biases(
            &ReservoirParams::new(1000, 2, 0.5, 0.0).with_w_prime(0.0),
            &stream,
        )
        .unwrap();
        assert!(zero.iter().all(|&v| v == 0.0), "w' = 0 must give exactly zero biases");
        let sd = (narrow.iter().map(|v| v * v).sum::<f64>() / 999.0).sqrt();
        assert!((sd - 0.1).abs() < 0.01, "bias sd {sd}");
    }

    #[test]
    fn input_matrix_feeds_leading_neurons_only() {
        let params = ReservoirParams::new(5, 2, 0.3, 0.0);
        let i = build_input_matrix(&params).unwrap();
        assert_eq!(i.shape(), (5, 2));
        for r in 0..5 {
            for c in 0..2 {
                let expected = if r == c { 0.3 } else { 0.0 };
                assert_eq!(i[(r, c)], expected);
            }
        }
    }

    #[test]
    fn initial_state_is_uniform_and_reused() {
        let params = ReservoirParams::new(10_000, 2, 0.5, 0.0);
        let stream = RngStream::new(12);
        let y0 = sample_initial_state(&params, &stream).unwrap();
        assert!(y0.iter().all(|v| (-1.0..1.0).contains(v)));
        let mean = y0.iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert_eq!(y0, sample_initial_state(&params, &stream).unwrap());
    }

    #[test]
    fn density_masks_entries_without_shifting_draws() {
        let stream = RngStream::new(8);
        let full = sample_weight_matrix(&ReservoirParams::new(40, 2, 0.5, 0.0), &stream).unwrap();
        let half =
            sample_weight_matrix(&ReservoirParams::new(40, 2, 0.5, 0.0).with_density(0.5), &stream).unwrap();
        let kept = half.iter().filter(|&&v| v != 0.0).count() as f64 / 1600.0;
        assert!((kept - 0.5).abs() < 0.05, "kept fraction {kept}");
        // Surviving entries are bit-identical to the fully connected draw.
        for (a, b) in full.iter().zip(half.iter()) {
            assert!(*b == 0.0 || a == b);
        }
    }

    #[test]
    fn coupling_rescaling_matches_closed_form() {
        assert_relative_eq!(scale_coupling_for_size(0.5, 10, 100).unwrap(), 0.5 / 10f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(scale_coupling_for_size(0.1, 10, 40).unwrap(), 0.05, max_relative = 1e-12);
        assert_relative_eq!(scale_coupling_for_size(0.3, 10, 10).unwrap(), 0.3, max_relative = 1e-15);
        assert!(scale_coupling_for_size(-0.1, 10, 10).is_err());
        assert!(scale_coupling_for_size(0.1, 0, 10).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ReservoirParams::new(0, 0, 0.1, 0.0).validate().is_err());
        assert!(ReservoirParams::new(2, 3, 0.1, 0.0).validate().is_err());
        assert!(ReservoirParams::new(10, 2, -0.1, 0.0).validate().is_err());
        assert!(ReservoirParams::new(10, 2, 0.1, 1.5).validate().is_err());
        assert!(ReservoirParams::new(10, 2, 0.1, 0.0).with_density(1.2).validate().is_err());
        assert!(ReservoirParams::new(10, 2, 0.1, 0.0).with_w_prime(-0.5).validate().is_err());
        assert!(ReservoirParams::new(10, 2, 0.1, 0.0).validate().is_ok());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let params = ReservoirParams::new(7, 2, 0.5, -0.25).with_activation(ActivationKind::ScaledTanh(100.0));
        let res = Reservoir::sample(&params, &RngStream::new(31)).unwrap();
        let restored = Reservoir::from_json(&res.to_json().unwrap()).unwrap();
        assert_eq!(res, restored);
        assert!(Reservoir::from_json("{\"params\": 3}").is_err());
    }
}
