//! Dynamical summary measures of activation traces.
//!
//! Four scalars characterize a run, each computed over the *entire* trace
//! (no warm-up discard):
//!
//! * **fluctuation** `F`: population standard deviation over time of each
//!   neuron, averaged over neurons — zero for frozen states, one for a
//!   full-swing `±1` oscillation;
//! * **correlation** `C`: the raw product moment `<y_m(t) * y_n(t+1)>_t`
//!   averaged over *all ordered* neuron pairs including `m = n` — near `+1`
//!   when the network locks into a saturated fixed point, near `-1` for a
//!   globally synchronized alternation, near `0` for irregular activity;
//! * **nonlinearity** `alpha`: pooled activations are binned into
//!   `A = [-1, -0.5)`, `B = [-0.5, 0.5]`, `C = (0.5, 1]` (values beyond
//!   `±1`, possible for linear-family activations, clamp into the outer
//!   bins) and `alpha = f_A - f_B + f_C`: `-1` when everything sits in the
//!   quasi-linear center, `+1` when everything saturates;
//! * **rms**: root mean square activation, the overall signal scale.

use crate::error::{Error, Result};
use crate::reservoir::ActivationTrace;

/// Mean over neurons of the population standard deviation over time.
pub fn fluctuation(trace: &ActivationTrace) -> Result<f64> {
    if trace.n_steps() < 2 {
        return Err(Error::invalid("fluctuation needs at least two steps"));
    }
    let v = trace.values();
    let steps = v.nrows() as f64;
    let mut total = 0.0;
    for n in 0..v.ncols() {
        let col = v.column(n);
        let mean = col.sum() / steps;
        let var = col.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / steps;
        total += var.sqrt();
    }
    Ok(total / v.ncols() as f64)
}

/// Mean over all ordered neuron pairs `(m, n)` — self-pairs included — of
/// the time-averaged neighbor-step product `y_m(t) * y_n(t + 1)`.
pub fn correlation(trace: &ActivationTrace) -> Result<f64> {
    if trace.n_steps() < 2 {
        return Err(Error::invalid("correlation needs at least two steps"));
    }
    let v = trace.values();
    let n = v.ncols() as f64;
    // sum over pairs of y_m(t) y_n(t+1) factorizes into row-sum products.
    let row_sums: Vec<f64> = (0..v.nrows()).map(|t| v.row(t).sum()).collect();
    let lagged: f64 = row_sums.windows(2).map(|w| w[0] * w[1]).sum();
    Ok(lagged / ((v.nrows() - 1) as f64 * n * n))
}

/// Nonlinearity score `alpha = f_A - f_B + f_C` of the pooled activations.
pub fn nonlinearity(trace: &ActivationTrace) -> Result<f64> {
    if trace.n_steps() == 0 {
        return Err(Error::invalid("nonlinearity needs a nonempty trace"));
    }
    let v = trace.values();
    let (mut low, mut mid, mut high) = (0usize, 0usize, 0usize);
    for &y in v.iter() {
        if y < -0.5 {
            low += 1;
        } else if y <= 0.5 {
            mid += 1;
        } else {
            high += 1;
        }
    }
    let total = (low + mid + high) as f64;
    Ok((low as f64 - mid as f64 + high as f64) / total)
}

/// Root mean square of all recorded activations.
pub fn rms_activation(trace: &ActivationTrace) -> Result<f64> {
    if trace.n_steps() == 0 {
        return Err(Error::invalid("rms needs a nonempty trace"));
    }
    let v = trace.values();
    Ok((v.iter().map(|y| y * y).sum::<f64>() / v.len() as f64).sqrt())
}

/// All four measures of one trace, plus its dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsReport {
    pub fluctuation: f64,
    pub correlation: f64,
    pub nonlinearity: f64,
    pub rms: f64,
    pub n_steps: usize,
    pub n_neurons: usize,
}

impl DynamicsReport {
    /// Computes every measure over the full trace.
    pub fn from_trace(trace: &ActivationTrace) -> Result<Self> {
        Ok(DynamicsReport {
            fluctuation: fluctuation(trace)?,
            correlation: correlation(trace)?,
            nonlinearity: nonlinearity(trace)?,
            rms: rms_activation(trace)?,
            n_steps: trace.n_steps(),
            n_neurons: trace.n_neurons(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn trace_from_rows(rows: usize, cols: usize, data: &[f64]) -> ActivationTrace {
        ActivationTrace::from_matrix(DMatrix::from_row_slice(rows, cols, data))
    }

    #[test]
    fn correlation_of_the_two_step_two_neuron_example() {
        // States (1,0) then (0,1): only the pair (m=0, n=1) contributes a
        // product of 1, so the mean over the four ordered pairs is 1/4.
        let trace = trace_from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(correlation(&trace).unwrap(), 0.25);
    }

    #[test]
    fn constant_quiet_trace_hits_the_calm_extremes() {
        let trace = trace_from_rows(10, 3, &[0.2; 30]);
        assert!(fluctuation(&trace).unwrap() < 1e-12);
        assert_eq!(nonlinearity(&trace).unwrap(), -1.0);
        let c = correlation(&trace).unwrap();
        assert!((c - 0.04).abs() < 1e-15, "constant c: products are c^2, got {c}");
        assert!((rms_activation(&trace).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn frozen_saturated_trace_hits_the_fixpoint_extremes() {
        let trace = trace_from_rows(8, 4, &[1.0; 32]);
        assert_eq!(fluctuation(&trace).unwrap(), 0.0);
        assert_eq!(correlation(&trace).unwrap(), 1.0);
        assert_eq!(nonlinearity(&trace).unwrap(), 1.0);
        assert_eq!(rms_activation(&trace).unwrap(), 1.0);
    }

    #[test]
    fn global_alternation_hits_the_oscillatory_extremes() {
        // All neurons flip together between +1 and -1 over an even number of
        // steps: full fluctuation, perfectly negative neighbor correlation.
        let mut data = Vec::new();
        for t in 0..10 {
            let v = if t % 2 == 0 { 1.0 } else { -1.0 };
            data.extend([v; 3]);
        }
        let trace = trace_from_rows(10, 3, &data);
        assert_eq!(fluctuation(&trace).unwrap(), 1.0);
        assert_eq!(correlation(&trace).unwrap(), -1.0);
        assert_eq!(nonlinearity(&trace).unwrap(), 1.0);
    }

    #[test]
    fn center_bin_is_closed_and_outliers_clamp_outward() {
        // Exactly ±0.5 belongs to the center bin; values beyond ±1 count as
        // saturated.
        let trace = trace_from_rows(1, 6, &[-0.5, 0.5, -1.2, 1.2, 0.0, 0.6]);
        // bins: B, B, A, C, B, C -> (1 - 3 + 2) / 6
        assert_eq!(nonlinearity(&trace).unwrap(), 0.0);
    }

    #[test]
    fn report_bundles_all_measures() {
        let trace = trace_from_rows(4, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let r = DynamicsReport::from_trace(&trace).unwrap();
        assert_eq!(r.fluctuation, fluctuation(&trace).unwrap());
        assert_eq!(r.correlation, correlation(&trace).unwrap());
        assert_eq!(r.nonlinearity, nonlinearity(&trace).unwrap());
        assert_eq!(r.rms, rms_activation(&trace).unwrap());
        assert_eq!((r.n_steps, r.n_neurons), (4, 2));
    }

    #[test]
    fn degenerate_traces_are_rejected() {
        let one_step = trace_from_rows(1, 2, &[0.1, 0.2]);
        assert!(fluctuation(&one_step).is_err());
        assert!(correlation(&one_step).is_err());
        assert!(nonlinearity(&one_step).is_ok());
        let empty = trace_from_rows(0, 2, &[]);
        assert!(nonlinearity(&empty).is_err());
        assert!(rms_activation(&empty).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn measures_are_invariant_under_global_sign_flip(
            rows in 2usize..12,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut s = crate::prng::RngStream::new(seed);
            let v = DMatrix::from_fn(rows, cols, |_, _| s.uniform(-1.0, 1.0).unwrap());
            let trace = ActivationTrace::from_matrix(v.clone());
            let flipped = ActivationTrace::from_matrix(-v);
            prop_assert!((fluctuation(&trace).unwrap() - fluctuation(&flipped).unwrap()).abs() < 1e-12);
            prop_assert!((correlation(&trace).unwrap() - correlation(&flipped).unwrap()).abs() < 1e-12);
            prop_assert!((nonlinearity(&trace).unwrap() - nonlinearity(&flipped).unwrap()).abs() < 1e-12);
            prop_assert!((rms_activation(&trace).unwrap() - rms_activation(&flipped).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn measures_are_invariant_under_neuron_relabeling(
            rows in 2usize..12,
            cols in 2usize..6,
            seed in any::<u64>(),
        ) {
            let mut s = crate::prng::RngStream::new(seed);
            let v = DMatrix::from_fn(rows, cols, |_, _| s.uniform(-1.0, 1.0).unwrap());
            let mut perm: Vec<usize> = (0..cols).collect();
            s.shuffle(&mut perm).unwrap();
            let shuffled = DMatrix::from_fn(rows, cols, |r, c| v[(r, perm[c])]);
            let a = ActivationTrace::from_matrix(v);
            let b = ActivationTrace::from_matrix(shuffled);
            prop_assert!((fluctuation(&a).unwrap() - fluctuation(&b).unwrap()).abs() < 1e-12);
            prop_assert!((correlation(&a).unwrap() - correlation(&b).unwrap()).abs() < 1e-12);
            prop_assert!((nonlinearity(&a).unwrap() - nonlinearity(&b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn bounded_traces_give_bounded_measures(
            rows in 2usize..12,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut s = crate::prng::RngStream::new(seed);
            let v = DMatrix::from_fn(rows, cols, |_, _| s.uniform(-1.0, 1.0).unwrap());
            let trace = ActivationTrace::from_matrix(v);
            let f = fluctuation(&trace).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(correlation(&trace).unwrap().abs() <= 1.0 + 1e-12);
            prop_assert!(nonlinearity(&trace).unwrap().abs() <= 1.0);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&rms_activation(&trace).unwrap()));
        }
    }
}
