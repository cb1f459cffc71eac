//! One-shot trained affine readout.
//!
//! The readout never touches reservoir weights. Training collects one state
//! vector per episode, stacks them into a design matrix, appends a constant
//! ones column, and solves the one-hot least-squares problem
//! `[Y | 1] * W = Z` through the Moore-Penrose pseudoinverse (SVD with
//! singular values below `rcond * sigma_max` zeroed). Classification is the
//! argmax of the resulting class scores, ties resolved toward the lower
//! class index.
//!
//! State sampling follows the update timing of [`crate::reservoir::run`]:
//! episode `e` (of `E` episodes with `T` frames each) is represented by the
//! state one step *after* its last frame was consumed, i.e. the state
//! produced by update `(e + 1) * T + 1` (1-based), which has already folded
//! in the first frame of episode `e + 1`. The final episode only supplies
//! that one excitation frame and is never labeled, so `E` episodes yield
//! `E - 1` training rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{run, ActivationTrace};
use crate::tasks::Dataset;
use crate::topology::Reservoir;

/// Relative singular-value cutoff used when no explicit one is given.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Design matrix of per-episode states with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    /// One row per labeled episode.
    pub states: DMatrix<f64>,
    /// Class label of each row.
    pub labels: Vec<usize>,
}

impl StateMatrix {
    /// Bundles a design matrix with its row labels.
    pub fn new(states: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if states.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} state rows but {} labels",
                states.nrows(),
                labels.len()
            )));
        }
        Ok(StateMatrix { states, labels })
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when no rows are present.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Trained affine readout: class scores are `output_weights * y + biases`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// `classes x features` weight matrix.
    pub output_weights: DMatrix<f64>,
    /// Per-class offsets.
    pub biases: DVector<f64>,
}

impl ReadoutModel {
    /// Number of classes this model scores.
    pub fn class_count(&self) -> usize {
        self.biases.len()
    }

    /// Number of input features.
    pub fn feature_count(&self) -> usize {
        self.output_weights.ncols()
    }

    /// Serializes to a JSON document (weights as row-major nested arrays).
    pub fn to_json(&self) -> Result<String> {
        let doc = ReadoutDoc {
            output_weights: self.output_weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
            biases: self.biases.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Restores a model serialized with [`to_json`](Self::to_json).
    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ReadoutDoc = serde_json::from_str(json)?;
        let classes = doc.output_weights.len();
        if classes == 0 || doc.biases.len() != classes {
            return Err(Error::invalid("readout document has mismatched class counts"));
        }
        let features = doc.output_weights[0].len();
        if doc.output_weights.iter().any(|row| row.len() != features) {
            return Err(Error::invalid("readout weight rows have unequal lengths"));
        }
        let output_weights =
            DMatrix::from_fn(classes, features, |k, j| doc.output_weights[k][j]);
        Ok(ReadoutModel { output_weights, biases: DVector::from_vec(doc.biases) })
    }
}

/// On-disk JSON shape of a [`ReadoutModel`].
#[derive(Serialize, Deserialize)]
struct ReadoutDoc {
    output_weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

/// Runs the reservoir over the concatenated episodes and samples one state
/// row per labeled episode (see the module docs for the exact timing).
pub fn collect_states(res: &Reservoir, data: &Dataset) -> Result<StateMatrix> {
    Ok(collect_states_with_trace(res, data)?.0)
}

/// Like [`collect_states`], additionally returning the full driven trace the
/// states were sampled from (for dynamical measures on the same run).
pub fn collect_states_with_trace(res: &Reservoir, data: &Dataset) -> Result<(StateMatrix, ActivationTrace)> {
    let episodes = data.len();
    if episodes < 2 {
        return Err(Error::invalid("state collection needs at least two episodes"));
    }
    if data.channel_count != res.m() {
        return Err(Error::invalid(format!(
            "dataset supplies {} channels but the reservoir expects {}",
            data.channel_count,
            res.m()
        )));
    }
    let t = data.episode_steps;
    let n_steps = (episodes - 1) * t + 1;
    let frames = data.concat_frames();
    let trace = run(res, Some(&frames), n_steps)?;
    let mut states = DMatrix::zeros(episodes - 1, res.n());
    for e in 0..episodes - 1 {
        // Trace row (e + 1) * T is the state one update past episode e's end.
        states.row_mut(e).copy_from(&trace.values().row((e + 1) * t));
    }
    let labels = data.episodes[..episodes - 1].iter().map(|ep| ep.label).collect();
    Ok((StateMatrix { states, labels }, trace))
}

/// Deflation tolerance for the iterative SVD. At machine epsilon the
/// iteration can mis-converge on exactly rank-deficient inputs (the rounding
/// residue left on the bidiagonal core is never deflated, and the implicit
/// shift then converges to wrong factors). 1e-12 clears that residue and only
/// zeroes singular values far below any relative cutoff used here.
pub(crate) const SVD_EPS: f64 = 1e-12;

/// Moore-Penrose solve of `y * w = z` (thin SVD; singular values below
/// `rcond * sigma_max` are treated as exactly zero).
fn pinv_solve(y: &DMatrix<f64>, z: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    let svd = nalgebra::SVD::try_new(y.clone(), true, true, SVD_EPS, 10_000)
        .ok_or_else(|| Error::numeric("SVD did not converge"))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.amax();
    let threshold = rcond * sigma_max;
    let mut ut_z = u.transpose() * z;
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        let inv = if sigma > threshold && sigma > 0.0 { 1.0 / sigma } else { 0.0 };
        ut_z.row_mut(i).scale_mut(inv);
    }
    Ok(v_t.transpose() * ut_z)
}

fn fit_design_matrix(states: &DMatrix<f64>, labels: &[usize], classes: usize, rcond: f64) -> Result<ReadoutModel> {
    if states.nrows() == 0 {
        return Err(Error::invalid("cannot fit a readout on zero rows"));
    }
    if states.nrows() != labels.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", states.nrows(), labels.len())));
    }
    if classes < 2 {
        return Err(Error::invalid("readout needs at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    if !(rcond.is_finite() && (0.0..1.0).contains(&rcond)) {
        return Err(Error::invalid(format!("rcond must lie in [0, 1), got {rcond}")));
    }
    let rows = states.nrows();
    let features = states.ncols();
    // Design matrix with the constant bias column appended.
    let mut y_bias = DMatrix::zeros(rows, features + 1);
    y_bias.columns_mut(0, features).copy_from(states);
    y_bias.column_mut(features).fill(1.0);
    // One-hot targets.
    let mut z = DMatrix::zeros(rows, classes);
    for (r, &label) in labels.iter().enumerate() {
        z[(r, label)] = 1.0;
    }
    let w_bias = pinv_solve(&y_bias, &z, rcond)?;
    if w_bias.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("readout fit produced non-finite weights"));
    }
    Ok(ReadoutModel {
        output_weights: w_bias.rows(0, features).transpose(),
        biases: w_bias.row(features).transpose(),
    })
}

/// Fits the affine readout on collected reservoir states.
pub fn fit(states: &StateMatrix, classes: usize, rcond: f64) -> Result<ReadoutModel> {
    fit_design_matrix(&states.states, &states.labels, classes, rcond)
}

/// Fits the readout directly on raw input points (no reservoir in between):
/// the baseline showing which tasks are linearly separable to begin with.
pub fn fit_direct(points: &DMatrix<f64>, labels: &[usize], classes: usize, rcond: f64) -> Result<ReadoutModel> {
    fit_design_matrix(points, labels, classes, rcond)
}

/// Class scores for one feature vector.
pub fn scores(model: &ReadoutModel, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != model.feature_count() {
        return Err(Error::invalid(format!(
            "feature vector has {} entries but the model expects {}",
            y.len(),
            model.feature_count()
        )));
    }
    Ok(&model.output_weights * y + &model.biases)
}

/// Predicted class: argmax score, ties toward the lower class index.
pub fn predict(model: &ReadoutModel, y: &DVector<f64>) -> Result<usize> {
    let z = scores(model, y)?;
    let mut best = 0;
    for k in 1..z.len() {
        if z[k] > z[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Fraction of rows whose predicted class matches the label.
pub fn evaluate(model: &ReadoutModel, states: &StateMatrix) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::invalid("cannot evaluate on zero rows"));
    }
    let mut correct = 0usize;
    for (r, &label) in states.labels.iter().enumerate() {
        if predict(model, &states.states.row(r).transpose())? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / states.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::RngStream;
    use crate::tasks::{gen_line, TaskKind};
    use crate::topology::ReservoirParams;

    /// Ridge-regularized normal-equations solve, kept deliberately naive and
    /// independent of the SVD path: `(Y^T Y + ridge I) w = Y^T z` by Gaussian
    /// elimination with partial pivoting.
    fn ridge_oracle(y: &DMatrix<f64>, z: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
        let q = y.ncols();
        let mut gram = y.transpose() * y;
        for d in 0..q {
            gram[(d, d)] += ridge;
        }
        let rhs = y.transpose() * z;
        let mut solution = DMatrix::zeros(q, z.ncols());
        for col in 0..z.ncols() {
            let mut a = gram.clone();
            let mut b: Vec<f64> = (0..q).map(|r| rhs[(r, col)]).collect();
            for piv in 0..q {
                let best = (piv..q).max_by(|&r1, &r2| a[(r1, piv)].abs().total_cmp(&a[(r2, piv)].abs())).unwrap();
                a.swap_rows(piv, best);
                b.swap(piv, best);
                for r in piv + 1..q {
                    let f = a[(r, piv)] / a[(piv, piv)];
                    for c in piv..q {
                        let upper = a[(piv, c)];
                        a[(r, c)] -= f * upper;
                    }
                    b[r] -= f * b[piv];
                }
            }
            for r in (0..q).rev() {
                let mut acc = b[r];
                for c in r + 1..q {
                    acc -= a[(r, c)] * solution[(c, col)];
                }
                solution[(r, col)] = acc / a[(r, r)];
            }
        }
        solution
    }

    fn random_design(rows: usize, cols: usize, stream: &mut RngStream) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| stream.normal(0.0, 1.0).unwrap())
    }

    #[test]
    fn fit_matches_the_normal_equations_oracle_on_a_tiny_case() {
        let states = StateMatrix::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
            vec![0, 1, 0],
        )
        .unwrap();
        let model = fit(&states, 2, DEFAULT_RCOND).unwrap();
        let mut y_bias = DMatrix::zeros(3, 3);
        y_bias.columns_mut(0, 2).copy_from(&states.states);
        y_bias.column_mut(2).fill(1.0);
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let oracle = ridge_oracle(&y_bias, &z, 1e-12);
        for k in 0..2 {
            for j in 0..2 {
                assert!((model.output_weights[(k, j)] - oracle[(j, k)]).abs() < 1e-6);
            }
            assert!((model.biases[k] - oracle[(2, k)]).abs() < 1e-6);
        }
    }

    #[test]
    fn underdetermined_fits_recover_training_labels_exactly() {
        // Fewer rows than features + 1: the system is consistent, so scores
        // reproduce the one-hot targets and training accuracy is 1.
        let mut stream = RngStream::new(40);
        let states = StateMatrix::new(random_design(6, 10, &mut stream), vec![0, 1, 2, 0, 1, 2]).unwrap();
        let model = fit(&states, 3, DEFAULT_RCOND).unwrap();
        for (r, &label) in states.labels.iter().enumerate() {
            let z = scores(&model, &states.states.row(r).transpose()).unwrap();
            for k in 0..3 {
                let target = if k == label { 1.0 } else { 0.0 };
                assert!((z[k] - target).abs() < 1e-8, "row {r} class {k}: {}", z[k]);
            }
        }
        assert_eq!(evaluate(&model, &states).unwrap(), 1.0);
    }

    #[test]
    fn fit_is_invariant_to_row_order() {
        let mut stream = RngStream::new(41);
        let states = random_design(50, 5, &mut stream);
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let model = fit_design_matrix(&states, &labels, 3, DEFAULT_RCOND).unwrap();
        // Reverse the rows: same least-squares problem, same solution.
        let mut rev = DMatrix::zeros(50, 5);
        for r in 0..50 {
            rev.row_mut(r).copy_from(&states.row(49 - r));
        }
        let rev_labels: Vec<usize> = labels.iter().rev().copied().collect();
        let permuted = fit_design_matrix(&rev, &rev_labels, 3, DEFAULT_RCOND).unwrap();
        assert!((&model.output_weights - &permuted.output_weights).amax() < 1e-8);
        assert!((&model.biases - &permuted.biases).amax() < 1e-8);
    }

    #[test]
    fn rank_deficient_designs_are_handled_by_the_cutoff() {
        // Duplicate column: naive normal equations would be singular, the
        // pseudoinverse must still return finite weights.
        let mut stream = RngStream::new(42);
        let mut states = random_design(30, 4, &mut stream);
        let dup = states.column(0).clone_owned();
        states.column_mut(3).copy_from(&dup);
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let model = fit_design_matrix(&states, &labels, 2, DEFAULT_RCOND).unwrap();
        assert!(model.output_weights.iter().all(|v| v.is_finite()));
        // The duplicated columns receive identical weight (minimum-norm tie).
        for k in 0..2 {
            assert!((model.output_weights[(k, 0)] - model.output_weights[(k, 3)]).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_rows_fit_the_label_frequencies() {
        // A reservoir that ignores its input replays one state for every
        // episode, so the whole design matrix is a single repeated row (rank
        // one including the bias column). The minimum-norm least-squares fit
        // then scores that state at the class frequencies.
        let mut stream = RngStream::new(49);
        let row = random_design(1, 4, &mut stream);
        let mut states = DMatrix::zeros(24, 4);
        for r in 0..24 {
            states.row_mut(r).copy_from(&row.row(0));
        }
        let labels: Vec<usize> = (0..24).map(|i| usize::from(i % 8 < 5)).collect();
        let model = fit_design_matrix(&states, &labels, 2, DEFAULT_RCOND).unwrap();
        assert!(model.output_weights.iter().all(|v| v.is_finite()));
        let z = scores(&model, &row.row(0).transpose()).unwrap();
        assert!((z[0] - 3.0 / 8.0).abs() < 1e-8, "class 0 score {}", z[0]);
        assert!((z[1] - 5.0 / 8.0).abs() < 1e-8, "class 1 score {}", z[1]);
    }

    #[test]
    fn perturbing_the_solution_never_reduces_the_residual() {
        let mut stream = RngStream::new(43);
        let states = random_design(40, 6, &mut stream);
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let model = fit_design_matrix(&states, &labels, 2, DEFAULT_RCOND).unwrap();
        let mut y_bias = DMatrix::zeros(40, 7);
        y_bias.columns_mut(0, 6).copy_from(&states);
        y_bias.column_mut(6).fill(1.0);
        let mut z = DMatrix::zeros(40, 2);
        for (r, &l) in labels.iter().enumerate() {
            z[(r, l)] = 1.0;
        }
        let mut w = DMatrix::zeros(7, 2);
        w.rows_mut(0, 6).copy_from(&model.output_weights.transpose());
        w.row_mut(6).copy_from(&model.biases.transpose());
        let base = (&y_bias * &w - &z).norm();
        for _ in 0..100 {
            let noise = DMatrix::from_fn(7, 2, |_, _| stream.uniform(-1e-3, 1e-3).unwrap());
            let perturbed = (&y_bias * (&w + noise) - &z).norm();
            assert!(perturbed >= base - 1e-12, "residual dropped: {perturbed} < {base}");
        }
    }

    #[test]
    fn state_sampling_timing_matches_a_manual_run() {
        // Two 6-frame episodes yield exactly one row: the state after update
        // 7, which consumed the first frame of episode 1.
        let params = ReservoirParams::new(5, 2, 0.5, 0.0);
        let res = Reservoir::sample(&params, &RngStream::new(44)).unwrap();
        let data = gen_line(2, 6, &RngStream::new(45)).unwrap();
        let collected = collect_states(&res, &data).unwrap();
        assert_eq!(collected.states.nrows(), 1);
        assert_eq!(collected.labels, vec![data.episodes[0].label]);
        let trace = run(&res, Some(&data.concat_frames()), 7).unwrap();
        assert_eq!(collected.states.row(0).transpose(), trace.state_at(6));
    }

    #[test]
    fn collected_rows_track_episode_count_and_labels() {
        let params = ReservoirParams::new(6, 2, 0.3, 0.0);
        let res = Reservoir::sample(&params, &RngStream::new(46)).unwrap();
        let data = gen_line(40, 6, &RngStream::new(47)).unwrap();
        let (states, trace) = collect_states_with_trace(&res, &data).unwrap();
        assert_eq!(states.states.shape(), (39, 6));
        assert_eq!(states.labels, data.labels()[..39]);
        assert_eq!(trace.n_steps(), 39 * 6 + 1);
        // Spot-check an interior episode against the trace.
        assert_eq!(states.states.row(10).transpose(), trace.state_at(11 * 6));
    }

    #[test]
    fn random_models_score_at_chance() {
        let mut stream = RngStream::new(48);
        let model = ReadoutModel {
            output_weights: random_design(3, 8, &mut stream),
            biases: DVector::from_fn(3, |_, _| stream.normal(0.0, 1.0).unwrap()),
        };
        let rows = 10_000;
        let states = StateMatrix::new(
            random_design(rows, 8, &mut stream),
            (0..rows).map(|i| i % 3).collect(),
        )
        .unwrap();
        let acc = evaluate(&model, &states).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 0.02, "chance accuracy {acc}");
    }

    #[test]
    fn argmax_ties_resolve_to_the_lower_class() {
        let model = ReadoutModel { output_weights: DMatrix::zeros(3, 2), biases: DVector::zeros(3) };
        assert_eq!(predict(&model, &DVector::from_vec(vec![0.3, -0.4])).unwrap(), 0);
        let biased = ReadoutModel {
            output_weights: DMatrix::zeros(3, 2),
            biases: DVector::from_vec(vec![0.1, 0.7, 0.7]),
        };
        assert_eq!(predict(&biased, &DVector::zeros(2)).unwrap(), 1);
    }

    #[test]
    fn direct_fit_separates_the_line_task() {
        let stream = RngStream::new(49);
        let instance = TaskKind::Line.instantiate(1, &stream).unwrap();
        let train = instance.generate(1000, &stream.derive("task-train")).unwrap();
        let test = instance.generate(1000, &stream.derive("task-test")).unwrap();
        let model = fit_direct(&train.episode_points().unwrap(), &train.labels(), 2, DEFAULT_RCOND).unwrap();
        let held_out = StateMatrix::new(test.episode_points().unwrap(), test.labels()).unwrap();
        let acc = evaluate(&model, &held_out).unwrap();
        assert!(acc > 0.9, "line accuracy {acc}");
    }

    #[test]
    fn invalid_fit_inputs_are_rejected() {
        let states = StateMatrix::new(DMatrix::zeros(4, 3), vec![0, 1, 0, 1]).unwrap();
        assert!(fit(&states, 1, DEFAULT_RCOND).is_err(), "single class");
        assert!(fit(&states, 2, 1.5).is_err(), "rcond out of range");
        assert!(fit(&states, 2, -0.1).is_err(), "negative rcond");
        let bad = StateMatrix::new(DMatrix::zeros(2, 3), vec![0, 5]).unwrap();
        assert!(fit(&bad, 2, DEFAULT_RCOND).is_err(), "label out of range");
        assert!(StateMatrix::new(DMatrix::zeros(2, 3), vec![0]).is_err(), "row/label mismatch");
        let model = fit(&states, 2, DEFAULT_RCOND).unwrap();
        assert!(scores(&model, &DVector::zeros(5)).is_err(), "feature mismatch");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut stream = RngStream::new(31);
        let states = StateMatrix::new(
            DMatrix::from_fn(40, 6, |_, _| stream.uniform(-1.0, 1.0).unwrap()),
            (0..40).map(|i| i % 3).collect(),
        )
        .unwrap();
        let model = fit(&states, 3, DEFAULT_RCOND).unwrap();
        let restored = ReadoutModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(restored, model, "every weight bit must survive");
        assert!(ReadoutModel::from_json("{\"output_weights\": [], \"biases\": []}").is_err());
        assert!(ReadoutModel::from_json("{\"output_weights\": [[1.0], [2.0, 3.0]], \"biases\": [0.0, 0.0]}").is_err());
    }
}
