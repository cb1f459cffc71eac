//! Principal component analysis of reservoir state clouds.
//!
//! [`fit_pca`] treats every recorded state vector as a point, centers the
//! cloud, and extracts an orthonormal component basis by SVD. Variances use
//! the population convention (divide by the point count) and are returned in
//! nonincreasing order; their sum equals the total centered variance. Two
//! determinism conventions are applied so identical clouds always give
//! bit-comparable models: components are sorted by variance (stable in the
//! SVD's output order) and each component is flipped so its
//! largest-magnitude entry is positive.
//!
//! [`separability_score`] quantifies how much class structure a projection
//! carries: it fits the same affine one-hot readout used for reservoir
//! training on the projected points and reports the training accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::readout::{self, StateMatrix, DEFAULT_RCOND};

/// Centered orthonormal component basis of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Column means of the fitted points.
    pub mean: DVector<f64>,
    /// `n x n` orthonormal matrix, one component per row, sorted by
    /// explained variance.
    pub components: DMatrix<f64>,
    /// Population variance captured by each component, nonincreasing.
    pub variances: DVector<f64>,
}

impl PcaModel {
    /// Number of feature dimensions.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits a PCA model to a `points x features` cloud (at least two points).
pub fn fit_pca(points: &DMatrix<f64>) -> Result<PcaModel> {
    let (p, n) = points.shape();
    if p < 2 || n == 0 {
        return Err(Error::invalid(format!("PCA needs at least two points, got {p}x{n}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PCA input contains non-finite values"));
    }
    let mean = DVector::from_fn(n, |j, _| points.column(j).sum() / p as f64);
    let mut centered = points.clone();
    for j in 0..n {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let mut pairs: Vec<(f64, DVector<f64>)> = if centered.amax() == 0.0 {
        // Degenerate cloud of identical points: any basis explains it.
        Vec::new()
    } else {
        let svd = nalgebra::SVD::try_new(centered, false, true, crate::readout::SVD_EPS, 10_000)
            .ok_or_else(|| Error::numeric("SVD did not converge during PCA"))?;
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        svd.singular_values
            .iter()
            .enumerate()
            .map(|(i, &s)| (s * s / p as f64, v_t.row(i).transpose()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Complete to a full orthonormal basis (rank-deficient clouds and the
    // points < features case leave room), assigning zero variance.
    let mut basis: Vec<DVector<f64>> = pairs.iter().map(|(_, v)| v.clone()).collect();
    let mut variances: Vec<f64> = pairs.iter().map(|(s, _)| *s).collect();
    let mut j = 0;
    while basis.len() < n {
        if j >= n {
            return Err(Error::numeric("failed to complete the PCA basis"));
        }
        let mut v = DVector::zeros(n);
        v[j] = 1.0;
        for b in &basis {
            let dot = b.dot(&v);
            v.axpy(-dot, b, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
            variances.push(0.0);
        }
        j += 1;
    }
    let mut components = DMatrix::zeros(n, n);
    for (r, b) in basis.iter().enumerate() {
        components.row_mut(r).copy_from(&b.transpose());
    }
    fix_component_signs(&mut components);
    Ok(PcaModel { mean, components, variances: DVector::from_vec(variances) })
}

/// Deterministic sign convention: each component's largest-magnitude entry
/// (first such entry on ties) is made positive.
fn fix_component_signs(components: &mut DMatrix<f64>) {
    for r in 0..components.nrows() {
        let row = components.row(r);
        let mut lead = 0;
        for c in 1..row.len() {
            if row[c].abs() > row[lead].abs() {
                lead = c;
            }
        }
        if row[lead] < 0.0 {
            components.row_mut(r).neg_mut();
        }
    }
}

/// Projects points onto the selected components (in the order given):
/// returns a `points x dims.len()` coordinate matrix.
pub fn project(model: &PcaModel, points: &DMatrix<f64>, dims: &[usize]) -> Result<DMatrix<f64>> {
    if points.ncols() != model.dim() {
        return Err(Error::invalid(format!(
            "points have {} features but the model was fitted on {}",
            points.ncols(),
            model.dim()
        )));
    }
    if dims.is_empty() {
        return Err(Error::invalid("projection needs at least one component index"));
    }
    if let Some(&bad) = dims.iter().find(|&&d| d >= model.dim()) {
        return Err(Error::invalid(format!("component index {bad} out of range for {} dims", model.dim())));
    }
    let mut out = DMatrix::zeros(points.nrows(), dims.len());
    for p in 0..points.nrows() {
        for (k, &d) in dims.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..model.dim() {
                acc += (points[(p, j)] - model.mean[j]) * model.components[(d, j)];
            }
            out[(p, k)] = acc;
        }
    }
    Ok(out)
}

/// Inverse of a full projection: maps `points x n` component coordinates
/// back to the original feature space.
pub fn reconstruct(model: &PcaModel, projected: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if projected.ncols() != model.dim() {
        return Err(Error::invalid(format!(
            "reconstruction needs all {} coordinates, got {}",
            model.dim(),
            projected.ncols()
        )));
    }
    let mut out = projected * &model.components;
    for j in 0..model.dim() {
        out.column_mut(j).add_scalar_mut(model.mean[j]);
    }
    Ok(out)
}

/// Training accuracy of an affine one-hot readout on the projected points —
/// how linearly separable the two classes are in this projection.
pub fn separability_score(projected: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("separability is defined for binary labels"));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::invalid("separability needs points from both classes"));
    }
    let states = StateMatrix::new(projected.clone(), labels.to_vec())?;
    let model = readout::fit(&states, 2, DEFAULT_RCOND)?;
    readout::evaluate(&model, &states)
}
