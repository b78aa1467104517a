//! Small shared dense helpers.

use nalgebra::DMatrix;

/// Orthonormal basis of the column space: left singular vectors whose
/// singular value exceeds `tol` times the largest. May return fewer
/// columns than the input (or zero for a zero matrix).
pub fn orthonormal_columns(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let k = svd
        .singular_values
        .iter()
        .filter(|s| **s > tol * smax)
        .count();
    u.columns(0, k).into_owned()
}
