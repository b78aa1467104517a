//! Solves the metric linear system A1 xi M1 + xi M2 = Z by the generalized
//! eigendecomposition of (M2, M1): with V^T M1 V = I, the system decouples
//! into r shifted SPD solves (A1 + lambda_i I) eta_i = (Z V)_i, xi = eta V^T.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, RiccatiError};
use crate::geometry::{MetricKind, MetricTerms};
use crate::problem::ProblemData;

/// One SPD factorization per shift of A1 + lambda_i I, dense at desk scale.
/// A1 stays available in factored form (AA^T operator + F M1 F^T) through
/// [`apply_a1`], so a sparse-factorization path can replace the dense one
/// behind the same interface.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    shifts: DVector<f64>,
    factorizations: Vec<Cholesky<f64, Dyn>>,
}

impl ShiftedSolver {
    /// Euclidean surrogate: A1 = I, all shifts 1, solves are scalar.
    pub fn euclidean(r: usize) -> Self {
        ShiftedSolver {
            shifts: DVector::from_element(r, 1.0),
            factorizations: Vec::new(),
        }
    }

    /// Builds the per-shift Cholesky cache for A1 = AA^T + F M1 F^T.
    pub fn tuned(
        p: &ProblemData,
        f: &DMatrix<f64>,
        m1: &DMatrix<f64>,
        shifts: &DVector<f64>,
    ) -> Result<Self> {
        if let Some(bad) = shifts.iter().copied().find(|s| *s <= 0.0) {
            return Err(RiccatiError::NonpositiveEigenvalue { eig: bad });
        }
        let n = p.n();
        let a1 = p.aat_dense() + f * m1 * f.transpose();
        let a1 = (&a1 + a1.transpose()) * 0.5;
        let mut factorizations = Vec::with_capacity(shifts.len());
        for &s in shifts.iter() {
            let shifted = &a1 + DMatrix::identity(n, n) * s;
            let chol = shifted
                .cholesky()
                .ok_or(RiccatiError::FactorizationFailed { shift: s })?;
            factorizations.push(chol);
        }
        Ok(ShiftedSolver {
            shifts: shifts.clone(),
            factorizations,
        })
    }

    pub fn shifts(&self) -> &DVector<f64> {
        &self.shifts
    }
}

/// A1 v = AA^T v + F (M1 (F^T v)), never forming A1 when A is sparse.
pub fn apply_a1(mt: &MetricTerms, p: &ProblemData, v: &DMatrix<f64>) -> DMatrix<f64> {
    match mt.kind {
        MetricKind::Euclidean => v.clone(),
        MetricKind::Tuned => {
            let aat_v = p.a_mul(&p.at_mul(v));
            if p.p() == 0 {
                aat_v
            } else {
                aat_v + &mt.f * (&mt.m1 * (mt.f.transpose() * v))
            }
        }
    }
}

/// Solves A1 xi M1 + xi M2 = Z for xi.
pub fn solve_metric_system(
    mt: &MetricTerms,
    _p: &ProblemData,
    z: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match mt.kind {
        // (I/2 + I/2) xi = Z
        MetricKind::Euclidean => Ok(z.clone()),
        MetricKind::Tuned => {
            let w = z * &mt.v;
            let mut eta = DMatrix::zeros(z.nrows(), z.ncols());
            for i in 0..z.ncols() {
                let col = w.column(i).into_owned();
                let sol = mt.solver.factorizations[i].solve(&col);
                eta.set_column(i, &sol);
            }
            Ok(eta * mt.v.transpose())
        }
    }
}
