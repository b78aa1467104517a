//! Quotient geometry of rank-r PSD matrices parameterized as X = YY^T,
//! Y in R_*^{n x r}, modulo the O(r) action Y -> YO. The metric is
//! g(xi, zeta) = Trace(xi^T A1 zeta M1) + Trace(xi^T zeta M2) with
//! M1 = Y^T Y, A1 = AA^T + F M1 F^T (F = B B^T Y),
//! M2 = Y^T AA^T Y + N M1 N (N = Y^T B B^T Y).

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RiccatiError};
use crate::metric_solver::{apply_a1, solve_metric_system, ShiftedSolver};
use crate::objective::{euclidean_gradient, euclidean_gradient_derivative};
use crate::problem::ProblemData;

const RANK_TOL: f64 = 1e-12;

/// A point on the total space: Y with full column rank. X = YY^T.
/// Zero-column Y is allowed (the empty iterate of the rank-update scheme).
#[derive(Debug, Clone)]
pub struct FactorPoint {
    y: DMatrix<f64>,
}

impl FactorPoint {
    pub fn new(y: DMatrix<f64>) -> Result<Self> {
        if y.ncols() > 0 {
            let sv = y.singular_values();
            let smax = sv.max();
            if smax == 0.0 || sv.min() <= RANK_TOL * smax {
                return Err(RiccatiError::RankCollapse);
            }
        }
        Ok(FactorPoint { y })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn rank(&self) -> usize {
        self.y.ncols()
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    /// Dense X = YY^T (reports and desk-scale checks only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.y * self.y.transpose()
    }
}

/// Tangent vector at a point, in the total-space representation.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub xi: DMatrix<f64>,
    pub horizontal: bool,
}

impl TangentVector {
    pub fn new(xi: DMatrix<f64>) -> Self {
        TangentVector {
            xi,
            horizontal: false,
        }
    }
}

/// Which metric the geometry is built on. `Euclidean` is the untuned
/// baseline g(xi, zeta) = Trace(xi^T zeta), kept on the same code path by
/// the surrogate A1 = I, M1 = M2 = I/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Tuned,
    Euclidean,
}

/// Immutable per-point snapshot of the metric: M1, M2, the factored A1,
/// and the generalized eigendecomposition of (M2, M1).
#[derive(Debug, Clone)]
pub struct MetricTerms {
    pub kind: MetricKind,
    /// Y^T Y (or I/2 for the Euclidean surrogate).
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    /// F = B B^T Y, the low-rank part of A1 = AA^T + F M1 F^T.
    pub f: DMatrix<f64>,
    /// N = Y^T B B^T Y.
    pub n_coupling: DMatrix<f64>,
    /// V with V^T M1 V = I and M2 V = M1 V diag(lambda).
    pub v: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub solver: ShiftedSolver,
}

/// Generalized eigendecomposition of the SPD pencil (m2, m1):
/// returns (V, lambda) with V^T m1 V = I and m2 V = m1 V diag(lambda).
fn spd_generalized_eig(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let chol = m1
        .clone()
        .cholesky()
        .ok_or(RiccatiError::SingularMetric { eig: 0.0 })?;
    let l = chol.l();
    // S = L^{-1} m2 L^{-T}
    let mut s = m2.clone();
    l.solve_lower_triangular_mut(&mut s);
    let mut st = s.transpose();
    l.solve_lower_triangular_mut(&mut st);
    let s = (st.transpose() + &st) * 0.5;
    let eig = s.symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(RiccatiError::SingularMetric { eig: min_eig });
    }
    // V = L^{-T} Q, i.e. solve L^T V = Q
    let mut v = eig.eigenvectors.clone();
    l.tr_solve_lower_triangular_mut(&mut v);
    Ok((v, eig.eigenvalues))
}

/// Builds the metric snapshot at Y, including the shifted-solve cache.
pub fn build_metric_terms(
    p: &ProblemData,
    y: &FactorPoint,
    kind: MetricKind,
) -> Result<MetricTerms> {
    let r = y.rank();
    let n = p.n();
    match kind {
        MetricKind::Euclidean => {
            let m1 = DMatrix::identity(r, r) * 0.5;
            let m2 = DMatrix::identity(r, r) * 0.5;
            let v = DMatrix::identity(r, r) * 2.0_f64.sqrt();
            let lambda = DVector::from_element(r, 1.0);
            let solver = ShiftedSolver::euclidean(r);
            Ok(MetricTerms {
                kind,
                m1,
                m2,
                f: DMatrix::zeros(n, r),
                n_coupling: DMatrix::zeros(r, r),
                v,
                lambda,
                solver,
            })
        }
        MetricKind::Tuned => {
            let ym = y.y();
            let m1 = ym.transpose() * ym;
            let f = p.bbt_mul(ym);
            let n_coupling = ym.transpose() * &f;
            let aty = p.at_mul(ym);
            let m2 = aty.transpose() * &aty + &n_coupling * &m1 * &n_coupling;
            let m2 = (&m2 + m2.transpose()) * 0.5;
            let (v, lambda) = spd_generalized_eig(&m1, &m2)?;
            let solver = ShiftedSolver::tuned(p, &f, &m1, &lambda)?;
            Ok(MetricTerms {
                kind,
                m1,
                m2,
                f,
                n_coupling,
                v,
                lambda,
                solver,
            })
        }
    }
}

/// Metric inner product on raw n x r arrays.
pub fn inner_raw(mt: &MetricTerms, p: &ProblemData, xi: &DMatrix<f64>, zeta: &DMatrix<f64>) -> f64 {
    let a1_zeta = apply_a1(mt, p, zeta);
    xi.dot(&(a1_zeta * &mt.m1)) + xi.dot(&(zeta * &mt.m2))
}

/// g(xi, zeta) per the tuned metric (or the Euclidean surrogate).
pub fn inner(mt: &MetricTerms, p: &ProblemData, xi: &TangentVector, zeta: &TangentVector) -> f64 {
    inner_raw(mt, p, &xi.xi, &zeta.xi)
}

pub fn norm(mt: &MetricTerms, p: &ProblemData, xi: &TangentVector) -> f64 {
    inner(mt, p, xi, xi).max(0.0).sqrt()
}

fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Removes the vertical component Y Omega: Omega is the skew-symmetric
/// solution of skew(Y^T A1 Y Om M1 + Y^T Y Om M2) = skew(Y^T A1 xi M1 + Y^T xi M2),
/// solved by dense vectorization over the r(r-1)/2 skew basis.
pub fn project_horizontal(
    mt: &MetricTerms,
    p: &ProblemData,
    y: &FactorPoint,
    xi: &DMatrix<f64>,
) -> Result<TangentVector> {
    let r = y.rank();
    if r <= 1 {
        return Ok(TangentVector {
            xi: xi.clone(),
            horizontal: true,
        });
    }
    let ym = y.y();
    let a1y = apply_a1(mt, p, ym);
    let pmat = ym.transpose() * &a1y; // Y^T A1 Y
    let gmat = ym.transpose() * ym; // Y^T Y
    let a1xi = apply_a1(mt, p, xi);
    let rhs_mat = skew_part(&(ym.transpose() * &a1xi * &mt.m1 + ym.transpose() * xi * &mt.m2));

    let d = r * (r - 1) / 2;
    let mut basis = Vec::with_capacity(d);
    for i in 0..r {
        for j in (i + 1)..r {
            basis.push((i, j));
        }
    }
    let mut k = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (col, &(bi, bj)) in basis.iter().enumerate() {
        let mut om = DMatrix::zeros(r, r);
        om[(bi, bj)] = 1.0;
        om[(bj, bi)] = -1.0;
        let l = skew_part(&(&pmat * &om * &mt.m1 + &gmat * &om * &mt.m2));
        for (row, &(i, j)) in basis.iter().enumerate() {
            k[(row, col)] = l[(i, j)];
        }
    }
    for (row, &(i, j)) in basis.iter().enumerate() {
        rhs[row] = rhs_mat[(i, j)];
    }
    let omega_coords = k
        .lu()
        .solve(&rhs)
        .ok_or(RiccatiError::SingularProjection)?;
    let mut omega = DMatrix::zeros(r, r);
    for (idx, &(i, j)) in basis.iter().enumerate() {
        omega[(i, j)] = omega_coords[idx];
        omega[(j, i)] = -omega_coords[idx];
    }
    Ok(TangentVector {
        xi: xi - ym * omega,
        horizontal: true,
    })
}

/// Retraction R_Y(xi) = Y + xi on the open set of full-rank factors.
/// Rank collapse is an error; the trust-region loop shrinks the radius.
pub fn retract(y: &FactorPoint, xi: &TangentVector) -> Result<FactorPoint> {
    FactorPoint::new(y.y() + &xi.xi)
}

/// Riemannian gradient: solve A1 xi M1 + xi M2 = Grad_Y phi, then a safety
/// horizontal projection against round-off drift.
pub fn riemannian_gradient(
    p: &ProblemData,
    y: &FactorPoint,
    mt: &MetricTerms,
) -> Result<TangentVector> {
    let egrad = euclidean_gradient(p, y);
    let xi = solve_metric_system(mt, p, &egrad)?;
    project_horizontal(mt, p, y, &xi)
}

/// Hessian-vector operator: implicit differentiation of the gradient field
/// G(Y) defined by A1 G M1 + G M2 = EGrad, followed by horizontal
/// projection. Christoffel corrections are omitted; the operator agrees
/// with the Riemannian Hessian at critical points.
pub fn hessian_vector(
    p: &ProblemData,
    y: &FactorPoint,
    mt: &MetricTerms,
    xi: &TangentVector,
) -> Result<TangentVector> {
    let g = riemannian_gradient(p, y, mt)?;
    hessian_vector_with(p, y, mt, &g, xi)
}

/// Hessian-vector product reusing a precomputed Riemannian gradient.
pub fn hessian_vector_with(
    p: &ProblemData,
    y: &FactorPoint,
    mt: &MetricTerms,
    rgrad: &TangentVector,
    xi: &TangentVector,
) -> Result<TangentVector> {
    let ym = y.y();
    let z = &xi.xi;
    let degrad = euclidean_gradient_derivative(p, y, z);

    let rhs = match mt.kind {
        // constant metric: no derivative terms
        MetricKind::Euclidean => degrad,
        MetricKind::Tuned => {
            let g = &rgrad.xi;
            let dm1 = z.transpose() * ym + ym.transpose() * z;
            let df = p.bbt_mul(z);
            let dn = z.transpose() * &mt.f + mt.f.transpose() * z;
            let atz = p.at_mul(z);
            let aty = p.at_mul(ym);
            let dm2 = atz.transpose() * &aty
                + aty.transpose() * &atz
                + &dn * &mt.m1 * &mt.n_coupling
                + &mt.n_coupling * &dm1 * &mt.n_coupling
                + &mt.n_coupling * &mt.m1 * &dn;

            // DA1[xi] G = dF M1 F^T G + F dM1 F^T G + F M1 dF^T G
            let ftg = mt.f.transpose() * g;
            let da1_g = &df * (&mt.m1 * &ftg)
                + &mt.f * (&dm1 * &ftg)
                + &mt.f * (&mt.m1 * (df.transpose() * g));

            degrad - da1_g * &mt.m1 - apply_a1(mt, p, g) * &dm1 - g * &dm2
        }
    };
    let dg = solve_metric_system(mt, p, &rhs)?;
    project_horizontal(mt, p, y, &dg)
}

/// Residual of the horizontality condition, relative; used by tests and
/// the safety checks. Zero-column points are trivially horizontal.
pub fn horizontality_defect(
    mt: &MetricTerms,
    p: &ProblemData,
    y: &FactorPoint,
    xi: &DMatrix<f64>,
) -> f64 {
    if y.rank() == 0 {
        return 0.0;
    }
    let a1xi = apply_a1(mt, p, xi);
    let m = y.y().transpose() * &a1xi * &mt.m1 + y.y().transpose() * xi * &mt.m2;
    let sk = skew_part(&m);
    sk.norm() / m.norm().max(1e-300)
}
