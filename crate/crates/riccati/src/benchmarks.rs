//! Benchmark problem families and a dense small-scale Riccati oracle.
//!
//! The built-in families produce instances with `-A` stable so the
//! stabilizing solution of `A^T X + X A + X B B^T X = C^T C` exists. The
//! dense oracle is for testing and residual-vs-rank comparisons only; it
//! materializes n x n matrices and is limited to desk scale.

use nalgebra::DMatrix;

use crate::error::{Result, RiccatiError};
use crate::linalg::orthonormal_columns;
use crate::problem::ProblemData;

/// Built-in problem families.
///
/// `Heat` is the 1-D heat-equation discretization with Dirichlet boundary:
/// tridiag(-1, 2, -1). The `Lin*Like` families are surrogates for examples
/// whose exact data lives in an external benchmark collection; they keep
/// the qualitative structure (nonnormal / graded-diagonal A with positive
/// spectrum) but are not the original matrices — see
/// [`Family::provenance_caveat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Heat,
    Lin71Like,
    Lin73Like,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(Family::Heat),
            "lin-7-1-like" => Ok(Family::Lin71Like),
            "lin-7-3-like" => Ok(Family::Lin73Like),
            other => Err(RiccatiError::UnknownFamily(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Heat => "heat",
            Family::Lin71Like => "lin-7-1-like",
            Family::Lin73Like => "lin-7-3-like",
        }
    }

    /// Non-`None` for families that are surrogates rather than faithful
    /// reproductions of the benchmark set they are named after.
    pub fn provenance_caveat(&self) -> Option<&'static str> {
        match self {
            Family::Heat => None,
            Family::Lin71Like | Family::Lin73Like => Some(
                "surrogate family: graded-diagonal stand-in for an external \
                 benchmark example, not the original data",
            ),
        }
    }
}

/// Parameters for [`generate`]. `b_cols` and `c_rows` control the default
/// rank-one-per-column all-ones inputs/outputs.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub family: Family,
    pub n: usize,
    pub b_cols: usize,
    pub c_rows: usize,
}

impl BenchmarkSpec {
    pub fn new(family: Family, n: usize) -> Self {
        BenchmarkSpec {
            family,
            n,
            b_cols: 1,
            c_rows: 1,
        }
    }
}

fn tridiagonal(n: usize, sub: f64, diag: impl Fn(usize) -> f64, sup: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = diag(i);
        if i + 1 < n {
            a[(i, i + 1)] = sup;
            a[(i + 1, i)] = sub;
        }
    }
    a
}

/// Generates a problem instance. B is n x b_cols all ones, C is c_rows x n
/// all ones, both scaled by 1/sqrt(n).
pub fn generate(spec: &BenchmarkSpec) -> Result<ProblemData> {
    let n = spec.n;
    if n < 2 {
        return Err(RiccatiError::InvalidConfig(
            "benchmark families need n >= 2".into(),
        ));
    }
    let a = match spec.family {
        Family::Heat => tridiagonal(n, -1.0, |_| 2.0, -1.0),
        // graded diagonal, symmetric tridiagonal coupling
        Family::Lin71Like => {
            tridiagonal(n, -1.0, |i| 2.0 + (i + 1) as f64 / n as f64, -1.0)
        }
        // nonsymmetric: lower-bidiagonal, spectrum = graded diagonal > 0
        Family::Lin73Like => {
            tridiagonal(n, -0.5, |i| 1.0 + 3.0 * (i + 1) as f64 / n as f64, 0.0)
        }
    };
    let scale = 1.0 / (n as f64).sqrt();
    let b = DMatrix::from_element(n, spec.b_cols, scale);
    let c = DMatrix::from_element(spec.c_rows, n, scale);
    ProblemData::new(a, b, c)
}

/// Dense residual A^T X + X A + X B B^T X - C^T C for symmetric X.
/// Test/oracle use only.
pub fn dense_residual(p: &ProblemData, x: &DMatrix<f64>) -> DMatrix<f64> {
    let atx = p.at_mul(x);
    &atx + atx.transpose() + x * p.bbt_mul(x) - p.c().transpose() * p.c()
}

/// ||dense residual||_F / ||C^T C||_F.
pub fn dense_relative_residual(p: &ProblemData, x: &DMatrix<f64>) -> Result<f64> {
    let denom = p.ctc_norm();
    if denom == 0.0 {
        return Err(RiccatiError::ZeroRightHandSide);
    }
    Ok(dense_residual(p, x).norm() / denom)
}

const SIGN_MAX_ITERS: usize = 100;
const SIGN_TOL: f64 = 1e-13;
const ORACLE_RESIDUAL_TOL: f64 = 1e-8;

/// Stabilizing solution of A^T X + X A + X B B^T X = C^T C by the matrix
/// sign function of the Hamiltonian H = [[-A, -BB^T], [-C^T C, A^T]]: the
/// stable invariant subspace [U1; U2] of H gives X = U2 U1^{-1}. Newton
/// iteration Z <- (mu Z + (mu Z)^{-1}) / 2 with Frobenius-norm scaling.
/// Desk scale (n <= a few hundred); errors if no n-dimensional stable
/// subspace exists or the residual check fails.
pub fn solve_dense_care(p: &ProblemData) -> Result<DMatrix<f64>> {
    let n = p.n();
    let ad = p.a().to_dense();
    let bbt = p.bbt_mul(&DMatrix::identity(n, n));
    let ctc = p.c().transpose() * p.c();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(-&ad));
    h.view_mut((0, n), (n, n)).copy_from(&(-&bbt));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&ctc));
    h.view_mut((n, n), (n, n)).copy_from(&ad.transpose());

    let mut z = h;
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITERS {
        let z_inv = z.clone().try_inverse().ok_or_else(|| {
            RiccatiError::DenseSolve("Hamiltonian iterate is singular".into())
        })?;
        let mu = (z_inv.norm() / z.norm()).sqrt();
        let next = (&z * mu + z_inv / mu) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if delta <= SIGN_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(RiccatiError::DenseSolve(
            "sign-function iteration did not converge".into(),
        ));
    }

    // The stable subspace is ker(sign(H) + I); check it has dimension n,
    // then solve (W + I) [I; X] = 0 for X as an overdetermined least-
    // squares system in the blocks of W.
    let w = z + DMatrix::identity(2 * n, 2 * n);
    let range = orthonormal_columns(&w, 1e-8);
    if range.ncols() != n {
        return Err(RiccatiError::DenseSolve(format!(
            "stable invariant subspace has dimension {} (expected {})",
            2 * n - range.ncols(),
            n
        )));
    }
    let lhs = w.view((0, n), (2 * n, n)).into_owned();
    let rhs = -w.view((0, 0), (2 * n, n)).into_owned();
    let x = lhs
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|m| RiccatiError::DenseSolve(m.to_string()))?;
    let x = (&x + x.transpose()) * 0.5;

    let rel = dense_relative_residual(p, &x)?;
    if rel > ORACLE_RESIDUAL_TOL {
        return Err(RiccatiError::DenseSolve(format!(
            "oracle residual {rel:.3e} exceeds {ORACLE_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok(x)
}

/// Relative residuals of the best rank-k PSD truncations of `x_dense`
/// (truncated symmetric eigendecomposition, negative eigenvalues dropped),
/// for k = 1..=max_rank. Residuals are reported even when nonmonotone.
pub fn truncated_rank_residuals(
    p: &ProblemData,
    x_dense: &DMatrix<f64>,
    max_rank: usize,
) -> Result<Vec<(usize, f64)>> {
    let sym = (x_dense + x_dense.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let n = p.n();
    let mut xk = DMatrix::zeros(n, n);
    let mut out = Vec::with_capacity(max_rank);
    for k in 1..=max_rank.min(n) {
        let idx = order[k - 1];
        let lambda = eig.eigenvalues[idx].max(0.0);
        let v = eig.eigenvectors.column(idx);
        xk += (&v * v.transpose()) * lambda;
        out.push((k, dense_relative_residual(p, &xk)?));
    }
    Ok(out)
}
