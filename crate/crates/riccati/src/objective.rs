//! Residual, cost and Euclidean derivatives of
//! phi(Y) = (1/4) ||A^T YY^T + YY^T A + YY^T B B^T YY^T - C^T C||_F^2,
//! all evaluated in low-rank factored form. No n x n matrix is formed here.

use nalgebra::DMatrix;

use crate::error::{Result, RiccatiError};
use crate::geometry::FactorPoint;
use crate::problem::ProblemData;

/// The residual R(YY^T) stored as U N U^T with U = [A^T Y, Y, C^T] and a
/// small symmetric coupling N of size (2r+s) x (2r+s).
#[derive(Debug, Clone)]
pub struct FactoredResidual {
    u: DMatrix<f64>,
    coupling: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl FactoredResidual {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// R · v through the factors: U (N (U^T v)).
    pub fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.u * (&self.coupling * (self.u.transpose() * v))
    }

    /// ||R||_F^2 = Trace(N G N G) with G = U^T U. Clamped at zero: the
    /// trace cancels to round-off noise near an exact solution.
    pub fn norm_sq(&self) -> f64 {
        let ng = &self.coupling * &self.gram;
        (&ng * &ng).trace().max(0.0)
    }

    /// Dense reconstruction, for small-n verification only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * &self.coupling * self.u.transpose()
    }
}

/// Builds the factored residual at X = YY^T.
pub fn residual_factored(p: &ProblemData, y: &FactorPoint) -> FactoredResidual {
    let ym = y.y();
    let n = p.n();
    let r = ym.ncols();
    let s = p.s();
    let m = 2 * r + s;

    let aty = p.at_mul(ym);
    let mut u = DMatrix::zeros(n, m);
    u.columns_mut(0, r).copy_from(&aty);
    u.columns_mut(r, r).copy_from(ym);
    u.columns_mut(2 * r, s).copy_from(&p.c().transpose());

    // N = [[0, I, 0], [I, Y^T B B^T Y, 0], [0, 0, -I]]
    let mut coupling = DMatrix::zeros(m, m);
    for i in 0..r {
        coupling[(i, r + i)] = 1.0;
        coupling[(r + i, i)] = 1.0;
    }
    let ybbty = ym.transpose() * p.bbt_mul(ym);
    coupling
        .view_mut((r, r), (r, r))
        .copy_from(&ybbty);
    for i in 0..s {
        coupling[(2 * r + i, 2 * r + i)] = -1.0;
    }

    let gram = u.transpose() * &u;
    FactoredResidual { u, coupling, gram }
}

/// (1/4) ||R(YY^T)||_F^2.
pub fn cost(p: &ProblemData, y: &FactorPoint) -> f64 {
    0.25 * residual_factored(p, y).norm_sq()
}

/// ||R||_F / ||C^T C||_F.
pub fn relative_residual(p: &ProblemData, y: &FactorPoint) -> Result<f64> {
    let denom = p.ctc_norm();
    if denom == 0.0 {
        return Err(RiccatiError::ZeroRightHandSide);
    }
    Ok(residual_factored(p, y).norm_sq().sqrt() / denom)
}

/// Euclidean gradient of phi with respect to Y:
/// Grad_Y = (A R + R A^T + B B^T X R + R X B B^T) Y with X = YY^T.
pub fn euclidean_gradient(p: &ProblemData, y: &FactorPoint) -> DMatrix<f64> {
    let fr = residual_factored(p, y);
    euclidean_gradient_with(p, y, &fr)
}

/// Same as [`euclidean_gradient`] reusing a precomputed residual.
pub fn euclidean_gradient_with(
    p: &ProblemData,
    y: &FactorPoint,
    fr: &FactoredResidual,
) -> DMatrix<f64> {
    let ym = y.y();
    let ry = fr.apply(ym);
    let t1 = p.a_mul(&ry);
    let aty = p.at_mul(ym);
    let t2 = fr.apply(&aty);
    let t3 = p.bbt_mul(&(ym * (ym.transpose() * &ry)));
    let bbty = p.bbt_mul(ym);
    let t4 = fr.apply(&(ym * (ym.transpose() * &bbty)));
    t1 + t2 + t3 + t4
}

/// Directional derivative of the Euclidean gradient along Z, by product-rule
/// expansion. Linear in Z.
pub fn euclidean_gradient_derivative(
    p: &ProblemData,
    y: &FactorPoint,
    z: &DMatrix<f64>,
) -> DMatrix<f64> {
    let ym = y.y();
    let fr = residual_factored(p, y);

    let x_mul = |v: &DMatrix<f64>| ym * (ym.transpose() * v);
    let dx_mul = |v: &DMatrix<f64>| z * (ym.transpose() * v) + ym * (z.transpose() * v);
    // dR v = A^T (dX v) + dX (A v) + dX (B B^T X v) + X (B B^T dX v)
    let dr_mul = |v: &DMatrix<f64>| {
        p.at_mul(&dx_mul(v))
            + dx_mul(&p.a_mul(v))
            + dx_mul(&p.bbt_mul(&x_mul(v)))
            + x_mul(&p.bbt_mul(&dx_mul(v)))
    };

    let bbty = p.bbt_mul(ym);
    let aty = p.at_mul(ym);
    let ry = fr.apply(ym);
    let dry = dr_mul(ym);

    // dG·Y with G = A R + R A^T + B B^T X R + R X B B^T
    let dg_y = p.a_mul(&dry)
        + dr_mul(&aty)
        + p.bbt_mul(&dx_mul(&ry))
        + p.bbt_mul(&x_mul(&dry))
        + dr_mul(&x_mul(&bbty))
        + fr.apply(&dx_mul(&bbty));

    // G·Z
    let rz = fr.apply(z);
    let g_z = p.a_mul(&rz)
        + fr.apply(&p.at_mul(z))
        + p.bbt_mul(&x_mul(&rz))
        + fr.apply(&x_mul(&p.bbt_mul(z)));

    dg_y + g_z
}
