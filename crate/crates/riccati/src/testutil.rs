//! Shared helpers for unit tests: random instances and the
//! finite-difference oracle for the Euclidean gradient.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::FactorPoint;
use crate::objective::{cost, euclidean_gradient};
use crate::problem::ProblemData;

pub fn random_dense(rng: &mut impl Rng, nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, ncols, |_, _| rng.sample(StandardNormal))
}

/// Random full-rank problem; A is shifted by n*I so it stays well
/// conditioned (stability of -A is not needed for algebra checks).
pub fn random_problem(rng: &mut impl Rng, n: usize, p: usize, s: usize) -> ProblemData {
    let a = random_dense(rng, n, n) + DMatrix::identity(n, n) * (n as f64);
    let b = random_dense(rng, n, p);
    let c = random_dense(rng, s, n);
    ProblemData::new(a, b, c).unwrap()
}

pub fn random_factor(rng: &mut impl Rng, n: usize, r: usize) -> FactorPoint {
    loop {
        if let Ok(fp) = FactorPoint::new(random_dense(rng, n, r)) {
            return fp;
        }
    }
}

pub fn random_orthogonal(rng: &mut impl Rng, r: usize) -> DMatrix<f64> {
    let qr = random_dense(rng, r, r).qr();
    qr.q()
}

/// Worst relative mismatch between the analytic directional derivative
/// <Grad, Z> and central finite differences of the cost, over 5 random Z.
pub fn fd_gradient_check(p: &ProblemData, y: &FactorPoint, rng: &mut impl Rng) -> f64 {
    let g = euclidean_gradient(p, y);
    let scale = y.y().norm().max(1.0);
    let t = 1e-5 * scale;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let z = random_dense(rng, y.n(), y.rank());
        let yp = FactorPoint::new(y.y() + t * &z).unwrap();
        let ym = FactorPoint::new(y.y() - t * &z).unwrap();
        let fd = (cost(p, &yp) - cost(p, &ym)) / (2.0 * t);
        let analytic = g.dot(&z);
        let rel = (analytic - fd).abs() / analytic.abs().max(1e-8);
        worst = worst.max(rel);
    }
    worst
}
