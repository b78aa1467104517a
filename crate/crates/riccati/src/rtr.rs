//! Riemannian trust-region method for the fixed-rank problem, with a
//! truncated-CG subproblem solver. All model inner products are taken in
//! the point's metric, so CG is implicitly preconditioned by it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, RiccatiError};
use crate::geometry::{
    build_metric_terms, hessian_vector_with, inner_raw, norm, project_horizontal, retract,
    riemannian_gradient, FactorPoint, MetricKind, TangentVector,
};
use crate::objective::{cost, relative_residual};
use crate::problem::{ProblemData, SolverConfig};

/// Why truncated CG stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TcgStop {
    NegativeCurvature,
    ExceededRadius,
    Converged,
    MaxInner,
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrStop {
    GradTolReached,
    ResidualTolReached,
    MaxOuterReached,
    RadiusUnderflow,
}

/// One outer iteration, as streamed to the CLI.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub delta: f64,
    pub rho: f64,
    pub inner_iters: usize,
    pub accepted: bool,
    pub tcg_stop: TcgStop,
    /// Cumulative Hessian-operator applications after this iteration.
    pub hessian_applies: usize,
}

#[derive(Debug, Clone)]
pub struct TrustRegionState {
    pub delta: f64,
    pub delta_max: f64,
    pub grad_norm: f64,
    pub outer_iter: usize,
    pub stats: Vec<IterRecord>,
    pub hessian_applies: usize,
    pub stop: TrStop,
    pub final_cost: f64,
}

const INITIAL_DELTA: f64 = 1.0;
const DELTA_MAX: f64 = 1024.0; // 2^10
const RHO_ACCEPT: f64 = 0.1;
const SHRINK: f64 = 0.25;
const EXPAND: f64 = 2.0;
const RHO_EXPAND: f64 = 0.75;
const DELTA_UNDERFLOW: f64 = 1e-14;
const TCG_KAPPA: f64 = 0.1;
const TCG_THETA: f64 = 1.0;

/// Minimizes the quadratic model
/// m(eta) = phi + g(grad, eta) + (1/2) g(H eta, eta) within ||eta|| <= delta
/// by the Steihaug-Toint truncated-CG scheme, stopping superlinearly
/// (||r_k|| <= ||r_0|| min(kappa, ||r_0||^theta) with kappa = 0.1, theta = 1).
///
/// Returns (eta, H eta, stop reason, inner iterations, hessian applications).
pub fn truncated_cg<H>(
    mt: &crate::geometry::MetricTerms,
    p: &ProblemData,
    grad: &TangentVector,
    mut hess: H,
    delta: f64,
    max_inner: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, TcgStop, usize, usize)>
where
    H: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let g = |a: &DMatrix<f64>, b: &DMatrix<f64>| inner_raw(mt, p, a, b);
    let (nr, nc) = (grad.xi.nrows(), grad.xi.ncols());
    let mut eta = DMatrix::zeros(nr, nc);
    let mut h_eta = DMatrix::zeros(nr, nc);
    let mut r = grad.xi.clone();
    let mut rr = g(&r, &r);
    let r0_norm = rr.sqrt();
    let stop_tol = r0_norm * TCG_KAPPA.min(r0_norm.powf(TCG_THETA));
    let mut d = -&r;
    let mut eta_sq = 0.0;
    let mut applies = 0;

    let boundary_tau = |eta: &DMatrix<f64>, d: &DMatrix<f64>, eta_sq: f64| -> f64 {
        let b = g(eta, d);
        let dd = g(d, d);
        ((b * b + dd * (delta * delta - eta_sq)).sqrt() - b) / dd
    };

    for k in 0..max_inner {
        let hd = hess(&d)?;
        applies += 1;
        let d_hd = g(&d, &hd);
        if d_hd <= 0.0 {
            let tau = boundary_tau(&eta, &d, eta_sq);
            return Ok((
                eta + tau * &d,
                h_eta + tau * &hd,
                TcgStop::NegativeCurvature,
                k + 1,
                applies,
            ));
        }
        let alpha = rr / d_hd;
        let eta_next_sq = eta_sq + 2.0 * alpha * g(&eta, &d) + alpha * alpha * g(&d, &d);
        if eta_next_sq.sqrt() >= delta {
            let tau = boundary_tau(&eta, &d, eta_sq);
            return Ok((
                eta + tau * &d,
                h_eta + tau * &hd,
                TcgStop::ExceededRadius,
                k + 1,
                applies,
            ));
        }
        eta += alpha * &d;
        h_eta += alpha * &hd;
        eta_sq = eta_next_sq;
        r += alpha * &hd;
        let rr_next = g(&r, &r);
        if rr_next.sqrt() <= stop_tol {
            return Ok((eta, h_eta, TcgStop::Converged, k + 1, applies));
        }
        let beta = rr_next / rr;
        d = -&r + beta * &d;
        rr = rr_next;
    }
    Ok((eta, h_eta, TcgStop::MaxInner, max_inner, applies))
}

/// Runs the trust-region outer loop at fixed rank until the Riemannian
/// gradient norm drops below `cfg.tol_grad`, the relative residual drops
/// below `cfg.tol_residual`, or iteration/radius limits hit.
pub fn minimize_fixed_rank(
    p: &ProblemData,
    y0: &FactorPoint,
    cfg: &SolverConfig,
    kind: MetricKind,
) -> Result<(FactorPoint, TrustRegionState)> {
    let mut y = y0.clone();
    let mut delta = INITIAL_DELTA;
    let mut stats = Vec::new();
    let mut applies_total = 0;
    let mut stop = TrStop::MaxOuterReached;
    let mut grad_norm = f64::NAN;
    let mut current_cost = cost(p, &y);
    let mut outer = 0;

    while outer < cfg.max_outer {
        let mt = build_metric_terms(p, &y, kind)?;
        let grad = riemannian_gradient(p, &y, &mt)?;
        grad_norm = norm(&mt, p, &grad);
        if grad_norm < cfg.tol_grad {
            stop = TrStop::GradTolReached;
            break;
        }
        if relative_residual(p, &y)? < cfg.tol_residual {
            stop = TrStop::ResidualTolReached;
            break;
        }

        let (eta, h_eta, tcg_stop, inner_iters, applies) = truncated_cg(
            &mt,
            p,
            &grad,
            |v| {
                let hv = project_horizontal(&mt, p, &y, v)?;
                hessian_vector_with(p, &y, &mt, &grad, &hv).map(|t| t.xi)
            },
            delta,
            cfg.max_inner,
        )?;
        applies_total += applies;
        outer += 1;

        let model_decrease =
            -(inner_raw(&mt, p, &grad.xi, &eta) + 0.5 * inner_raw(&mt, p, &eta, &h_eta));

        let step = TangentVector {
            xi: eta,
            horizontal: true,
        };
        let boundary = matches!(tcg_stop, TcgStop::NegativeCurvature | TcgStop::ExceededRadius);

        let (rho, accepted, y_next, cost_next) = match retract(&y, &step) {
            Ok(cand) => {
                let c1 = cost(p, &cand);
                let rho = (current_cost - c1) / model_decrease.max(f64::MIN_POSITIVE);
                if rho > RHO_ACCEPT {
                    (rho, true, Some(cand), c1)
                } else {
                    (rho, false, None, current_cost)
                }
            }
            Err(RiccatiError::RankCollapse) => (f64::NEG_INFINITY, false, None, current_cost),
            Err(e) => return Err(e),
        };

        if rho < 0.25 {
            delta *= SHRINK;
        } else if rho > RHO_EXPAND && boundary {
            delta = (delta * EXPAND).min(DELTA_MAX);
        }

        stats.push(IterRecord {
            iter: outer,
            cost: cost_next,
            grad_norm,
            delta,
            rho,
            inner_iters,
            accepted,
            tcg_stop,
            hessian_applies: applies_total,
        });

        if let Some(cand) = y_next {
            y = cand;
            current_cost = cost_next;
        }

        if delta < DELTA_UNDERFLOW {
            stop = TrStop::RadiusUnderflow;
            break;
        }
    }

    Ok((
        y,
        TrustRegionState {
            delta,
            delta_max: DELTA_MAX,
            grad_norm,
            outer_iter: outer,
            stats,
            hessian_applies: applies_total,
            stop,
            final_cost: current_cost,
        },
    ))
}
