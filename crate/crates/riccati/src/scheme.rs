//! The outer meta-scheme: alternate fixed-rank trust-region minimization
//! with rank-one updates. The rank-one direction is the eigenvector of the
//! smallest eigenvalue of S = P R + R P^T, P = (A + B B^T X)/2, which has
//! rank at most 4r + 2s; appending t*u to Y with backtracked t decreases
//! the residual monotonically.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, RiccatiError};
use crate::geometry::{FactorPoint, MetricKind};
use crate::objective::{cost, relative_residual, residual_factored};
use crate::problem::{validate_stability, ProblemData, SolverConfig, StabilityReport};
use crate::rtr::minimize_fixed_rank;
use crate::linalg::orthonormal_columns;

/// Relative threshold on lambda_min below which no descent is reported.
const DESCENT_TOL: f64 = 1e-12;

/// Rank-one descent direction: unit eigenvector of the smallest eigenvalue
/// of the residual-gradient matrix S.
#[derive(Debug, Clone)]
pub struct DescentDirection {
    pub u: DVector<f64>,
    pub lambda_min: f64,
    /// Spectral-norm estimate of S, used for the no-descent threshold.
    pub s_norm_estimate: f64,
    pub s_rank_bound: usize,
}

impl DescentDirection {
    /// A direction only produces descent if lambda_min is meaningfully
    /// negative relative to the scale of S.
    pub fn is_descent(&self) -> bool {
        self.lambda_min < -DESCENT_TOL * self.s_norm_estimate.max(1e-300)
    }
}

/// Computes the smallest eigenpair of S = P R + R P^T without assembling
/// the n x n matrix: the column space of S lies in span([P U, U]) with U
/// the residual factor, so a (4r+2s)-dimensional symmetric eigenproblem
/// suffices.
pub fn descent_direction(p: &ProblemData, y: &FactorPoint) -> DescentDirection {
    let fr = residual_factored(p, y);
    let u = fr.u();
    let ym = y.y();
    let r = y.rank();
    let s = p.s();

    // P U = (A U + B B^T Y Y^T U) / 2
    let pu = (p.a_mul(u) + p.bbt_mul(&(ym * (ym.transpose() * u)))) * 0.5;
    let m = u.ncols();
    let mut stacked = DMatrix::zeros(p.n(), 2 * m);
    stacked.columns_mut(0, m).copy_from(&pu);
    stacked.columns_mut(m, m).copy_from(u);

    let w = orthonormal_columns(&stacked, 1e-12);
    if w.ncols() == 0 {
        // residual is zero: S = 0, no descent
        return DescentDirection {
            u: DVector::zeros(p.n()),
            lambda_min: 0.0,
            s_norm_estimate: 0.0,
            s_rank_bound: 4 * r + 2 * s,
        };
    }
    // Upper bound on ||S||: the threshold scale must not itself be
    // round-off noise when the residual has converged to zero.
    let scale_bound = 2.0 * pu.norm() * fr.coupling().norm() * u.norm();
    let wt_pu = w.transpose() * &pu;
    let wt_u = w.transpose() * u;
    let t = &wt_pu * fr.coupling() * wt_u.transpose()
        + &wt_u * fr.coupling() * wt_pu.transpose();
    let t = (&t + t.transpose()) * 0.5;
    let eig = t.symmetric_eigen();
    let (mut min_idx, mut min_val) = (0, f64::INFINITY);
    let mut max_abs: f64 = 0.0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < min_val {
            min_val = l;
            min_idx = i;
        }
        max_abs = max_abs.max(l.abs());
    }
    let mut dir = &w * eig.eigenvectors.column(min_idx);
    let nrm = dir.norm();
    if nrm > 0.0 {
        dir /= nrm;
    }
    DescentDirection {
        u: dir,
        lambda_min: min_val,
        s_norm_estimate: max_abs.max(scale_bound),
        s_rank_bound: 4 * r + 2 * s,
    }
}

/// Backtracking on the rank-one step [Y, t*u]: Armijo on tau = t^2,
/// phi([Y, t u]) <= phi(Y) + c * tau * lambda_min, halving t from 1.
/// Returns None when the halving budget is exhausted.
pub fn backtracking_step(
    p: &ProblemData,
    y: &FactorPoint,
    d: &DescentDirection,
    cfg: &SolverConfig,
) -> Result<Option<(f64, FactorPoint)>> {
    debug_assert!(d.lambda_min < 0.0, "caller must check is_descent first");
    let f0 = cost(p, y);
    let c = cfg.bt_sufficient_decrease;
    let n = p.n();
    let r = y.rank();
    let mut t = 1.0;
    for _ in 0..=cfg.bt_max_halvings {
        let mut y_new = DMatrix::zeros(n, r + 1);
        y_new.columns_mut(0, r).copy_from(y.y());
        y_new.set_column(r, &(&d.u * t));
        if let Ok(candidate) = FactorPoint::new(y_new) {
            let f1 = cost(p, &candidate);
            if f1 <= f0 + c * t * t * d.lambda_min {
                return Ok(Some((t, candidate)));
            }
        }
        t *= cfg.bt_contraction;
    }
    Ok(None)
}

/// Terminal status of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchemeStatus {
    Converged,
    RankCap,
    NoDescent,
}

/// Per-rank record, one per completed Step i (plus the Step ii data that
/// followed it, when any).
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub rank: usize,
    pub cost: f64,
    pub rel_residual: f64,
    pub grad_norm: f64,
    pub tr_iters: usize,
    pub hessian_applies: usize,
    pub lambda_min: Option<f64>,
    pub step_t: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SchemeState {
    pub rank: usize,
    pub y: FactorPoint,
    pub history: Vec<StageRecord>,
    pub status: SchemeStatus,
    /// Relative residual after every Step i and accepted Step ii, in order.
    pub residual_trace: Vec<f64>,
    pub stability: StabilityReport,
}

/// Deterministic initial iterate: first r0 columns of the orthonormalized
/// C^T scaled by ||C||_F / sqrt(n); seeded random orthonormal fallback when
/// C^T has fewer than r0 independent columns.
pub fn initial_point(p: &ProblemData, cfg: &SolverConfig) -> Result<FactorPoint> {
    let r0 = cfg.r0;
    let n = p.n();
    let scale = p.c().norm() / (n as f64).sqrt();
    let ct = p.c().transpose();
    let q = orthonormal_columns(&ct, 1e-12);
    if q.ncols() >= r0 {
        return FactorPoint::new(q.columns(0, r0).into_owned() * scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = DMatrix::from_fn(n, r0, |_, _| {
        rand::Rng::sample(&mut rng, rand_distr::StandardNormal)
    });
    let q = orthonormal_columns(&g, 1e-12);
    if q.ncols() < r0 {
        return Err(RiccatiError::RankCollapse);
    }
    FactorPoint::new(q * scale.max(1.0))
}

/// Runs the full alternation until the relative residual drops below
/// `cfg.tol_residual`, the rank cap is reached, or no rank-one descent
/// direction exists.
pub fn run_scheme(p: &ProblemData, cfg: &SolverConfig, kind: MetricKind) -> Result<SchemeState> {
    run_scheme_with(p, cfg, kind, |_| {})
}

/// Like [`run_scheme`], invoking `on_stage` after each completed rank
/// stage (so callers can stream records to disk).
pub fn run_scheme_with(
    p: &ProblemData,
    cfg: &SolverConfig,
    kind: MetricKind,
    mut on_stage: impl FnMut(&StageRecord),
) -> Result<SchemeState> {
    cfg.validate()?;
    let max_rank = cfg.effective_max_rank(p.n());
    let mut y = initial_point(p, cfg)?;
    let mut history: Vec<StageRecord> = Vec::new();
    let mut residual_trace = Vec::new();

    let status = loop {
        // Step i: fixed-rank trust-region minimization
        let (y_min, tr_state) = minimize_fixed_rank(p, &y, cfg, kind)?;
        y = y_min;
        let rel = relative_residual(p, &y)?;
        residual_trace.push(rel);
        let mut record = StageRecord {
            rank: y.rank(),
            cost: cost(p, &y),
            rel_residual: rel,
            grad_norm: tr_state.grad_norm,
            tr_iters: tr_state.outer_iter,
            hessian_applies: tr_state.hessian_applies,
            lambda_min: None,
            step_t: None,
        };

        if rel < cfg.tol_residual {
            on_stage(&record);
            history.push(record);
            break SchemeStatus::Converged;
        }
        if y.rank() >= max_rank {
            on_stage(&record);
            history.push(record);
            break SchemeStatus::RankCap;
        }

        // Step ii: rank-one update along the smallest eigenvector of S
        let d = descent_direction(p, &y);
        record.lambda_min = Some(d.lambda_min);
        if !d.is_descent() {
            on_stage(&record);
            history.push(record);
            break SchemeStatus::NoDescent;
        }
        match backtracking_step(p, &y, &d, cfg)? {
            Some((t, y_new)) => {
                record.step_t = Some(t);
                on_stage(&record);
                history.push(record);
                y = y_new;
                residual_trace.push(relative_residual(p, &y)?);
            }
            None => {
                on_stage(&record);
                history.push(record);
                break SchemeStatus::NoDescent;
            }
        }
    };

    let stability = validate_stability(p, &y.to_dense());
    Ok(SchemeState {
        rank: y.rank(),
        y,
        history,
        status,
        residual_trace,
        stability,
    })
}
