//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`; failures
//! surface the criterion in the panic message).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riccati::benchmarks::{generate, solve_dense_care, truncated_rank_residuals, BenchmarkSpec, Family};
use riccati::geometry::{
    build_metric_terms, inner, project_horizontal, riemannian_gradient, FactorPoint, MetricKind,
};
use riccati::metric_solver::{apply_a1, solve_metric_system};
use riccati::objective::{cost, euclidean_gradient, relative_residual};
use riccati::problem::{validate_stability, ProblemData, SolverConfig};
use riccati::rtr::{minimize_fixed_rank, TrStop};
use riccati::scheme::{descent_direction, initial_point, run_scheme, SchemeState, SchemeStatus};

fn random_dense(rng: &mut ChaCha8Rng, nr: usize, nc: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nr, nc, |_, _| rng.sample(rand_distr::StandardNormal))
}

/// Random instance with -A stable (diagonal shift dominates the spectrum).
fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize, s: usize) -> ProblemData {
    let a = random_dense(rng, n, n) + DMatrix::identity(n, n) * n as f64;
    let b = random_dense(rng, n, p);
    let c = random_dense(rng, s, n);
    ProblemData::new(a, b, c).unwrap()
}

fn random_factor(rng: &mut ChaCha8Rng, n: usize, r: usize) -> FactorPoint {
    FactorPoint::new(random_dense(rng, n, r)).unwrap()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    let qr = random_dense(rng, r, r).qr();
    qr.q()
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_fd: f64 = 0.0;
    let mut worst_def: f64 = 0.0;

    for k in 0..20 {
        let n = rng.gen_range(5..=20);
        let r = rng.gen_range(1..=4usize).min(n);
        let p = rng.gen_range(0..=3);
        let s = rng.gen_range(1..=3);
        let prob = random_problem(&mut rng, n, p, s);
        let y = random_factor(&mut rng, n, r);
        let egrad = euclidean_gradient(&prob, &y);

        // central finite differences of the cost along random directions
        for _ in 0..5 {
            let z = random_dense(&mut rng, n, r);
            let t = 1e-5 * y.y().norm() / z.norm().max(1e-300);
            let fp = cost(&prob, &FactorPoint::new(y.y() + &z * t).unwrap());
            let fm = cost(&prob, &FactorPoint::new(y.y() - &z * t).unwrap());
            let fd = (fp - fm) / (2.0 * t);
            let an = egrad.dot(&z);
            let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-300);
            worst_fd = worst_fd.max(rel);
            assert!(
                rel <= 1e-6,
                "criterion 1 FAIL: instance {k} gradient FD mismatch {rel:.3e}"
            );
        }

        // Riemannian gradient defining property in the tuned metric
        let mt = build_metric_terms(&prob, &y, MetricKind::Tuned).unwrap();
        let rgrad = riemannian_gradient(&prob, &y, &mt).unwrap();
        for _ in 0..10 {
            let zeta = project_horizontal(&mt, &prob, &y, &random_dense(&mut rng, n, r)).unwrap();
            let lhs = inner(&mt, &prob, &rgrad, &zeta);
            let rhs = egrad.dot(&zeta.xi);
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
            worst_def = worst_def.max(rel);
            assert!(
                rel <= 1e-10,
                "criterion 1 FAIL: instance {k} defining-property mismatch {rel:.3e}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "criterion 1 FAIL: took {elapsed:?} (budget 10 s)"
    );
    println!(
        "criterion 1 PASS: gradient FD <= {worst_fd:.2e}, defining property <= {worst_def:.2e}, {elapsed:?}"
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_metric_system_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_res: f64 = 0.0;
    let mut worst_kron: f64 = 0.0;

    for &(n, r) in &[(10usize, 2usize), (25, 4), (50, 6), (80, 5), (100, 4)] {
        assert!(n * r <= 400);
        let p = random_problem(&mut rng, n, 2, 2);
        let y = random_factor(&mut rng, n, r);
        let mt = build_metric_terms(&p, &y, MetricKind::Tuned).unwrap();
        let z = random_dense(&mut rng, n, r);
        let xi = solve_metric_system(&mt, &p, &z).unwrap();

        let lhs = apply_a1(&mt, &p, &xi) * &mt.m1 + &xi * &mt.m2;
        let res = (&lhs - &z).norm() / z.norm();
        worst_res = worst_res.max(res);
        assert!(res <= 1e-10, "criterion 2 FAIL: residual {res:.3e} at n={n}, r={r}");

        // dense Kronecker-assembled operator
        let a1 = apply_a1(&mt, &p, &DMatrix::identity(n, n));
        let op = mt.m1.kronecker(&a1) + mt.m2.kronecker(&DMatrix::identity(n, n));
        let rhs = DVector::from_column_slice(z.as_slice());
        let sol = op.lu().solve(&rhs).unwrap();
        let xi_dense = DMatrix::from_column_slice(n, r, sol.as_slice());
        let diff = (&xi - &xi_dense).norm() / xi_dense.norm();
        worst_kron = worst_kron.max(diff);
        assert!(
            diff <= 1e-10,
            "criterion 2 FAIL: Kronecker mismatch {diff:.3e} at n={n}, r={r}"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "criterion 2 FAIL: took {elapsed:?} (budget 10 s)"
    );
    println!(
        "criterion 2 PASS: residual <= {worst_res:.2e}, Kronecker agreement <= {worst_kron:.2e}, {elapsed:?}"
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_quotient_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = generate(&BenchmarkSpec::new(Family::Heat, 30)).unwrap();
    let y = random_factor(&mut rng, 30, 3);

    let mut cfg = SolverConfig::default();
    cfg.max_outer = 10;
    cfg.tol_grad = 1e-300;
    cfg.tol_residual = 1e-300;

    let c0 = cost(&p, &y);
    let r0 = relative_residual(&p, &y).unwrap();
    let mt = build_metric_terms(&p, &y, MetricKind::Tuned).unwrap();
    let g0 = riccati::geometry::norm(&mt, &p, &riemannian_gradient(&p, &y, &mt).unwrap());
    let (_, tr0) = minimize_fixed_rank(&p, &y, &cfg, MetricKind::Tuned).unwrap();
    let costs0: Vec<f64> = tr0.stats.iter().map(|s| s.cost).collect();

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let o = random_orthogonal(&mut rng, 3);
        let yo = FactorPoint::new(y.y() * &o).unwrap();
        let rel =
            |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);

        worst = worst.max(rel(cost(&p, &yo), c0));
        worst = worst.max(rel(relative_residual(&p, &yo).unwrap(), r0));
        let mt_o = build_metric_terms(&p, &yo, MetricKind::Tuned).unwrap();
        let g_o =
            riccati::geometry::norm(&mt_o, &p, &riemannian_gradient(&p, &yo, &mt_o).unwrap());
        worst = worst.max(rel(g_o, g0));

        let (_, tr_o) = minimize_fixed_rank(&p, &yo, &cfg, MetricKind::Tuned).unwrap();
        assert_eq!(
            tr_o.stats.len(),
            costs0.len(),
            "criterion 3 FAIL: trust-region iteration counts differ"
        );
        for (a, b) in tr_o.stats.iter().map(|s| s.cost).zip(&costs0) {
            worst = worst.max(rel(a, *b));
        }
    }
    assert!(worst <= 1e-8, "criterion 3 FAIL: worst deviation {worst:.3e}");
    println!("criterion 3 PASS: quotient invariance to {worst:.2e} over 10 rotations");
}

// ------------------------------------------------------- shared 4/5/6

struct HeatRun {
    problem: ProblemData,
    state: SchemeState,
    wall: Duration,
    x_dense: DMatrix<f64>,
    truncated: Vec<(usize, f64)>,
}

fn heat_run() -> &'static HeatRun {
    static RUN: OnceLock<HeatRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let problem = generate(&BenchmarkSpec::new(Family::Heat, 100)).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.max_rank = Some(25);
        let start = Instant::now();
        let state = run_scheme(&problem, &cfg, MetricKind::Tuned).unwrap();
        let wall = start.elapsed();
        let x_dense = solve_dense_care(&problem).unwrap();
        let truncated = truncated_rank_residuals(&problem, &x_dense, 25).unwrap();
        HeatRun {
            problem,
            state,
            wall,
            x_dense,
            truncated,
        }
    })
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_scheme_convergence() {
    let run = heat_run();
    let last = run.state.history.last().expect("empty history");
    assert_eq!(
        run.state.status,
        SchemeStatus::Converged,
        "criterion 4 FAIL: status {:?}",
        run.state.status
    );
    assert!(
        last.rel_residual < 1e-7,
        "criterion 4 FAIL: final residual {:.3e}",
        last.rel_residual
    );
    assert!(run.state.rank <= 25, "criterion 4 FAIL: rank {}", run.state.rank);
    assert!(
        run.wall < Duration::from_secs(60),
        "criterion 4 FAIL: took {:?} (budget 60 s)",
        run.wall
    );
    println!(
        "criterion 4 PASS: heat n=100 converged at rank {} with residual {:.2e} in {:?}",
        run.state.rank, last.rel_residual, run.wall
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_residual_vs_rank_dominance() {
    let run = heat_run();
    let mut worst_ratio: f64 = 0.0;
    for rec in &run.state.history {
        let (_, trunc) = run.truncated[rec.rank - 1];
        assert_eq!(run.truncated[rec.rank - 1].0, rec.rank);
        let ratio = rec.rel_residual / trunc;
        worst_ratio = worst_ratio.max(ratio);
        assert!(
            ratio <= 1.05,
            "criterion 5 FAIL: rank {} scheme residual {:.3e} vs truncated {:.3e}",
            rec.rank,
            rec.rel_residual,
            trunc
        );
    }
    let scheme_min_rank = run
        .state
        .history
        .iter()
        .find(|r| r.rel_residual < 1e-7)
        .map(|r| r.rank)
        .expect("criterion 5 FAIL: scheme never reached 1e-7");
    let trunc_min_rank = run
        .truncated
        .iter()
        .find(|(_, r)| *r < 1e-7)
        .map(|(k, _)| *k)
        .expect("criterion 5 FAIL: truncation never reached 1e-7 within rank 25");
    assert!(
        scheme_min_rank <= trunc_min_rank,
        "criterion 5 FAIL: scheme needs rank {scheme_min_rank}, truncation {trunc_min_rank}"
    );
    println!(
        "criterion 5 PASS: scheme/truncated ratio <= {worst_ratio:.3} at every visited rank; \
         minimal rank {scheme_min_rank} <= {trunc_min_rank}"
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_oracle_agreement() {
    let run = heat_run();
    let r_star = run.state.rank;
    let x = run.state.y.to_dense();

    // rank-r* truncation of the dense solution
    let eig = run.x_dense.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..100).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut x_trunc = DMatrix::zeros(100, 100);
    for &idx in order.iter().take(r_star) {
        let v = eig.eigenvectors.column(idx);
        x_trunc += (&v * v.transpose()) * eig.eigenvalues[idx].max(0.0);
    }

    let rel = (&x - &x_trunc).norm() / run.x_dense.norm();
    assert!(rel <= 1e-5, "criterion 6 FAIL: solution mismatch {rel:.3e}");
    assert!(
        run.state.stability.both_stable(),
        "criterion 6 FAIL: final iterate not stabilizing"
    );
    let rep = validate_stability(&run.problem, &x);
    assert!(rep.both_stable());
    println!("criterion 6 PASS: ||YY^T - X_r*|| / ||X|| = {rel:.2e}, final iterate stabilizing");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_preconditioning_benefit() {
    let p = generate(&BenchmarkSpec::new(Family::Heat, 100)).unwrap();
    let mut cfg = SolverConfig::default();
    cfg.r0 = 5;
    cfg.tol_grad = 1e-10;
    cfg.tol_residual = f64::MIN_POSITIVE; // gradient tolerance governs
    let y0 = initial_point(&p, &cfg).unwrap();

    let (_, tuned) = minimize_fixed_rank(&p, &y0, &cfg, MetricKind::Tuned).unwrap();
    assert_eq!(
        tuned.stop,
        TrStop::GradTolReached,
        "criterion 7 FAIL: tuned metric stopped with {:?}",
        tuned.stop
    );
    // The Euclidean baseline either reaches the tolerance or exhausts its
    // outer budget; in both cases its Hessian-apply count is a lower bound
    // on what it needs.
    let (_, eucl) = minimize_fixed_rank(&p, &y0, &cfg, MetricKind::Euclidean).unwrap();
    assert!(
        tuned.hessian_applies < eucl.hessian_applies,
        "criterion 7 FAIL: tuned {} vs euclidean {} Hessian applies",
        tuned.hessian_applies,
        eucl.hessian_applies
    );
    let ratio = eucl.hessian_applies as f64 / tuned.hessian_applies as f64;
    println!(
        "criterion 7 PASS: tuned {} vs euclidean {} Hessian applies (ratio {:.1}x, euclidean stop {:?} at grad {:.2e})",
        tuned.hessian_applies, eucl.hessian_applies, ratio, eucl.stop, eucl.grad_norm
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_monotonicity_and_descent() {
    // monotone residual trace and Armijo inequality, from logged values
    let mut max_armijo_violation: f64 = 0.0;
    for family in [Family::Heat, Family::Lin71Like, Family::Lin73Like] {
        let p = generate(&BenchmarkSpec::new(family, 40)).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.max_rank = Some(10);
        let state = run_scheme(&p, &cfg, MetricKind::Tuned).unwrap();
        for w in state.residual_trace.windows(2) {
            assert!(
                w[1] <= w[0],
                "criterion 8 FAIL: residual trace increases ({} -> {}) on {}",
                w[0],
                w[1],
                family.as_str()
            );
        }
        for w in state.history.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let (Some(t), Some(lmin)) = (prev.step_t, prev.lambda_min) else {
                continue;
            };
            let bound = prev.cost + cfg.bt_sufficient_decrease * t * t * lmin;
            let violation = next.cost - bound;
            max_armijo_violation = max_armijo_violation.max(violation);
            assert!(
                violation <= 1e-15 * prev.cost.abs().max(1.0),
                "criterion 8 FAIL: Armijo violated at rank {} on {}: cost {} > bound {}",
                next.rank,
                family.as_str(),
                next.cost,
                bound
            );
        }
    }

    // descent eigenpair vs a dense eigendecomposition of S, n <= 50
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_eig: f64 = 0.0;
    for k in 0..5 {
        let n = 30 + 4 * k;
        let p = random_problem(&mut rng, n, 1, 2);
        let y = random_factor(&mut rng, n, 2);
        let d = descent_direction(&p, &y);

        let x = y.to_dense();
        let ad = match p.a() {
            m => m.to_dense(),
        };
        let r = ad.transpose() * &x + &x * &ad + &x * p.bbt_mul(&x) - p.c().transpose() * p.c();
        let pm = (&ad + p.bbt_mul(&x)) * 0.5;
        let s = &pm * &r + &r * pm.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let eig = s.clone().symmetric_eigen();
        let lmin_dense = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));

        let de = (d.lambda_min - lmin_dense).abs() / scale;
        let dr = (&s * &d.u - &d.u * d.lambda_min).norm() / scale;
        worst_eig = worst_eig.max(de).max(dr);
        assert!(
            de <= 1e-10 && dr <= 1e-10,
            "criterion 8 FAIL: eigenpair mismatch {de:.3e} / residual {dr:.3e} at n={n}"
        );
    }
    println!(
        "criterion 8 PASS: monotone traces, Armijo slack <= {max_armijo_violation:.2e}, \
         eigenpair agreement <= {worst_eig:.2e}"
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_9_stopping_criteria_defaults() {
    let cfg = SolverConfig::default();
    assert_eq!(cfg.tol_grad, 1e-10, "criterion 9 FAIL: tol_grad");
    assert_eq!(cfg.tol_residual, 1e-7, "criterion 9 FAIL: tol_residual");
    assert_eq!(cfg.max_inner, 30, "criterion 9 FAIL: max_inner");
    assert_eq!(cfg.max_outer, 500, "criterion 9 FAIL: max_outer");
    assert_eq!(cfg.r0, 1, "criterion 9 FAIL: r0");
    println!(
        "criterion 9 PASS: defaults grad 1e-10, residual 1e-7, 30 inner, 500 outer iterations"
    );
}
