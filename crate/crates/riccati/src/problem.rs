//! Problem instance: the matrices A, B, C of the Riccati equation
//! A^T X + X A + X B B^T X = C^T C, plus solver configuration.

use std::path::Path;

use nalgebra::{Complex, DMatrix};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RiccatiError};
use crate::mtx::{self, MtxFormat};

/// A is only ever applied in matrix products, never factored, so it is
/// stored either dense or compressed sparse row depending on density.
#[derive(Debug, Clone)]
pub enum AMatrix {
    Dense(DMatrix<f64>),
    Sparse {
        a: CsrMatrix<f64>,
        at: CsrMatrix<f64>,
    },
}

impl AMatrix {
    /// Builds from a dense matrix, switching to CSR below 25% density.
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if n > 0 && (nnz as f64) < 0.25 * (n * n) as f64 {
            let mut coo = CooMatrix::new(m.nrows(), m.ncols());
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if m[(i, j)] != 0.0 {
                        coo.push(i, j, m[(i, j)]);
                    }
                }
            }
            let a = CsrMatrix::from(&coo);
            let at = a.transpose();
            AMatrix::Sparse { a, at }
        } else {
            AMatrix::Dense(m)
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.nrows(),
            AMatrix::Sparse { a, .. } => a.nrows(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            AMatrix::Sparse { a, .. } => a.nnz(),
        }
    }

    /// A · v
    pub fn mul(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AMatrix::Dense(m) => m * v,
            AMatrix::Sparse { a, .. } => a * v,
        }
    }

    /// A^T · v
    pub fn tr_mul(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AMatrix::Dense(m) => m.transpose() * v,
            AMatrix::Sparse { at, .. } => at * v,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            AMatrix::Dense(m) => m.clone(),
            AMatrix::Sparse { a, .. } => {
                let mut m = DMatrix::zeros(a.nrows(), a.ncols());
                for (i, j, v) in a.triplet_iter() {
                    m[(i, j)] = *v;
                }
                m
            }
        }
    }
}

/// Immutable Riccati problem instance. Shareable across threads;
/// every operation on it is a pure read.
#[derive(Debug, Clone)]
pub struct ProblemData {
    a: AMatrix,
    /// n×p, possibly p = 0 (Lyapunov special case B = 0).
    b: DMatrix<f64>,
    /// s×n with s ≥ 1.
    c: DMatrix<f64>,
    n: usize,
    p: usize,
    s: usize,
    aat_dense: OnceCell<DMatrix<f64>>,
}

/// Relative tolerance on sigma_min/sigma_max below which A is rejected.
pub const FULL_RANK_TOL: f64 = 1e-12;

impl ProblemData {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(RiccatiError::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if n == 0 {
            return Err(RiccatiError::DimensionMismatch("n must be >= 1".into()));
        }
        if b.nrows() != n && !(b.nrows() == 0 && b.ncols() == 0) {
            return Err(RiccatiError::DimensionMismatch(format!(
                "B must have {} rows, got {}",
                n,
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(RiccatiError::DimensionMismatch(format!(
                "C must have {} columns, got {}",
                n,
                c.ncols()
            )));
        }
        if c.nrows() == 0 {
            return Err(RiccatiError::DimensionMismatch("C needs s >= 1 rows".into()));
        }
        let sv = a.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if smax == 0.0 || smin <= FULL_RANK_TOL * smax {
            return Err(RiccatiError::RankDeficientA {
                ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            });
        }
        let p = b.ncols();
        let s = c.nrows();
        let b = if b.nrows() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            b
        };
        Ok(ProblemData {
            a: AMatrix::from_dense(a),
            b,
            c,
            n,
            p,
            s,
            aat_dense: OnceCell::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn a(&self) -> &AMatrix {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// A · v
    pub fn a_mul(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.a.mul(v)
    }

    /// A^T · v
    pub fn at_mul(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.a.tr_mul(v)
    }

    /// B B^T · v, zero when p = 0.
    pub fn bbt_mul(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        if self.p == 0 {
            DMatrix::zeros(v.nrows(), v.ncols())
        } else {
            &self.b * (self.b.transpose() * v)
        }
    }

    /// Dense A A^T, built once on first use (desk-scale shifted solves).
    pub fn aat_dense(&self) -> &DMatrix<f64> {
        self.aat_dense.get_or_init(|| {
            let ad = self.a.to_dense();
            &ad * ad.transpose()
        })
    }

    /// ‖C^T C‖_F computed through the s×s Gram matrix C C^T.
    pub fn ctc_norm(&self) -> f64 {
        let g = &self.c * self.c.transpose();
        (&g * &g).trace().sqrt()
    }
}

/// Stability report for -A and the closed loop -A - B B^T X.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityReport {
    pub a_stable: bool,
    pub closed_loop_stable: bool,
    pub max_real_part_a: f64,
    pub max_real_part_closed_loop: f64,
}

impl StabilityReport {
    pub fn both_stable(&self) -> bool {
        self.a_stable && self.closed_loop_stable
    }
}

fn max_real_part(m: &DMatrix<f64>) -> f64 {
    let eig: nalgebra::DVector<Complex<f64>> = m.clone().complex_eigenvalues();
    eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that -A and -A - B B^T X have spectra in the open left half-plane.
/// X is symmetrized before use. Report-only; never called in the inner loop.
pub fn validate_stability(p: &ProblemData, x: &DMatrix<f64>) -> StabilityReport {
    let xs = (x + x.transpose()) * 0.5;
    let ad = p.a.to_dense();
    let neg_a = -&ad;
    let closed = &neg_a - p.bbt_mul(&xs);
    let ra = max_real_part(&neg_a);
    let rc = max_real_part(&closed);
    StabilityReport {
        a_stable: ra < 0.0,
        closed_loop_stable: rc < 0.0,
        max_real_part_a: ra,
        max_real_part_closed_loop: rc,
    }
}

/// Solver configuration. Defaults follow the stopping criteria the scheme
/// is calibrated to: gradient tolerance 1e-10, relative residual 1e-7,
/// 30 inner and 500 outer trust-region iterations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverConfig {
    pub r0: usize,
    /// None means "up to n".
    pub max_rank: Option<usize>,
    pub tol_residual: f64,
    pub tol_grad: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub bt_contraction: f64,
    pub bt_sufficient_decrease: f64,
    pub bt_max_halvings: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            r0: 1,
            max_rank: None,
            tol_residual: 1e-7,
            tol_grad: 1e-10,
            max_outer: 500,
            max_inner: 30,
            bt_contraction: 0.5,
            bt_sufficient_decrease: 1e-4,
            bt_max_halvings: 50,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol_residual <= 0.0 || self.tol_grad <= 0.0 {
            return Err(RiccatiError::InvalidConfig("tolerances must be > 0".into()));
        }
        if self.r0 < 1 {
            return Err(RiccatiError::InvalidConfig("r0 must be >= 1".into()));
        }
        if !(self.bt_contraction > 0.0 && self.bt_contraction < 1.0) {
            return Err(RiccatiError::InvalidConfig(
                "bt_contraction must lie in (0, 1)".into(),
            ));
        }
        if self.bt_sufficient_decrease <= 0.0 {
            return Err(RiccatiError::InvalidConfig(
                "bt_sufficient_decrease must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_max_rank(&self, n: usize) -> usize {
        self.max_rank.unwrap_or(n).min(n)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SolverConfig = toml::from_str(&text).map_err(|e| RiccatiError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `RICCATI_*` environment variable overrides (CI hook).
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        fn get<T: std::str::FromStr>(key: &str) -> Result<Option<T>> {
            match std::env::var(key) {
                Ok(v) => v.parse::<T>().map(Some).map_err(|_| {
                    RiccatiError::InvalidConfig(format!("cannot parse env {key}={v}"))
                }),
                Err(_) => Ok(None),
            }
        }
        if let Some(v) = get::<usize>("RICCATI_R0")? {
            self.r0 = v;
        }
        if let Some(v) = get::<usize>("RICCATI_MAX_RANK")? {
            self.max_rank = Some(v);
        }
        if let Some(v) = get::<f64>("RICCATI_TOL_RESIDUAL")? {
            self.tol_residual = v;
        }
        if let Some(v) = get::<f64>("RICCATI_TOL_GRAD")? {
            self.tol_grad = v;
        }
        if let Some(v) = get::<usize>("RICCATI_MAX_OUTER")? {
            self.max_outer = v;
        }
        if let Some(v) = get::<usize>("RICCATI_MAX_INNER")? {
            self.max_inner = v;
        }
        if let Some(v) = get::<u64>("RICCATI_SEED")? {
            self.seed = v;
        }
        self.validate()
    }
}

/// Loads a problem from a directory holding `a.mtx`, `c.mtx` and an
/// optional `b.mtx` in matrix-exchange text format.
pub fn load_problem(dir: &Path) -> Result<ProblemData> {
    let a = mtx::read_matrix(&dir.join("a.mtx"))?.to_dense();
    let c = mtx::read_matrix(&dir.join("c.mtx"))?.to_dense();
    let b_path = dir.join("b.mtx");
    let b = if b_path.exists() {
        mtx::read_matrix(&b_path)?.to_dense()
    } else {
        DMatrix::zeros(a.nrows(), 0)
    };
    ProblemData::new(a, b, c)
}

/// Writes a problem back to `a.mtx` / `b.mtx` / `c.mtx` in the given variant.
/// B is omitted when p = 0.
pub fn store_problem(p: &ProblemData, dir: &Path, format: MtxFormat) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    mtx::write_dense(&dir.join("a.mtx"), &p.a.to_dense(), format)?;
    if p.p() > 0 {
        mtx::write_dense(&dir.join("b.mtx"), p.b(), format)?;
    }
    mtx::write_dense(&dir.join("c.mtx"), p.c(), format)?;
    Ok(())
}
