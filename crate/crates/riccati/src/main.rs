//! Command-line driver: runs the rank-update scheme and the comparison
//! experiments, emitting per-stage CSV plus a sidecar metadata file.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use riccati::benchmarks::{
    dense_relative_residual, generate, solve_dense_care, truncated_rank_residuals,
    BenchmarkSpec, Family,
};
use riccati::error::{Result, RiccatiError};
use riccati::geometry::MetricKind;
use riccati::problem::{load_problem, validate_stability, ProblemData, SolverConfig};
use riccati::rtr::minimize_fixed_rank;
use riccati::scheme::{initial_point, run_scheme_with, SchemeStatus, StageRecord};

#[derive(Parser)]
#[command(
    name = "riccati",
    about = "Low-rank Riccati solver: Riemannian trust regions on the fixed-rank \
             PSD quotient with rank-one updates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the rank-update scheme, writing one CSV row per rank stage.
    Solve(SolveArgs),
    /// Scheme residual-vs-rank next to the truncated dense solution.
    CompareTruncation(SolveArgs),
    /// Tuned vs Euclidean metric on one fixed-rank problem.
    CompareMetric(CompareMetricArgs),
    /// Dense solve and residual report.
    Oracle(ProblemArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Built-in family: heat | lin-7-1-like | lin-7-3-like
    #[arg(long, conflicts_with = "problem_file")]
    example: Option<String>,
    /// Directory holding a.mtx, c.mtx and optionally b.mtx
    #[arg(long)]
    problem_file: Option<PathBuf>,
    /// Dimension for --example families
    #[arg(long, default_value_t = 100)]
    n: usize,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file mirroring the solver configuration fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    r0: Option<usize>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Riemannian metric: tuned | euclidean
    #[arg(long, default_value = "tuned")]
    metric: String,
    /// Output CSV path; a sidecar <out>.meta.json is written next to it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareMetricArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Fixed rank of the comparison
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::CompareTruncation(args) => cmd_compare_truncation(args),
        Command::CompareMetric(args) => cmd_compare_metric(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

/// Problem instance plus the metadata echoed into the sidecar file.
struct Instance {
    problem: ProblemData,
    family: Option<Family>,
    source: String,
}

fn build_instance(args: &ProblemArgs) -> Result<Instance> {
    if let Some(dir) = &args.problem_file {
        let problem = load_problem(dir)?;
        return Ok(Instance {
            problem,
            family: None,
            source: dir.display().to_string(),
        });
    }
    let name = args.example.as_deref().unwrap_or("heat");
    let family = Family::parse(name)?;
    let problem = generate(&BenchmarkSpec::new(family, args.n))?;
    Ok(Instance {
        problem,
        family: Some(family),
        source: format!("{}:{}", family.as_str(), args.n),
    })
}

/// Precedence: defaults < --config file < RICCATI_* env < explicit flags.
fn build_config(args: &ConfigArgs) -> Result<SolverConfig> {
    let mut cfg = match &args.config {
        Some(path) => SolverConfig::from_toml_file(path)?,
        None => SolverConfig::default(),
    };
    cfg.apply_env_overrides()?;
    if let Some(v) = args.r0 {
        cfg.r0 = v;
    }
    if let Some(v) = args.max_rank {
        cfg.max_rank = Some(v);
    }
    if let Some(v) = args.tol_residual {
        cfg.tol_residual = v;
    }
    if let Some(v) = args.tol_grad {
        cfg.tol_grad = v;
    }
    if let Some(v) = args.max_outer {
        cfg.max_outer = v;
    }
    if let Some(v) = args.max_inner {
        cfg.max_inner = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_metric(s: &str) -> Result<MetricKind> {
    match s {
        "tuned" => Ok(MetricKind::Tuned),
        "euclidean" => Ok(MetricKind::Euclidean),
        other => Err(RiccatiError::InvalidConfig(format!(
            "unknown metric '{other}' (expected tuned or euclidean)"
        ))),
    }
}

/// Either a buffered file or stdout; every row is flushed as written so a
/// crash leaves a legible prefix.
enum Sink {
    File(BufWriter<File>),
    Stdout,
}

impl Sink {
    fn open(out: &Option<PathBuf>) -> Result<Self> {
        match out {
            Some(path) => Ok(Sink::File(BufWriter::new(File::create(path)?))),
            None => Ok(Sink::Stdout),
        }
    }

    fn row(&mut self, line: &str) -> Result<()> {
        match self {
            Sink::File(w) => {
                writeln!(w, "{line}")?;
                w.flush()?;
            }
            Sink::Stdout => println!("{line}"),
        }
        Ok(())
    }
}

fn opt_num<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn stage_row(r: &StageRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.rank,
        r.cost,
        r.rel_residual,
        r.tr_iters,
        opt_num(&r.lambda_min),
        opt_num(&r.step_t)
    )
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    source: String,
    family: Option<&'a str>,
    provenance_caveat: Option<&'a str>,
    n: usize,
    metric: &'a str,
    config: &'a SolverConfig,
    status: Option<String>,
    stability: Option<riccati::problem::StabilityReport>,
    wall_time_s: f64,
}

fn write_sidecar(out: &Option<PathBuf>, sidecar: &Sidecar) -> Result<()> {
    let Some(path) = out else { return Ok(()) };
    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|e| RiccatiError::InvalidConfig(e.to_string()))?;
    std::fs::write(meta_path, json)?;
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

fn status_str(s: &SchemeStatus) -> &'static str {
    match s {
        SchemeStatus::Converged => "converged",
        SchemeStatus::RankCap => "rank-cap",
        SchemeStatus::NoDescent => "no-descent",
    }
}

fn exit_code_for(status: &SchemeStatus) -> u8 {
    match status {
        SchemeStatus::NoDescent => 2,
        _ => 0,
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let inst = build_instance(&args.problem)?;
    let cfg = build_config(&args.config)?;
    let kind = parse_metric(&args.metric)?;

    let mut sink = Sink::open(&args.out)?;
    sink.row("rank,cost,rel_residual,tr_iters,lambda_min,step_t")?;

    let start = Instant::now();
    let state = run_scheme_with(&inst.problem, &cfg, kind, |rec| {
        // flushed per stage; sink errors surface at the end of the run
        let _ = sink.row(&stage_row(rec));
    })?;
    let wall = start.elapsed().as_secs_f64();

    write_sidecar(
        &args.out,
        &Sidecar {
            command: "solve",
            source: inst.source.clone(),
            family: inst.family.map(|f| f.as_str()),
            provenance_caveat: inst.family.and_then(|f| f.provenance_caveat()),
            n: inst.problem.n(),
            metric: &args.metric,
            config: &cfg,
            status: Some(status_str(&state.status).to_string()),
            stability: Some(state.stability.clone()),
            wall_time_s: wall,
        },
    )?;

    let last = state.history.last();
    eprintln!(
        "status={} final_rank={} rel_residual={}",
        status_str(&state.status),
        state.rank,
        last.map(|r| r.rel_residual.to_string()).unwrap_or_default()
    );
    Ok(exit_code_for(&state.status))
}

fn cmd_compare_truncation(args: SolveArgs) -> Result<u8> {
    let inst = build_instance(&args.problem)?;
    let cfg = build_config(&args.config)?;
    let kind = parse_metric(&args.metric)?;

    let start = Instant::now();
    let state = run_scheme_with(&inst.problem, &cfg, kind, |_| {})?;
    let x_dense = solve_dense_care(&inst.problem)?;
    let truncated = truncated_rank_residuals(&inst.problem, &x_dense, state.rank)?;
    let wall = start.elapsed().as_secs_f64();

    let mut sink = Sink::open(&args.out)?;
    sink.row("rank,scheme_rel_residual,truncated_rel_residual")?;
    for rec in &state.history {
        let trunc = truncated
            .iter()
            .find(|(k, _)| *k == rec.rank)
            .map(|(_, r)| r.to_string())
            .unwrap_or_default();
        sink.row(&format!("{},{},{}", rec.rank, rec.rel_residual, trunc))?;
    }

    write_sidecar(
        &args.out,
        &Sidecar {
            command: "compare-truncation",
            source: inst.source.clone(),
            family: inst.family.map(|f| f.as_str()),
            provenance_caveat: inst.family.and_then(|f| f.provenance_caveat()),
            n: inst.problem.n(),
            metric: &args.metric,
            config: &cfg,
            status: Some(status_str(&state.status).to_string()),
            stability: Some(state.stability.clone()),
            wall_time_s: wall,
        },
    )?;
    Ok(exit_code_for(&state.status))
}

fn cmd_compare_metric(args: CompareMetricArgs) -> Result<u8> {
    let inst = build_instance(&args.problem)?;
    let mut cfg = build_config(&args.config)?;
    cfg.r0 = args.rank;
    // fixed-rank comparison runs to the gradient tolerance
    cfg.tol_residual = f64::MIN_POSITIVE;
    cfg.validate()?;

    let y0 = initial_point(&inst.problem, &cfg)?;
    let mut sink = Sink::open(&args.out)?;
    sink.row("metric,iter,hessian_applies,cost,grad_norm")?;

    let start = Instant::now();
    for (kind, label) in [(MetricKind::Tuned, "tuned"), (MetricKind::Euclidean, "euclidean")] {
        let (_, tr) = minimize_fixed_rank(&inst.problem, &y0, &cfg, kind)?;
        for rec in &tr.stats {
            sink.row(&format!(
                "{},{},{},{},{}",
                label, rec.iter, rec.hessian_applies, rec.cost, rec.grad_norm
            ))?;
        }
        eprintln!(
            "{label}: outer_iters={} hessian_applies={} final_grad_norm={}",
            tr.stats.len(),
            tr.hessian_applies,
            tr.grad_norm
        );
    }
    let wall = start.elapsed().as_secs_f64();

    write_sidecar(
        &args.out,
        &Sidecar {
            command: "compare-metric",
            source: inst.source.clone(),
            family: inst.family.map(|f| f.as_str()),
            provenance_caveat: inst.family.and_then(|f| f.provenance_caveat()),
            n: inst.problem.n(),
            metric: "both",
            config: &cfg,
            status: None,
            stability: None,
            wall_time_s: wall,
        },
    )?;
    Ok(0)
}

fn cmd_oracle(args: ProblemArgs) -> Result<u8> {
    let inst = build_instance(&args)?;
    let x = solve_dense_care(&inst.problem)?;
    let rel = dense_relative_residual(&inst.problem, &x)?;
    let report = validate_stability(&inst.problem, &x);
    println!(
        "oracle source={} n={} rel_residual={:.3e} a_stable={} closed_loop_stable={}",
        inst.source,
        inst.problem.n(),
        rel,
        report.a_stable,
        report.closed_loop_stable
    );
    Ok(0)
}
