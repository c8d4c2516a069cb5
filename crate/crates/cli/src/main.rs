//! Command-line front end: parse problem files, run the solvers, emit JSON
//! reports and CSV traces.
//!
//! Exit codes: `0` success (solve: final residual within tolerance; check:
//! all rows pass), `1` input error, `2` iteration exhaustion or a failed
//! check, `3` unsupported check.

mod checks;
mod problem_file;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use plqopt::catalog::{self, InstanceSpec};
use plqopt::duality::{self, AugParams};
use plqopt::plq::PlqFunction;
use plqopt::prox::{self, ApproxSchedule, ProxParams, ScheduleKind, SolveTrace, Termination};
use plqopt::qp;

use problem_file::{BuiltProblem, ProblemFile};
use report::Report;

#[derive(Parser)]
#[command(name = "plqopt", about = "Composite optimization of piecewise linear-quadratic penalties", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Prox,
    Approx,
    Alm,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Subgradient,
    Duality,
    Tilt,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problems described by one or more files.
    Solve {
        files: Vec<PathBuf>,
        /// Solver driver; overrides the file's [solver] method.
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Residual tolerance deciding the exit code.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Override the inner iteration cap.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write the iteration trace as CSV (single file only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the JSON report here instead of stdout (single file only).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Run independent files on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a diagnostic suite against a problem file.
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        what: What,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { files, method, tol, max_iter, trace, json, jobs } => {
            run_solve_batch(&files, method, tol, max_iter, trace, json, jobs)
        }
        Command::Check { file, what } => run_check(&file, what),
    };
    std::process::exit(code);
}

fn fail_input(err: &anyhow::Error) -> i32 {
    eprintln!("error: {err:#}");
    1
}

fn run_solve_batch(
    files: &[PathBuf],
    method: Option<Method>,
    tol: f64,
    max_iter: Option<usize>,
    trace: Option<PathBuf>,
    json: Option<PathBuf>,
    jobs: usize,
) -> i32 {
    if files.is_empty() {
        return fail_input(&anyhow!("no problem files given"));
    }
    if files.len() > 1 && (trace.is_some() || json.is_some()) {
        return fail_input(&anyhow!("--trace/--json apply to a single file; use [outputs] for batches"));
    }
    if files.len() == 1 || jobs <= 1 {
        let mut worst = 0;
        for f in files {
            worst = worst.max(solve_one(f, method, tol, max_iter, trace.as_deref(), json.as_deref()));
        }
        return worst;
    }
    // run independent instances in parallel; outputs come from each file's
    // own [outputs] section
    let codes: Vec<i32> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in files.chunks(files.len().div_ceil(jobs)) {
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(|f| solve_one(f, method, tol, max_iter, None, None))
                    .max()
                    .unwrap_or(0)
            }));
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    codes.into_iter().max().unwrap_or(0)
}

fn solve_one(
    path: &Path,
    method: Option<Method>,
    tol: f64,
    max_iter: Option<usize>,
    trace_flag: Option<&Path>,
    json_flag: Option<&Path>,
) -> i32 {
    match solve_inner(path, method, tol, max_iter, trace_flag, json_flag) {
        Ok(code) => code,
        Err(err) => fail_input(&err),
    }
}

fn proxy_params(file: &ProblemFile, max_iter: Option<usize>) -> ProxParams {
    let s = &file.solver;
    let mut p = ProxParams::default();
    if let Some(v) = s.tau {
        p.tau = v;
    }
    if let Some(v) = s.sigma {
        p.sigma = v;
    }
    if let Some(v) = s.lambda_max {
        p.lambda_max = v;
    }
    if let Some(v) = s.lambda0 {
        p.lambda0 = v;
    }
    if let Some(v) = s.stop_tol {
        p.stop_tol = v;
    }
    if let Some(v) = s.max_iter {
        p.max_iter = v;
    }
    if let Some(v) = s.max_backtracks {
        p.max_backtracks = v;
    }
    if let Some(v) = max_iter {
        p.max_iter = v;
    }
    p
}

fn default_start(built: &BuiltProblem) -> Result<DVector<f64>> {
    match &built.instance {
        Some(InstanceSpec::PhaseRetrieval { n, m, seed }) => {
            Ok(catalog::phase_retrieval_spectral_start(*n, *m, *seed))
        }
        Some(InstanceSpec::SpatialVi { producers, regions, seed }) => {
            Ok(catalog::spatial_vi_data(*producers, *regions, *seed).high_supply_start(10.0))
        }
        _ => qp::feasible_point(built.problem.domain())?
            .ok_or_else(|| anyhow!("the constraint set is empty")),
    }
}

fn termination_name(t: Termination) -> String {
    match t {
        Termination::StepConverged => "step_converged",
        Termination::ResidualConverged => "residual_converged",
        Termination::ModelStalled => "model_stalled",
        Termination::MaxIterations => "max_iterations",
        Termination::BacktrackLimit => "backtrack_limit",
    }
    .to_string()
}

fn write_trace_csv(path: &Path, traces: &[&SolveTrace]) -> Result<()> {
    let mut out = fs::File::create(path)
        .with_context(|| format!("creating trace file {}", path.display()))?;
    writeln!(out, "iter,phi,lambda,step_norm,residual,backtracks")?;
    let mut counter = 0usize;
    for t in traces {
        for r in &t.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                counter, r.phi, r.lambda, r.step_norm, r.residual, r.backtracks
            )?;
            counter += 1;
        }
    }
    Ok(())
}

fn solve_inner(
    path: &Path,
    method: Option<Method>,
    tol: f64,
    max_iter: Option<usize>,
    trace_flag: Option<&Path>,
    json_flag: Option<&Path>,
) -> Result<i32> {
    let started = Instant::now();
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file = problem_file::parse(&text)?;
    let built = problem_file::build(&file)?;
    let problem = &built.problem;

    let method = method.unwrap_or(match file.solver.method.as_deref() {
        Some("prox") | None => Method::Prox,
        Some("approx") => Method::Approx,
        Some("alm") => Method::Alm,
        Some(other) => bail!("in [solver]: unknown method '{other}'"),
    });
    let params = proxy_params(&file, max_iter);
    let x0 = match &file.solver.x0 {
        Some(v) => DVector::from_vec(v.clone()),
        None => default_start(&built)?,
    };

    let trace_path: Option<PathBuf> = trace_flag
        .map(Path::to_path_buf)
        .or_else(|| file.outputs.as_ref().and_then(|o| o.trace.clone().map(PathBuf::from)));
    let json_path: Option<PathBuf> = json_flag
        .map(Path::to_path_buf)
        .or_else(|| file.outputs.as_ref().and_then(|o| o.json.clone().map(PathBuf::from)));

    let report;
    match method {
        Method::Prox => {
            let trace = prox::solve(problem, &params, &x0)?;
            let phi = problem.phi(trace.final_x())?.as_f64();
            report = Report::new(
                &built.name,
                "prox",
                termination_name(trace.termination),
                tol,
                trace.records.len(),
                phi,
                &trace.final_triple,
                started.elapsed().as_secs_f64() * 1e3,
            );
            if let Some(tp) = &trace_path {
                write_trace_csv(tp, &[&trace])?;
            }
        }
        Method::Approx => {
            let s = &file.solver;
            let kind = match s.schedule.as_deref() {
                Some("moreau") => ScheduleKind::MoreauSmoothing,
                Some("penalty") => ScheduleKind::ExactPenalty,
                Some(other) => bail!("in [solver]: unknown schedule '{other}'"),
                None => bail!("in [solver]: method 'approx' needs a schedule"),
            };
            let nu_list = s.nu_list.clone().ok_or_else(|| anyhow!("in [solver]: missing nu_list"))?;
            let eps_list =
                s.eps_list.clone().ok_or_else(|| anyhow!("in [solver]: missing eps_list"))?;
            let schedule = ApproxSchedule {
                kind,
                nu_list: nu_list.clone(),
                eps_list,
                theta_list: s.theta_list.clone(),
            };
            let traces = match kind {
                ScheduleKind::MoreauSmoothing => prox::consistent_solve(
                    prox::moreau_family(problem),
                    &schedule,
                    &params,
                    &x0,
                )?,
                ScheduleKind::ExactPenalty | ScheduleKind::Custom => {
                    let thetas = s
                        .theta_list
                        .clone()
                        .ok_or_else(|| anyhow!("in [solver]: penalty schedule needs theta_list"))?;
                    if thetas.len() != nu_list.len() {
                        bail!("in [solver]: theta_list length must match nu_list");
                    }
                    let by_nu: BTreeMap<u32, f64> =
                        nu_list.iter().cloned().zip(thetas.iter().cloned()).collect();
                    let yfull = problem.penalty().y_set().clone();
                    let qmat = problem.penalty().q().clone();
                    let family = move |nu: u32| {
                        let theta = by_nu[&nu];
                        let ynu = prox::penalty_family(&yfull, theta)?;
                        let h = PlqFunction::new(ynu, qmat.clone())
                            .map_err(prox::ProxError::Plq)?;
                        Ok(problem.with_penalty(h)?)
                    };
                    prox::consistent_solve(family, &schedule, &params, &x0)?
                }
            };
            let last = traces.last().expect("schedule is nonempty");
            let phi = problem.phi(&last.final_triple.x)?.as_f64();
            let iterations = traces.iter().map(|t| t.records.len()).sum();
            report = Report::new(
                &built.name,
                "approx",
                termination_name(last.termination),
                tol,
                iterations,
                phi,
                &last.final_triple,
                started.elapsed().as_secs_f64() * 1e3,
            );
            if let Some(tp) = &trace_path {
                let refs: Vec<&SolveTrace> = traces.iter().collect();
                write_trace_csv(tp, &refs)?;
            }
        }
        Method::Alm => {
            let s = &file.solver;
            let theta =
                s.theta.ok_or_else(|| anyhow!("in [solver]: method 'alm' needs theta"))?;
            let mut aug = AugParams::new(theta);
            if let Some(v) = s.lambda_step {
                aug.lambda_step = v;
            }
            if let Some(v) = s.outer_iters {
                aug.outer_iters = v;
            }
            aug.inner = params.clone();
            let y0 = match &s.y0 {
                Some(v) => DVector::from_vec(v.clone()),
                None => qp::project(
                    problem.penalty().y_set(),
                    &DVector::zeros(problem.output_dim()),
                )?,
            };
            let trace = duality::alm_solve(problem, &aug, &x0, &y0)?;
            let phi = problem.phi(&trace.final_triple.x)?.as_f64();
            report = Report::new(
                &built.name,
                "alm",
                "outer_loop_finished".to_string(),
                tol,
                trace.records.len(),
                phi,
                &trace.final_triple,
                started.elapsed().as_secs_f64() * 1e3,
            );
            if let Some(tp) = &trace_path {
                let mut out = fs::File::create(tp)
                    .with_context(|| format!("creating trace file {}", tp.display()))?;
                writeln!(out, "iter,phi,lambda,step_norm,residual,backtracks")?;
                let mut prev: Option<DVector<f64>> = None;
                for r in &trace.records {
                    let step = prev.as_ref().map_or(0.0, |p| (&r.x - p).norm());
                    writeln!(
                        out,
                        "{},{},{},{},{},0",
                        r.outer,
                        r.phi.as_f64(),
                        theta,
                        step,
                        r.residual
                    )?;
                    prev = Some(r.x.clone());
                }
            }
        }
    }

    let body = report.to_json();
    match &json_path {
        Some(p) => fs::write(p, body + "\n")
            .with_context(|| format!("writing report {}", p.display()))?,
        None => println!("{body}"),
    }
    Ok(if report.converged { 0 } else { 2 })
}

fn run_check(path: &Path, what: What) -> i32 {
    let inner = || -> Result<checks::CheckOutcome> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let file = problem_file::parse(&text)?;
        let built = problem_file::build(&file)?;
        match what {
            What::Subgradient => checks::subgradient_check(&built, file.meta.seed),
            What::Duality => checks::duality_check(&built, file.meta.seed),
            What::Tilt => checks::tilt_check(&built),
        }
    };
    match inner() {
        Err(err) => fail_input(&err),
        Ok(outcome) => {
            match &outcome {
                checks::CheckOutcome::Pass => println!("check: PASS"),
                checks::CheckOutcome::Fail => println!("check: FAIL"),
                checks::CheckOutcome::Unsupported(why) => println!("check: unsupported ({why})"),
            }
            outcome.exit_code()
        }
    }
}
