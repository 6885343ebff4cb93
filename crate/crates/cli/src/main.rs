//! `sgfem run` executes one adaptive run; `sgfem sweep` runs a grid of
//! marking parameters and writes one trace per point plus a summary.
//!
//! Exit codes: 0 tolerance reached, 2 a cap stopped a run, 1 error,
//! 64 bad command line.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sgfem::driver::{attach_reference, fit_rate, run_adaptive, AdaptiveTrace, StopReason};
use sgfem::marking::Criterion;

use config::{parse_criteria, parse_grid, read_config, Overrides, RunConfig};
use output::{csv_bytes, json_bytes, json_path, summary_bytes, write_atomic, SummaryRow};

const EXIT_CAP: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "sgfem", version, about = "Adaptive stochastic Galerkin FEM for parametric diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive algorithm once.
    Run(RunArgs),
    /// Run a grid of criteria and marking parameters.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    vartheta: Option<f64>,
    /// Stop once the estimate is at most this.
    #[arg(long)]
    tol: Option<f64>,
    /// Decay exponent of the coefficient modes.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, conflicts_with = "amplitude", allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    /// `lshape` or a mesh file.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_dof: Option<usize>,
    /// Compute a reference solution and effectivity indices.
    #[arg(long)]
    with_reference: bool,
    #[arg(long)]
    reference_max_dof: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    criterion: Option<Criterion>,
    #[arg(long)]
    theta_x: Option<f64>,
    #[arg(long)]
    theta_p: Option<f64>,
    /// CSV trace path; a JSON dump goes next to it. Defaults to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated list, e.g. `A,D`.
    #[arg(long)]
    criterion: Option<String>,
    /// A value, a list `0.1,0.5` or a range `0.1..0.9[:step]`.
    #[arg(long)]
    theta_x: Option<String>,
    #[arg(long)]
    theta_p: Option<String>,
    #[arg(long, default_value = "sweep")]
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("SGFEM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("SGFEM_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply(&read_config(path)?);
    }
    cfg.apply(&Overrides {
        vartheta: common.vartheta,
        tol: common.tol,
        sigma: common.sigma,
        tau: common.tau,
        amplitude: common.amplitude,
        mesh: common.mesh.clone(),
        solver_tol: common.solver_tol,
        max_iter: common.max_iter,
        max_dof: common.max_dof,
        with_reference: common.with_reference.then_some(true),
        reference_max_dof: common.reference_max_dof,
        ..Default::default()
    });
    Ok(cfg)
}

/// A finished run, or the error together with whatever trace exists.
struct Outcome {
    trace: AdaptiveTrace,
    error: Option<anyhow::Error>,
}

fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.problem()?;
    let mesh = cfg.initial_mesh()?;
    let opts = cfg.options();
    let mut trace = match run_adaptive(&spec, mesh, cfg.criterion, cfg.params(), &opts) {
        Ok(t) => t,
        Err(failure) => {
            let failure = *failure;
            return Ok(Outcome {
                trace: failure.trace,
                error: Some(failure.error.into()),
            });
        }
    };
    let mut error = None;
    if cfg.with_reference {
        if let Err(e) = attach_reference(&mut trace, &spec, &opts.solver(), cfg.reference_max_dof) {
            error = Some(anyhow::Error::from(e).context("reference solution"));
        }
    }
    Ok(Outcome { trace, error })
}

fn describe(cfg: &RunConfig, trace: &AdaptiveTrace) -> String {
    let last = trace.records.last();
    let mut s = format!(
        "criterion {} theta_x {} theta_p {}: {} iterations, eta {:.4e}, N {}, cost {}",
        cfg.criterion,
        cfg.theta_x,
        cfg.theta_p,
        trace.records.len(),
        last.map_or(f64::NAN, |r| r.eta),
        last.map_or(0, |r| r.n_total),
        trace.cost
    );
    if let Ok(rate) = fit_rate(trace) {
        s.push_str(&format!(", rate {rate:.3}"));
    }
    if let Some(q) = trace.max_convergence_ratio {
        s.push_str(&format!(", max error ratio {q:.3}"));
    }
    s
}

fn stop_code(trace: &AdaptiveTrace) -> u8 {
    match trace.stop {
        Some(StopReason::Tolerance) => 0,
        Some(StopReason::MaxIter | StopReason::MaxDof) => EXIT_CAP,
        None => 1,
    }
}

fn write_outputs(cfg: &RunConfig, trace: &AdaptiveTrace, csv: &Path) -> Result<()> {
    write_atomic(csv, &csv_bytes(trace)?)?;
    write_atomic(&json_path(csv), &json_bytes(cfg, trace)?)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = base_config(&args.common)?;
    cfg.apply(&Overrides {
        criterion: args.criterion,
        theta_x: args.theta_x,
        theta_p: args.theta_p,
        output: args.output,
        ..Default::default()
    });
    let outcome = execute(&cfg)?;
    match &cfg.output {
        Some(path) => write_outputs(&cfg, &outcome.trace, path)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&csv_bytes(&outcome.trace)?)?;
        }
    }
    if let Some(e) = outcome.error {
        return Err(e);
    }
    eprintln!("{}", describe(&cfg, &outcome.trace));
    Ok(ExitCode::from(stop_code(&outcome.trace)))
}

fn point_file(cfg: &RunConfig) -> String {
    format!("{}_tx{}_tp{}.csv", cfg.criterion, cfg.theta_x, cfg.theta_p)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let base = base_config(&args.common)?;
    let criteria = match &args.criterion {
        Some(s) => parse_criteria(s)?,
        None => vec![base.criterion],
    };
    let grid = |s: &Option<String>, default: f64| -> Result<Vec<f64>> {
        s.as_deref().map_or(Ok(vec![default]), parse_grid)
    };
    let theta_x = grid(&args.theta_x, base.theta_x).context("--theta-x")?;
    let theta_p = grid(&args.theta_p, base.theta_p).context("--theta-p")?;
    let mut points = Vec::new();
    for &criterion in &criteria {
        for &tx in &theta_x {
            for &tp in &theta_p {
                let mut cfg = base.clone();
                cfg.criterion = criterion;
                cfg.theta_x = tx;
                cfg.theta_p = tp;
                cfg.output = Some(args.output_dir.join(point_file(&cfg)));
                points.push(cfg);
            }
        }
    }
    // validate the problem once before spending time on the grid
    base.problem()?;

    let rows: Vec<(SummaryRow, u8)> = points
        .into_par_iter()
        .map(|cfg| {
            let file = point_file(&cfg);
            let path = cfg.output.clone().expect("set above");
            let outcome = execute(&cfg).and_then(|o| {
                write_outputs(&cfg, &o.trace, &path)?;
                Ok(o)
            });
            match outcome {
                Ok(Outcome { trace, error: None }) => {
                    eprintln!("{}", describe(&cfg, &trace));
                    let code = stop_code(&trace);
                    let row = SummaryRow {
                        stop: trace.stop.map_or("error".into(), |s| format!("{s:?}").to_lowercase()),
                        iterations: trace.last_iter().map(|l| l + 1),
                        final_eta: trace.records.last().map(|r| r.eta),
                        cost: Some(trace.cost),
                        rate: fit_rate(&trace).ok(),
                        config: cfg,
                        file,
                    };
                    (row, code)
                }
                Ok(Outcome { error: Some(e), trace }) => {
                    eprintln!("error in {file}: {e:#}");
                    let row = SummaryRow {
                        stop: "error".into(),
                        iterations: Some(trace.records.len()),
                        final_eta: trace.records.last().map(|r| r.eta),
                        cost: Some(trace.cost),
                        rate: None,
                        config: cfg,
                        file,
                    };
                    (row, 1)
                }
                Err(e) => {
                    eprintln!("error in {file}: {e:#}");
                    let row = SummaryRow {
                        stop: "error".into(),
                        iterations: None,
                        final_eta: None,
                        cost: None,
                        rate: None,
                        config: cfg,
                        file,
                    };
                    (row, 1)
                }
            }
        })
        .collect();
    let code = if rows.iter().any(|r| r.1 == 1) {
        1
    } else {
        rows.iter().map(|r| r.1).max().unwrap_or(0)
    };
    let rows: Vec<SummaryRow> = rows.into_iter().map(|r| r.0).collect();
    write_atomic(&args.output_dir.join("summary.csv"), &summary_bytes(&rows))?;
    Ok(ExitCode::from(code))
}
