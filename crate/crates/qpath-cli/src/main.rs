//! Command line front end: reads a JSON problem document, traces the exact
//! penalty path, and exports segments, point evaluations, or model-selection
//! profiles as machine-readable text.

mod document;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use document::{BuiltProblem, CliError, ProblemDocument};
use qpath::selection;
use qpath::{solve_path, PathOptions, QpProblem, SolutionPath};

#[derive(Parser)]
#[command(
    name = "qpath",
    version,
    about = "Exact penalty paths for constrained quadratic minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the whole path and write it segment by segment.
    Solve(SolveArgs),
    /// Tabulate rho, rss, df, cp over a grid joined with all breakpoints.
    Profile(ProfileArgs),
    /// Print the solution and active set at one penalty level.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem document (JSON).
    input: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Abort after this many segments.
    #[arg(long)]
    max_segments: Option<usize>,
    /// Residual classification tolerance factor.
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Event time comparison tolerance factor.
    #[arg(long)]
    tol_time: Option<f64>,
    /// Pivot magnitude tolerance factor.
    #[arg(long)]
    tol_pivot: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Penalty grid: comma separated levels, or a point count spread over
    /// the path's range.
    #[arg(long)]
    grid: Option<String>,
    /// Noise variance for the prediction score; estimated from the
    /// unpenalized fit when omitted.
    #[arg(long)]
    sigma2: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Penalty level to evaluate at.
    #[arg(long)]
    rho: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let informational = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

struct Prepared {
    problem: QpProblem,
    options: PathOptions,
    sigma2: Option<f64>,
    rho_grid: Option<Vec<f64>>,
}

fn prepare(common: &CommonArgs) -> Result<Prepared, CliError> {
    let text = fs::read_to_string(&common.input).map_err(|err| {
        CliError::Invalid(format!("cannot read {}: {err}", common.input.display()))
    })?;
    let built: BuiltProblem = ProblemDocument::parse(&text)?.build()?;

    let mut options = PathOptions::default();
    if let Some(value) = built.tolerances.residual {
        options.residual_tol_factor = value;
    }
    if let Some(value) = built.tolerances.time {
        options.time_tol_factor = value;
    }
    if let Some(value) = built.tolerances.pivot {
        options.pivot_tol_factor = value;
    }
    if let Some(limit) = built.max_segments {
        options.max_segments = Some(limit);
    }
    /* Flags override document options. */
    if let Some(value) = common.tol_residual {
        options.residual_tol_factor = value;
    }
    if let Some(value) = common.tol_time {
        options.time_tol_factor = value;
    }
    if let Some(value) = common.tol_pivot {
        options.pivot_tol_factor = value;
    }
    if let Some(limit) = common.max_segments {
        options.max_segments = Some(limit);
    }
    for (name, value) in [
        ("--tol-residual", options.residual_tol_factor),
        ("--tol-time", options.time_tol_factor),
        ("--tol-pivot", options.pivot_tol_factor),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(CliError::Invalid(format!(
                "{name} must be a positive finite number, got {value}"
            )));
        }
    }

    Ok(Prepared {
        problem: built.problem,
        options,
        sigma2: built.sigma2,
        rho_grid: built.rho_grid,
    })
}

fn solve(prep: &Prepared) -> Result<SolutionPath, CliError> {
    solve_path(&prep.problem, &prep.options).map_err(|err| CliError::Solver(err.to_string()))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|err| CliError::Invalid(format!("cannot write {}: {err}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| CliError::Invalid(format!("serialization error: {err}")))?;
    text.push('\n');
    Ok(text)
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let prep = prepare(&args.common)?;
    let path = solve(&prep)?;
    let doc = document::path_document(&path, &prep.options);
    emit(&args.common.output, &to_json(&doc)?)
}

fn cmd_profile(args: ProfileArgs) -> Result<(), CliError> {
    let prep = prepare(&args.common)?;
    let path = solve(&prep)?;
    let grid = resolve_grid(args.grid.as_deref(), prep.rho_grid.as_deref(), &path)?;
    let sigma2 = args.sigma2.or(prep.sigma2);
    let diagnostics = selection::diagnostics(&prep.problem, &path, &grid, sigma2)
        .map_err(|err| CliError::Invalid(err.to_string()))?;
    let mut text = String::from("rho,rss,df,cp\n");
    for point in &diagnostics.points {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            point.rho, point.rss, point.df, point.cp
        );
    }
    emit(&args.common.output, &text)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if !(args.rho.is_finite() && args.rho >= 0.0) {
        return Err(CliError::Invalid(format!(
            "--rho must be a nonnegative finite number, got {}",
            args.rho
        )));
    }
    let prep = prepare(&args.common)?;
    let path = solve(&prep)?;
    let doc = document::eval_document(&path, args.rho);
    emit(&args.common.output, &to_json(&doc)?)
}

/// Resolves the profile grid: an explicit flag beats a grid stored in the
/// document, which beats an evenly spaced default over the path's range.
fn resolve_grid(
    flag: Option<&str>,
    doc_grid: Option<&[f64]>,
    path: &SolutionPath,
) -> Result<Vec<f64>, CliError> {
    let grid = match flag {
        Some(text) => parse_grid(text, path)?,
        None => match doc_grid {
            Some(grid) => grid.to_vec(),
            None => even_grid(path, 40),
        },
    };
    if grid.is_empty() {
        return Err(CliError::Invalid("profile grid is empty".into()));
    }
    for &rho in &grid {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(CliError::Invalid(format!(
                "grid levels must be nonnegative finite numbers, got {rho}"
            )));
        }
    }
    Ok(grid)
}

fn parse_grid(text: &str, path: &SolutionPath) -> Result<Vec<f64>, CliError> {
    let trimmed = text.trim();
    if !trimmed.contains(',') {
        if let Ok(count) = trimmed.parse::<usize>() {
            if count == 0 {
                return Err(CliError::Invalid(
                    "grid point count must be positive".into(),
                ));
            }
            return Ok(even_grid(path, count));
        }
    }
    trimmed
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|err| CliError::Invalid(format!("bad grid level {part:?}: {err}")))
        })
        .collect()
}

/* A grid that always reaches past the last breakpoint, so the constrained
terminal model appears in the profile. */
fn even_grid(path: &SolutionPath, count: usize) -> Vec<f64> {
    let span = 1.2 * path.terminal_rho.max(1.0);
    if count == 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| span * i as f64 / (count - 1) as f64)
        .collect()
}
