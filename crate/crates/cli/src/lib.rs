//! `ctp` command-line front end: solve built-in problems, replay the
//! closed-form AKKT sequences, and evaluate residuals of user-supplied data.

pub mod report;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ctp_core::residuals::DEFAULT_COMP_TOL;
use ctp_core::{
    akkt_sequence_report, akkt_trend, build, diagnose, diagnose_trace, kkt_residual, min_kkt_stationarity,
    closed_form_sequence, solve, AlmConfig, BuiltinProblemId, CqThresholds, CtpProblem, MultiplierPath, SolverStatus,
    TimeGrid, Trajectory,
};
use ctp_core::problems::sequence_notes;

use report::{Format, GridInfo, IterationRow, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_KKT: i32 = 2;
pub const EXIT_ITERATION_CAP: i32 = 3;
pub const EXIT_UNBOUNDED: i32 = 4;

pub fn exit_code(status: SolverStatus) -> i32 {
    match status {
        SolverStatus::ConvergedKkt => EXIT_OK,
        SolverStatus::AkktNoKktProgress | SolverStatus::PenaltyCapReached => EXIT_NO_KKT,
        SolverStatus::IterationCapReached => EXIT_ITERATION_CAP,
        SolverStatus::UnboundedBelowSuspected => EXIT_UNBOUNDED,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctp", version, about = "Continuous-time programs: ALM solver, KKT residuals, CQ diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a built-in problem with the safeguarded augmented Lagrangian method.
    Solve(SolveArgs),
    /// Residuals and CQ verdicts along a closed-form AKKT sequence.
    Sequence(SequenceArgs),
    /// Residuals of a trajectory and multiplier pair read from node tables.
    Residual(ResidualArgs),
    /// Write the analytic reference trajectory and multipliers as node tables.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

fn problem_id(s: &str) -> Result<BuiltinProblemId, String> {
    s.parse().map_err(|_| {
        let ids: Vec<&str> = BuiltinProblemId::ALL.iter().map(|id| id.as_str()).collect();
        format!("unknown problem {s:?}; expected one of {}", ids.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_parser = problem_id)]
    pub problem: BuiltinProblemId,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    /// Stopping tolerance on the KKT residual.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub rho_growth: f64,
    /// Box bound for both multiplier safeguards.
    #[arg(long, default_value_t = 1e8)]
    pub safeguard: f64,
    /// Write the final trajectory as a node table.
    #[arg(long)]
    pub x_out: Option<PathBuf>,
    /// Write the final multipliers as a node table.
    #[arg(long)]
    pub mult_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    #[arg(long, value_parser = problem_id)]
    pub problem: BuiltinProblemId,
    #[arg(long, default_value_t = 20)]
    pub k_max: u64,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[arg(long, value_parser = problem_id)]
    pub problem: BuiltinProblemId,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub mult: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[arg(long, value_parser = problem_id)]
    pub problem: BuiltinProblemId,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long)]
    pub x_out: PathBuf,
    /// Multipliers; zeros when the problem has no analytic multipliers.
    #[arg(long)]
    pub mult_out: PathBuf,
}

/// Parses `args` (program name first) and runs the command. Reports go to
/// `out` unless `--out` is given; diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let arguments: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, arguments, out),
        Command::Sequence(a) => cmd_sequence(&a, arguments, out),
        Command::Residual(a) => cmd_residual(&a, arguments, out),
        Command::Reference(a) => cmd_reference(&a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn grid_for(problem: &CtpProblem, id: BuiltinProblemId, nodes: usize) -> Result<TimeGrid, String> {
    if id == BuiltinProblemId::Example2 && nodes % 2 == 1 {
        return Err(format!(
            "example2 needs an even --nodes so that no node sits on the singularity at t = 1/2 (got {nodes})"
        ));
    }
    problem.grid(nodes).map_err(|e| e.to_string())
}

fn emit(report: &RunReport, output: &OutputArgs, out: &mut dyn Write) -> Result<(), String> {
    let text = report.render(output.format)?;
    match &output.out {
        Some(path) => write_file(path, &text),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn elapsed(start: Instant, output: &OutputArgs) -> Option<f64> {
    output.timing.then(|| start.elapsed().as_secs_f64())
}

fn primal_error(reference: Option<&Trajectory>, x: &Trajectory) -> Option<f64> {
    reference.and_then(|r| r.sup_distance(x).ok())
}

pub fn cmd_solve(args: &SolveArgs, arguments: Vec<String>, out: &mut dyn Write) -> Result<i32, String> {
    let start = Instant::now();
    let problem = build(args.problem);
    let grid = grid_for(&problem, args.problem, args.nodes)?;
    let config = AlmConfig {
        n_nodes: args.nodes,
        rho0: args.rho0,
        rho_growth: args.rho_growth,
        u_safeguard: args.safeguard,
        v_safeguard: args.safeguard,
        outer_max: args.max_outer,
        stop_tol: args.tol,
        ..AlmConfig::default()
    };
    let trace = solve(&problem, &config).map_err(|e| e.to_string())?;
    let cq = diagnose_trace(&problem, &trace, &CqThresholds::default()).map_err(|e| e.to_string())?;
    let reference = problem.reference_trajectory(&grid).transpose().map_err(|e| e.to_string())?;

    let iterations: Vec<IterationRow> = trace
        .iterates
        .iter()
        .enumerate()
        .map(|(k, it)| IterationRow {
            rho: Some(it.rho),
            inner_iterations: Some(it.inner_iterations),
            primal_error: primal_error(reference.as_ref(), &it.x),
            ..IterationRow::new(k as u64 + 1, &it.report, it.mult.sup_norm())
        })
        .collect();

    let mut notes = Vec::new();
    let sups: Vec<f64> = iterations.iter().map(|r| r.mult_sup).collect();
    match trace.status {
        SolverStatus::AkktNoKktProgress | SolverStatus::PenaltyCapReached => {
            if let (Some(first), Some(last)) = (sups.first(), sups.last()) {
                notes.push(format!(
                    "multiplier sup-norm grew from {first:e} to {last:e} ({:.3}x) while stationarity and \
                     complementarity kept decreasing: no KKT point is being approached",
                    last / first
                ));
            }
        }
        SolverStatus::UnboundedBelowSuspected => {
            notes.push("an inner subproblem value fell below the unboundedness threshold".into());
        }
        SolverStatus::IterationCapReached => {
            notes.push(format!("outer iteration cap {} reached", args.max_outer));
        }
        SolverStatus::ConvergedKkt => {}
    }

    if let Some(last) = trace.last() {
        if let Some(path) = &args.x_out {
            write_file(path, &table::write_trajectory(&last.x))?;
        }
        if let Some(path) = &args.mult_out {
            write_file(path, &table::write_multipliers(&last.mult))?;
        }
    }

    let report = RunReport {
        problem: problem.name().to_string(),
        command: "solve".into(),
        arguments,
        grid: GridInfo {
            horizon: grid.horizon(),
            n_nodes: grid.n_nodes(),
        },
        status: trace.status.as_str().into(),
        iterations,
        min_kkt_stationarity: cq.limit_stationarity,
        akkt: None,
        cq: Some(cq),
        notes,
        wall_time_seconds: elapsed(start, &args.output),
    };
    emit(&report, &args.output, out)?;
    Ok(exit_code(trace.status))
}

pub fn cmd_sequence(args: &SequenceArgs, arguments: Vec<String>, out: &mut dyn Write) -> Result<i32, String> {
    let start = Instant::now();
    if !args.problem.has_sequence() {
        return Err(format!("{} has no closed-form AKKT sequence", args.problem));
    }
    if args.k_max == 0 {
        return Err("--k-max must be positive".into());
    }
    let problem = build(args.problem);
    let grid = grid_for(&problem, args.problem, args.nodes)?;
    let seq: Vec<(Trajectory, MultiplierPath)> = (1..=args.k_max)
        .map(|k| closed_form_sequence(args.problem, k, &grid))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let limit = problem
        .reference_trajectory(&grid)
        .ok_or_else(|| format!("{} has no reference trajectory", args.problem))?
        .map_err(|e| e.to_string())?;
    let reports = akkt_sequence_report(&problem, &seq).map_err(|e| e.to_string())?;
    let thresholds = CqThresholds::default();
    let trend = akkt_trend(&problem, &seq, &reports, &limit, thresholds.akkt_tol).map_err(|e| e.to_string())?;
    let cq = diagnose(&problem, &seq, &limit, &thresholds).map_err(|e| e.to_string())?;
    let limit_min = min_kkt_stationarity(&problem, &limit, DEFAULT_COMP_TOL).map_err(|e| e.to_string())?;

    let iterations = seq
        .iter()
        .zip(&reports)
        .enumerate()
        .map(|(k, ((x, m), r))| IterationRow {
            primal_error: primal_error(Some(&limit), x),
            ..IterationRow::new(k as u64 + 1, r, m.sup_norm())
        })
        .collect();

    let mut notes = sequence_notes(args.problem);
    if args.problem == BuiltinProblemId::Example2 {
        let (_, m) = seq.last().expect("k_max ≥ 1");
        notes.push(format!("largest sampled multiplier at k = {}: {:e}", args.k_max, m.v().sup_norm()));
    }
    if trend.certified && limit_min.value > thresholds.akkt_tol {
        notes.push(format!(
            "AKKT sequence converges to a point that is not a KKT point: distance to the multiplier cone is {:e}",
            limit_min.value
        ));
    }

    let report = RunReport {
        problem: problem.name().to_string(),
        command: "sequence".into(),
        arguments,
        grid: GridInfo {
            horizon: grid.horizon(),
            n_nodes: grid.n_nodes(),
        },
        status: if trend.certified { "akkt_certified" } else { "akkt_not_certified" }.into(),
        iterations,
        min_kkt_stationarity: Some(limit_min.value),
        akkt: Some(trend),
        cq: Some(cq),
        notes,
        wall_time_seconds: elapsed(start, &args.output),
    };
    emit(&report, &args.output, out)?;
    Ok(EXIT_OK)
}

fn read_table(path: &Path, width: usize, what: &str) -> Result<table::NodeRows, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    table::parse(&text, width).map_err(|e| format!("{what} file {}: {e}", path.display()))
}

pub fn cmd_residual(args: &ResidualArgs, arguments: Vec<String>, out: &mut dyn Write) -> Result<i32, String> {
    let start = Instant::now();
    let problem = build(args.problem);
    let xs = read_table(&args.x, problem.n(), "trajectory")?;
    let grid = problem.grid(xs.rows.len()).map_err(|e| e.to_string())?;
    table::check_times(&xs, &grid).map_err(|e| format!("trajectory file {}: {e}", args.x.display()))?;
    let ms = read_table(&args.mult, problem.p() + problem.m(), "multiplier")?;
    table::check_times(&ms, &grid).map_err(|e| format!("multiplier file {}: {e}", args.mult.display()))?;

    let x = Trajectory::from_rows(&grid, problem.n(), &xs.rows).map_err(|e| e.to_string())?;
    let (u_rows, v_rows): (Vec<Vec<f64>>, Vec<Vec<f64>>) = ms
        .rows
        .iter()
        .map(|r| (r[..problem.p()].to_vec(), r[problem.p()..].to_vec()))
        .unzip();
    let mult = MultiplierPath::from_rows(&grid, problem.p(), problem.m(), &u_rows, &v_rows).map_err(|e| e.to_string())?;

    let residual = kkt_residual(&problem, &x, &mult).map_err(|e| e.to_string())?;
    let min = min_kkt_stationarity(&problem, &x, DEFAULT_COMP_TOL).map_err(|e| e.to_string())?;
    let reference = problem.reference_trajectory(&grid).transpose().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    if min.infeasible {
        notes.push("trajectory violates a constraint; the cone distance certifies nothing".into());
    }
    let report = RunReport {
        problem: problem.name().to_string(),
        command: "residual".into(),
        arguments,
        grid: GridInfo {
            horizon: grid.horizon(),
            n_nodes: grid.n_nodes(),
        },
        status: if residual.is_kkt(ctp_core::residuals::DEFAULT_KKT_TOL) { "kkt" } else { "not_kkt" }.into(),
        iterations: vec![IterationRow {
            primal_error: primal_error(reference.as_ref(), &x),
            ..IterationRow::new(1, &residual, mult.sup_norm())
        }],
        min_kkt_stationarity: Some(min.value),
        akkt: None,
        cq: None,
        notes,
        wall_time_seconds: elapsed(start, &args.output),
    };
    emit(&report, &args.output, out)?;
    Ok(EXIT_OK)
}

pub fn cmd_reference(args: &ReferenceArgs) -> Result<i32, String> {
    let problem = build(args.problem);
    let grid = grid_for(&problem, args.problem, args.nodes)?;
    let x = problem
        .reference_trajectory(&grid)
        .ok_or_else(|| format!("{} has no reference solution", args.problem))?
        .map_err(|e| e.to_string())?;
    let mult = match problem.reference_pair(&grid) {
        Some(pair) => pair.map_err(|e| e.to_string())?.1,
        None => MultiplierPath::zeros(&grid, problem.p(), problem.m()),
    };
    write_file(&args.x_out, &table::write_trajectory(&x))?;
    write_file(&args.mult_out, &table::write_multipliers(&mult))?;
    Ok(EXIT_OK)
}
