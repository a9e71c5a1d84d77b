//! Command-line interface.
//!
//! Subcommands: `solve` (full pipeline), `check` (feasibility only),
//! `sweep` (schedule of couplings), `scalar` (equal-coupling reduction),
//! and `gen` (graph generator). Reports go to standard output as JSON,
//! diagnostics to standard error.
//!
//! Exit codes: 0 success, 2 infeasible, 3 non-convergence, 4 input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::graph::Graph;
use crate::io::{self, GenConfig, GraphKind};
use crate::model::{self, ModelParams, VortexSet};
use crate::report::{Report, ScalarReport, SweepReportDoc};
use crate::solver::{self, SolveError, SolveOptions};
use crate::sweep::{self, SweepPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_INPUT_ERROR: i32 = 4;

#[derive(Parser)]
#[command(
    name = "vortexg",
    version,
    about = "Solve non-Abelian multiple vortex equations on finite weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the vortex system and write a full report.
    Solve(SolveArgs),
    /// Evaluate the existence threshold only.
    Check(CheckArgs),
    /// Solve a schedule of couplings approaching the existence boundary.
    Sweep(SweepArgs),
    /// Solve the equal-coupling scalar reduction.
    Scalar(ScalarArgs),
    /// Generate a graph file.
    Gen(GenArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Graph file.
    #[arg(short = 'g', long = "graph")]
    graph: PathBuf,
    /// Vortex file; omit for the vortex-free system.
    #[arg(short = 'v', long = "vortices")]
    vortices: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Residual sup-norm tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Maximum Newton iterations.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Group rank N (at least 2).
    #[arg(long = "N")]
    group_rank: u32,
    /// Squared mass m_e².
    #[arg(long)]
    me2: f64,
    /// Squared mass m_g².
    #[arg(long)]
    mg2: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Group rank N (at least 2).
    #[arg(long = "N")]
    group_rank: u32,
    /// Squared mass m_e².
    #[arg(long)]
    me2: f64,
    /// Squared mass m_g².
    #[arg(long)]
    mg2: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Group rank N (at least 2).
    #[arg(long = "N")]
    group_rank: u32,
    /// Equal-coupling schedule as multiples of λ* = 4πn/|V|,
    /// e.g. 1.5,1.2,1.05,1.01.
    #[arg(long, value_delimiter = ',', conflicts_with = "pairs")]
    lambda_factors: Option<Vec<f64>>,
    /// Explicit points as me2:mg2 pairs, e.g. 2.0:1.5,1.0:1.0.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ScalarArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Coupling λ₁.
    #[arg(long)]
    lambda1: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Graph family: path, cycle, complete, grid, or random-connected.
    kind: String,
    /// Vertex count.
    size: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform range lo,hi for vertex measures (default: all 1).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    mu_range: Option<Vec<f64>>,
    /// Uniform range lo,hi for edge weights (default: all 1).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    w_range: Option<Vec<f64>>,
    /// Output file; standard output when omitted.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

/// Run the CLI against explicit arguments and sinks. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            } else {
                let _ = write!(err, "{rendered}");
                EXIT_INPUT_ERROR
            };
        }
    };

    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args, out),
        Command::Check(args) => cmd_check(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Scalar(args) => cmd_scalar(args, out),
        Command::Gen(args) => cmd_gen(args, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

struct CmdError {
    code: i32,
    message: String,
}

impl CmdError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT_ERROR,
            message: message.into(),
        }
    }
}

impl From<io::IoError> for CmdError {
    fn from(e: io::IoError) -> Self {
        CmdError::input(e.to_string())
    }
}

impl From<model::ModelError> for CmdError {
    fn from(e: model::ModelError) -> Self {
        CmdError::input(e.to_string())
    }
}

impl From<SolveError> for CmdError {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::Infeasible { .. } => EXIT_INFEASIBLE,
            SolveError::MaxIterations { .. } | SolveError::Diverged(_) => EXIT_NO_CONVERGENCE,
            SolveError::InvalidOptions(_) | SolveError::Model(_) => EXIT_INPUT_ERROR,
            SolveError::Graph(_) => EXIT_NO_CONVERGENCE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::input(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(args: &InstanceArgs) -> Result<(Graph, VortexSet), CmdError> {
    let graph = io::parse_graph(&read_file(&args.graph)?)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.graph.display())))?;
    let vortices = match &args.vortices {
        Some(path) => io::parse_vortices(&read_file(path)?, &graph)
            .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?,
        None => VortexSet::empty(),
    };
    Ok((graph, vortices))
}

fn solve_options(args: &SolverArgs) -> SolveOptions {
    SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolveOptions::default()
    }
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> Result<i32, CmdError> {
    let (graph, vortices) = load_instance(&args.instance)?;
    let params = ModelParams::new(args.group_rank, args.me2, args.mg2)?;
    let opts = solve_options(&args.solver);
    let bg = model::background_field(&graph, &vortices)?;
    let solution = solver::solve_vortex_with_background(&graph, &params, &bg, &opts)?;
    let report = Report::from_solution(
        &graph,
        &params,
        vortices.vortex_number(),
        bg.u0(),
        &solution,
    );
    let _ = writeln!(out, "{}", report.to_json());
    Ok(EXIT_OK)
}

fn cmd_check(args: CheckArgs, out: &mut dyn Write) -> Result<i32, CmdError> {
    let (graph, vortices) = load_instance(&args.instance)?;
    let params = ModelParams::new(args.group_rank, args.me2, args.mg2)?;
    let feas = model::check_feasible(&graph, &params, vortices.vortex_number());
    let report = Report::feasibility_only(&graph, &params, vortices.vortex_number(), &feas);
    let _ = writeln!(out, "{}", report.to_json());
    Ok(if feas.feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<i32, CmdError> {
    let (graph, vortices) = load_instance(&args.instance)?;
    let opts = solve_options(&args.solver);
    let n = vortices.vortex_number();
    let plan = if let Some(factors) = &args.lambda_factors {
        if factors.is_empty() {
            return Err(CmdError::input("--lambda-factors needs at least one value"));
        }
        SweepPlan::from_lambda_factors(&graph, vortices, args.group_rank, factors, opts)
    } else if let Some(pairs) = &args.pairs {
        let mut points = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| CmdError::input(format!("expected me2:mg2, got {pair:?}")))?;
            let me2: f64 = a
                .parse()
                .map_err(|_| CmdError::input(format!("bad me2 value {a:?}")))?;
            let mg2: f64 = b
                .parse()
                .map_err(|_| CmdError::input(format!("bad mg2 value {b:?}")))?;
            points.push((me2, mg2));
        }
        SweepPlan::from_pairs(vortices, args.group_rank, points, opts)
    } else {
        return Err(CmdError::input(
            "either --lambda-factors or --pairs is required",
        ));
    };
    let report = sweep::run_sweep(&graph, &plan);
    let doc = SweepReportDoc::new(&graph, args.group_rank, n, &report);
    let _ = writeln!(out, "{}", doc.to_json());
    Ok(EXIT_OK)
}

fn cmd_scalar(args: ScalarArgs, out: &mut dyn Write) -> Result<i32, CmdError> {
    let (graph, vortices) = load_instance(&args.instance)?;
    let opts = solve_options(&args.solver);
    let bg = model::background_field(&graph, &vortices)?;
    let solution = solver::solve_scalar(&graph, args.lambda1, &vortices, &opts)?;
    let report = ScalarReport::from_solution(
        &graph,
        args.lambda1,
        vortices.vortex_number(),
        bg.u0(),
        &solution,
    );
    let _ = writeln!(out, "{}", report.to_json());
    Ok(EXIT_OK)
}

fn range_pair(name: &str, range: &Option<Vec<f64>>) -> Result<Option<(f64, f64)>, CmdError> {
    match range {
        None => Ok(None),
        Some(values) if values.len() == 2 => Ok(Some((values[0], values[1]))),
        Some(values) => Err(CmdError::input(format!(
            "{name} takes exactly two values lo,hi, got {}",
            values.len()
        ))),
    }
}

fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> Result<i32, CmdError> {
    let kind: GraphKind = args.kind.parse()?;
    let cfg = GenConfig {
        mu_range: range_pair("--mu-range", &args.mu_range)?,
        weight_range: range_pair("--w-range", &args.w_range)?,
        ..GenConfig::default()
    };
    let graph = io::generate(kind, args.size, args.seed, &cfg)?;
    let text = io::serialize_graph(&graph);
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CmdError::input(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(EXIT_OK)
}
