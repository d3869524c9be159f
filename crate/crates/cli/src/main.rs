//! Command-line front end: solve built-in or file-defined problems, emit
//! convergence tables, and dump differentiation matrices.
//!
//! Exit codes: 0 success, 2 validation error, 3 solver failure, 4 I/O
//! error. Every failure also prints a one-line JSON diagnostic to stderr:
//! `{"error":{"code":N,"kind":"...","message":"..."}}`.

mod problem;

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use chebdq::bench::{
    builtin, run_table, solve_builtin, table_to_csv, table_to_json, ProblemId, Table,
};
use chebdq::bvp_linear::{solve_linear, Solution};
use chebdq::bvp_nonlinear::newton_solve;
use chebdq::chebgrid::Grid;
use chebdq::diffmat::{first_derivative_explicit, higher_order, matrix_to_csv};
use chebdq::Error;

use problem::{parse_problem, LoadedProblem};

#[derive(Parser)]
#[command(
    name = "chebdq",
    version,
    about = "Chebyshev differential-quadrature solver for boundary and initial value problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem at one resolution and print the nodal solution
    Solve(SolveArgs),
    /// Error-norm table for a built-in problem over an N/epsilon lattice
    Table(TableArgs),
    /// Print a differentiation matrix as CSV (17 significant digits)
    Diffmat(DiffmatArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Built-in problem identifier (P1..P5)
    #[arg(long, value_name = "ID", conflicts_with = "file")]
    builtin: Option<String>,
    /// JSON problem definition (see README for the schema)
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
    /// Number of grid points
    #[arg(long)]
    n: usize,
    /// Perturbation parameter; overrides the file's value when both exist
    #[arg(long)]
    eps: Option<f64>,
    /// Write output to this path instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct TableArgs {
    /// Built-in problem identifier (P1..P5)
    #[arg(long, value_name = "ID")]
    builtin: String,
    /// Comma-separated grid sizes
    #[arg(long, default_value = "10,20,50")]
    n: String,
    /// Comma-separated perturbation parameters
    #[arg(long, default_value = "1e-1,1e-2,1e-3")]
    eps: String,
    /// Write output to this path instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct DiffmatArgs {
    /// Number of grid points
    #[arg(long)]
    n: usize,
    /// Derivative order (1..4)
    #[arg(long)]
    order: usize,
    /// Interval as "a,b" (default -1,1)
    #[arg(long, value_name = "A,B")]
    domain: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// A failure carrying its process exit code and machine-readable tag.
struct Failure {
    code: i32,
    kind: String,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "invalid-problem".to_string(),
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Failure {
            code: 4,
            kind: "io".to_string(),
            message: e.to_string(),
        }
    }

    fn json_line(&self) -> String {
        serde_json::json!({
            "error": {"code": self.code, "kind": self.kind, "message": self.message}
        })
        .to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::GridTooSmall(_)
            | Error::InvalidInterval { .. }
            | Error::NotCanonical(..)
            | Error::InvalidOrder(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::UnknownSymbol { .. }
            | Error::UnboundSymbol(_)
            | Error::Eval { .. }
            | Error::EvalAtNode { .. }
            | Error::InvalidProblem(_)
            | Error::UnknownProblem(_) => 2,
            Error::SingularMatrix { .. }
            | Error::NonFiniteNodeProduct(_)
            | Error::NotConverged { .. }
            | Error::OracleDisagreement { .. }
            | Error::StepSizeUnderflow(_) => 3,
        };
        Failure {
            code,
            kind: e.tag().to_string(),
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Table(args) => cmd_table(args),
        Command::Diffmat(args) => cmd_diffmat(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("{}", f.json_line());
            std::process::exit(f.code);
        }
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(Failure::io),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(Failure::io)
        }
    }
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SolveOutput<'a> {
    problem: &'a str,
    n: usize,
    epsilon: f64,
    residual_inf: f64,
    condition_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_converged: Option<bool>,
    nodes: &'a [f64],
    values: &'a [f64],
}

fn solution_csv(o: &SolveOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!("# problem: {}\n", o.problem));
    s.push_str(&format!("# n: {}\n", o.n));
    s.push_str(&format!("# epsilon: {}\n", o.epsilon));
    s.push_str(&format!("# residual_inf: {:.16e}\n", o.residual_inf));
    s.push_str(&format!(
        "# condition_estimate: {:.16e}\n",
        o.condition_estimate
    ));
    if let Some(iters) = o.newton_iterations {
        s.push_str(&format!("# newton_iterations: {iters}\n"));
    }
    if let Some(converged) = o.newton_converged {
        s.push_str(&format!("# newton_converged: {converged}\n"));
    }
    s.push_str("x,y\n");
    for (x, y) in o.nodes.iter().zip(o.values) {
        s.push_str(&format!("{x:.16e},{y:.16e}\n"));
    }
    s
}

fn cmd_solve(args: SolveArgs) -> Result<i32, Failure> {
    let (label, epsilon, solution, iterations, converged): (
        String,
        f64,
        Solution,
        Option<usize>,
        Option<bool>,
    ) = if let Some(id_text) = &args.builtin {
        let id: ProblemId = id_text.parse().map_err(Failure::from)?;
        let epsilon = args
            .eps
            .ok_or_else(|| Failure::validation("--eps is required with --builtin"))?;
        let sol = solve_builtin(id, args.n, epsilon).map_err(Failure::from)?;
        (id.to_string(), epsilon, sol, None, None)
    } else if let Some(path) = &args.file {
        let text = std::fs::read_to_string(path).map_err(Failure::io)?;
        let loaded = parse_problem(&text, args.eps).map_err(Failure::from)?;
        let label = path.display().to_string();
        match loaded {
            LoadedProblem::Linear(p) => {
                let sol = solve_linear(&p, args.n).map_err(Failure::from)?;
                (label, p.epsilon, sol, None, None)
            }
            LoadedProblem::Nonlinear(p, cfg) => {
                let (sol, report) = newton_solve(&p, args.n, &cfg).map_err(Failure::from)?;
                if !report.converged {
                    return Err(Failure::from(Error::NotConverged {
                        iterations: report.iterations,
                        residual: report.final_residual,
                    }));
                }
                (
                    label,
                    p.epsilon,
                    sol,
                    Some(report.iterations),
                    Some(report.converged),
                )
            }
        }
    } else {
        return Err(Failure::validation(
            "pass a problem: --builtin P1..P5 or --file PATH",
        ));
    };

    let output = SolveOutput {
        problem: &label,
        n: args.n,
        epsilon,
        residual_inf: solution.residual_inf,
        condition_estimate: solution.condition_estimate,
        newton_iterations: iterations,
        newton_converged: converged,
        nodes: &solution.grid.nodes,
        values: &solution.values,
    };
    let rendered = match args.format {
        Format::Csv => solution_csv(&output),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output)
                .expect("solution serialization cannot fail");
            s.push('\n');
            s
        }
    };
    write_output(&args.out, &rendered)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// table
// ---------------------------------------------------------------------------

fn parse_usize_list(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Failure::validation(format!("--n entry {t:?} is not a grid size")))
        })
        .collect()
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::validation(format!("--eps entry {t:?} is not a number")))
        })
        .collect()
}

fn cmd_table(args: TableArgs) -> Result<i32, Failure> {
    let id: ProblemId = args.builtin.parse().map_err(Failure::from)?;
    let n_list = parse_usize_list(&args.n)?;
    let eps_list = parse_f64_list(&args.eps)?;
    for &eps in &eps_list {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Failure::validation(format!(
                "--eps entries must be positive and finite, got {eps}"
            )));
        }
    }
    let bp = builtin(id, eps_list[0]).map_err(Failure::from)?;
    let table: Table = run_table(&bp, &n_list, &eps_list).map_err(Failure::from)?;
    let rendered = match args.format {
        Format::Csv => table_to_csv(&table),
        Format::Json => table_to_json(&table),
    };
    write_output(&args.out, &rendered)?;
    if table.succeeded() > 0 {
        Ok(0)
    } else {
        Err(Failure {
            code: 3,
            kind: "all-cells-failed".to_string(),
            message: format!("no ({id}, N, epsilon) cell produced a value"),
        })
    }
}

// ---------------------------------------------------------------------------
// diffmat
// ---------------------------------------------------------------------------

fn parse_domain(text: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Failure::validation(format!(
            "--domain must be \"a,b\", got {text:?}"
        )));
    }
    let a = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|_| Failure::validation(format!("domain endpoint {:?} is not a number", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|_| Failure::validation(format!("domain endpoint {:?} is not a number", parts[1])))?;
    Ok((a, b))
}

fn cmd_diffmat(args: DiffmatArgs) -> Result<i32, Failure> {
    let (a, b) = match &args.domain {
        Some(text) => parse_domain(text)?,
        None => (-1.0, 1.0),
    };
    let grid = Grid::on_interval(args.n, a, b).map_err(Failure::from)?;
    let d1 = first_derivative_explicit(&grid);
    let w = match args.order {
        1 => d1,
        order => higher_order(&d1, order).map_err(Failure::from)?,
    };
    write_output(&None, &matrix_to_csv(&w.weights))?;
    Ok(0)
}
