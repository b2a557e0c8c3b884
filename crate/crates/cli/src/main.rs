use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use posecg::instance::{generate_with, parse_instance, Instance, InstanceFile, PartGraph, SyntheticConfig};
use posecg::oracle::{brute_force_solve, validate_solution};
use posecg::solution::SolutionFile;
use posecg::solver::{solve, SolveReport, SolverConfig};
use posecg::svg::render_svg;

/// Largest instance `check` runs without `--force`.
const CHECK_LIMIT: usize = 8;
const CHECK_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "posecg",
    version,
    about = "Two-tier multi-person pose association by column generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write the solution as JSON.
    Solve {
        instance: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Solve an instance and compare against brute-force enumeration.
    Check {
        instance: PathBuf,
        /// Run even when the instance is too large for a quick enumeration.
        #[arg(long)]
        force: bool,
        /// Solve with this omega while the oracle keeps the instance's own.
        #[arg(long, hide = true)]
        wrong_omega: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Draw a solution as SVG.
    Render {
        instance: PathBuf,
        solution: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// Override the per-pose cost.
    #[arg(long)]
    omega: Option<f64>,
    /// Reduced-cost tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Column generation iteration cap.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Skip odd-set row generation.
    #[arg(long)]
    no_triples: bool,
    /// Threads used for pricing.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Node cap of the final integer program.
    #[arg(long, default_value_t = 100_000)]
    ilp_nodes: usize,
    /// Reject unknown keys in the instance file.
    #[arg(long)]
    strict: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iters,
            tolerance: self.tol,
            enable_triples: !self.no_triples,
            ilp_node_cap: self.ilp_nodes,
            threads: self.threads,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Body14,
    Upper4,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    people: usize,
    /// Chance of each extra duplicate detection.
    #[arg(long, default_value_t = 0.3)]
    dup_rate: f64,
    /// Chance of each false positive trial.
    #[arg(long, default_value_t = 0.1)]
    fp_rate: f64,
    /// Probability that a minor part is visible.
    #[arg(long, default_value_t = 0.9)]
    visibility: f64,
    #[arg(long, value_enum, default_value_t = GraphKind::Body14)]
    graph: GraphKind,
    #[arg(long)]
    omega: Option<f64>,
    /// Keep at most this many detections.
    #[arg(long)]
    max_total: Option<usize>,
    /// Print detection counts per part.
    #[arg(long)]
    stats: bool,
    /// Output file; stdout if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failed command: message for stderr and the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure::new(2, message)
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POSECG_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            instance,
            output,
            solver,
        } => cmd_solve(&instance, output.as_deref(), &solver),
        Command::Gen(args) => cmd_gen(&args),
        Command::Check {
            instance,
            force,
            wrong_omega,
            solver,
        } => cmd_check(&instance, force, wrong_omega, &solver),
        Command::Render {
            instance,
            solution,
            output,
        } => cmd_render(&instance, &solution, output.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path, strict: bool) -> Result<Instance, Failure> {
    let text = read(path)?;
    let (inst, _) = parse_instance(&text, strict).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(inst)
}

/// Writes `text` to `path`, or to stdout without one.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(1, format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(1, format!("cannot write to stdout: {e}"))),
    }
}

/// Human-readable lines go to stdout unless stdout carries the data.
fn say(data_on_stdout: bool, line: &str) {
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn report_line(r: &SolveReport) -> String {
    format!(
        "objective={} columns={}+{} rows={} iters={} integral={} time={:.3}",
        r.ilp_objective,
        r.n_columns_global,
        r.n_columns_local,
        r.n_triple_rows,
        r.n_iterations,
        r.lp_integral,
        r.wall_time
    )
}

fn run_solver(inst: &Instance, args: &SolverArgs) -> Result<(posecg::solution::Solution, SolveReport), Failure> {
    solve(inst, &args.config()).map_err(|e| Failure::new(1, format!("solver failed: {e}")))
}

fn cmd_solve(path: &Path, output: Option<&Path>, args: &SolverArgs) -> CmdResult {
    let mut inst = load_instance(path, args.strict)?;
    if let Some(w) = args.omega {
        inst = inst.with_omega(w);
    }
    let (sol, report) = run_solver(&inst, args)?;
    let line = report_line(&report);
    let caps = report.caps_reached();
    emit(
        output,
        &SolutionFile::from_solution(&inst, &sol, Some(report)).to_json_pretty(),
    )?;
    say(output.is_none(), &line);
    if caps {
        say(
            output.is_none(),
            "warning: a cap was reached; the solution may not be optimal",
        );
        return Ok(3);
    }
    Ok(0)
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let mut cfg = SyntheticConfig::new(args.seed, args.people, args.dup_rate, args.fp_rate);
    cfg.visibility = args.visibility;
    cfg.max_total = args.max_total;
    cfg.graph = match args.graph {
        GraphKind::Body14 => PartGraph::body14(),
        GraphKind::Upper4 => PartGraph::upper4(),
    };
    if let Some(w) = args.omega {
        cfg.omega = w;
    }
    let inst = generate_with(&cfg);
    emit(
        args.output.as_deref(),
        &InstanceFile::from_instance(&inst).to_json_pretty(),
    )?;
    if args.stats {
        let g = inst.graph();
        let counts: BTreeMap<usize, usize> = (0..g.n_parts()).map(|p| (p, inst.detections_of(p).len())).collect();
        say(args.output.is_none(), &format!("detections={}", inst.n_detections()));
        for (p, n) in counts {
            say(args.output.is_none(), &format!("{} {n}", g.part_name(p)));
        }
    }
    Ok(0)
}

fn cmd_check(path: &Path, force: bool, wrong_omega: Option<f64>, args: &SolverArgs) -> CmdResult {
    let mut inst = load_instance(path, args.strict)?;
    if let Some(w) = args.omega {
        inst = inst.with_omega(w);
    }
    let n = inst.n_detections();
    if n > CHECK_LIMIT && !force {
        return Err(Failure::new(
            4,
            format!("refusing to enumerate {n} detections (limit {CHECK_LIMIT}); pass --force to run anyway"),
        ));
    }
    let oracle = brute_force_solve(&inst).map_err(|e| Failure::new(4, e.to_string()))?;
    let solved_on = match wrong_omega {
        Some(w) => inst.with_omega(w),
        None => inst.clone(),
    };
    let (sol, _) = run_solver(&solved_on, args)?;
    let mut problems = Vec::new();
    if (sol.objective - oracle.objective).abs() > CHECK_TOL {
        problems.push(format!(
            "objective mismatch: solver {} vs oracle {}",
            sol.objective, oracle.objective
        ));
    }
    if let Err(errs) = validate_solution(&inst, &sol, 1e-9) {
        problems.extend(errs);
    }
    if problems.is_empty() {
        println!("PASS solver={} oracle={}", sol.objective, oracle.objective);
        Ok(0)
    } else {
        println!("FAIL solver={} oracle={}", sol.objective, oracle.objective);
        for p in &problems {
            println!("  {p}");
        }
        Ok(1)
    }
}

fn cmd_render(inst_path: &Path, sol_path: &Path, output: Option<&Path>) -> CmdResult {
    let inst = load_instance(inst_path, false)?;
    let file =
        SolutionFile::parse(&read(sol_path)?).map_err(|e| Failure::input(format!("{}: {e}", sol_path.display())))?;
    let sol = file
        .to_solution(&inst)
        .map_err(|e| Failure::input(format!("{}: {e}", sol_path.display())))?;
    let svg = render_svg(&inst, &sol).map_err(|e| Failure::input(e.to_string()))?;
    emit(output, &svg)?;
    Ok(0)
}
