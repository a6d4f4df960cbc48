use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use footplan::error::PlanningFailure;
use footplan::formulation::{assemble, write_lp, VariableLayout};
use footplan::io::{load_plan, load_scenario_with_robot, plan_to_toml, render_svg};
use footplan::model::Scenario;
use footplan::planner::{plan_with_progress, validate_plan, PlanCheck, PlannerOptions};
use footplan::solver::{solve_miqp, MiqpLimits};
use footplan::Error;

mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const NOT_CONVERGED: u8 = 4;
    pub const LIMITS_HIT: u8 = 5;
    pub const INVALID_PLAN: u8 = 6;
    pub const USAGE: u8 = 64;
}

/// Binary-variable counts reported for horizons of 12, 24 and 36 steps in the
/// original hexapod experiments; printed next to ours for comparison.
const REFERENCE_BINARIES: [(usize, usize); 3] = [(12, 312), (24, 552), (36, 828)];

#[derive(Parser)]
#[command(name = "footplan", version, about = "Mixed-integer footstep planner for multilegged robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// Relative optimality gap at which each chunk stops.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Wall-clock limit per chunk, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Branch-and-bound node limit per chunk.
    #[arg(long, default_value_t = 200_000)]
    node_limit: usize,
    /// Relaxations solved in parallel per round (results depend on this count).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl SolveFlags {
    fn limits(&self) -> Result<MiqpLimits, Failure> {
        if !(self.gap >= 0.0) {
            return Err(Failure::usage(format!("--gap must be >= 0, got {}", self.gap)));
        }
        let time_limit = match self.time_limit {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Failure::usage(format!("--time-limit must be positive, got {t}")))
            }
            t => t.map(Duration::from_secs_f64),
        };
        Ok(MiqpLimits {
            gap_tol: self.gap,
            node_limit: self.node_limit,
            time_limit,
            workers: self.workers.max(1),
            ..MiqpLimits::default()
        })
    }
}

#[derive(Args, Clone)]
struct ScenarioArg {
    /// Scenario file.
    scenario: PathBuf,
    /// Robot preset to use instead of the one the scenario names.
    #[arg(long)]
    robot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan footsteps from a scenario's start to its goal.
    Plan {
        #[command(flatten)]
        input: ScenarioArg,
        /// Plan file to write.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// SVG rendering to write.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Chunk length in configurations.
        #[arg(long, default_value_t = 4)]
        chunk: usize,
        /// Record per-chunk wall time in the plan file (makes it non-reproducible).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        solve: SolveFlags,
    },
    /// Assemble and solve one MIQP per horizon and tabulate its size and cost.
    Bench {
        #[command(flatten)]
        input: ScenarioArg,
        /// Comma-separated horizons (steps), each a multiple of the leg count.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        /// CSV table to write.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Only assemble and count variables.
        #[arg(long)]
        no_solve: bool,
        #[command(flatten)]
        solve: SolveFlags,
    },
    /// Check a plan file against a scenario's exact geometry.
    Validate {
        plan: PathBuf,
        #[command(flatten)]
        input: ScenarioArg,
    },
    /// Write the scenario's MIQP in CPLEX LP format.
    ExportMip {
        #[command(flatten)]
        input: ScenarioArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Horizon in steps (defaults to the scenario's max_steps).
        #[arg(long)]
        horizon: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: exit::USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => exit::IO,
            Error::Parse(_) | Error::Config(_) | Error::Contract(_) | Error::Domain(_) => exit::PARSE,
            Error::InfeasibleScenario(_) | Error::Assembly(_) => exit::INFEASIBLE,
            Error::Planning { kind: PlanningFailure::Infeasible, .. } => exit::INFEASIBLE,
            Error::Planning { kind: PlanningFailure::LimitsHit, .. } => exit::LIMITS_HIT,
            Error::TooManyBinaries { .. } => exit::USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_context(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        if f.code == exit::IO {
            f.message = format!("{}: {}", path.display(), f.message);
        }
        f
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure { code: exit::IO, message: format!("{}: {e}", path.display()) })
}

fn read_scenario(input: &ScenarioArg) -> Result<Scenario, Failure> {
    load_scenario_with_robot(&input.scenario, input.robot.as_deref()).map_err(io_context(&input.scenario))
}

fn run_plan(
    input: &ScenarioArg,
    output: Option<&Path>,
    svg: Option<&Path>,
    chunk: usize,
    timing: bool,
    solve: &SolveFlags,
) -> Result<u8, Failure> {
    if chunk == 0 {
        return Err(Failure::usage("--chunk must be at least 1"));
    }
    let scenario = read_scenario(input)?;
    let options = PlannerOptions { chunk_multiplier: chunk, limits: solve.limits()?, ..PlannerOptions::default() };
    let result = plan_with_progress(&scenario, &options, |k, c| {
        eprintln!(
            "chunk {k}: {} steps ({} kept), {} binaries, {} nodes, {:.3} s, gap {:.2e}, {}",
            c.horizon,
            c.kept_steps,
            c.binaries,
            c.nodes,
            c.wall_time.as_secs_f64(),
            c.gap,
            c.status.as_str()
        );
    })?;
    println!(
        "{}: {} steps, CoC error {:.4} m, yaw error {:.4} rad",
        result.termination,
        result.steps.len(),
        result.coc_error,
        result.yaw_error
    );
    if let Some(path) = output {
        write_file(path, &plan_to_toml(&result, &scenario.robot, timing))?;
    }
    if let Some(path) = svg {
        write_file(path, &render_svg(&result, &scenario))?;
    }
    // A chunk stopped by a cap is reported even when the plan reached the goal.
    Ok(if result.limits_hit {
        exit::LIMITS_HIT
    } else if result.converged {
        exit::OK
    } else {
        exit::NOT_CONVERGED
    })
}

fn run_bench(
    input: &ScenarioArg,
    horizons: &[usize],
    output: Option<&Path>,
    no_solve: bool,
    solve: &SolveFlags,
) -> Result<u8, Failure> {
    if horizons.is_empty() {
        return Err(Failure::usage("--horizons needs at least one value"));
    }
    let scenario = read_scenario(input)?;
    let n = scenario.robot.n_legs;
    if let Some(h) = horizons.iter().find(|&&h| h == 0 || h % n != 0) {
        return Err(Failure::usage(format!("horizon {h} is not a positive multiple of {n} legs")));
    }
    let limits = solve.limits()?;
    let mut text = format!(
        "{:>8} {:>9} {:>10} {:>9} {:>10} {:>10} {:>10} {:>10}\n",
        "horizon", "binaries", "continuous", "reference", "nodes", "time_s", "gap", "status"
    );
    let mut csv = String::from("horizon,binaries,continuous,reference_binaries,nodes,time_s,gap,status\n");
    let mut worst = exit::OK;
    for &h in horizons {
        let sub = Scenario { max_steps: h, ..scenario.clone() };
        let problem = assemble(&sub)?;
        let layout = VariableLayout::new(h, n, sub.regions.len(), sub.n_segments);
        let (binaries, continuous) = (problem.binaries.len(), problem.continuous_count());
        if binaries != layout.binary_count() || continuous != layout.continuous_count() {
            return Err(Failure {
                code: exit::INFEASIBLE,
                message: format!("horizon {h}: assembled counts disagree with the layout"),
            });
        }
        let reference = REFERENCE_BINARIES
            .iter()
            .find(|(rh, _)| *rh == h)
            .map_or("-".to_string(), |(_, b)| b.to_string());
        let (nodes, time, gap, status) = if no_solve {
            ("-".to_string(), "-".to_string(), "-".to_string(), "not-solved".to_string())
        } else {
            let s = solve_miqp(&problem, &limits);
            if !s.status.is_solved() {
                worst = worst.max(if s.x.is_some() { exit::LIMITS_HIT } else { exit::INFEASIBLE });
            }
            (
                s.nodes.to_string(),
                format!("{:.3}", s.wall_time.as_secs_f64()),
                format!("{:.2e}", s.gap),
                s.status.as_str().to_string(),
            )
        };
        writeln!(
            text,
            "{h:>8} {binaries:>9} {continuous:>10} {reference:>9} {nodes:>10} {time:>10} {gap:>10} {status:>10}"
        )
        .unwrap();
        writeln!(csv, "{h},{binaries},{continuous},{reference},{nodes},{time},{gap},{status}").unwrap();
    }
    print!("{text}");
    if let Some(path) = output {
        write_file(path, &csv)?;
    }
    Ok(worst)
}

fn run_validate(plan_path: &Path, input: &ScenarioArg) -> Result<u8, Failure> {
    let scenario = read_scenario(input)?;
    let (plan, robot) = load_plan(plan_path).map_err(io_context(plan_path))?;
    if robot != scenario.robot {
        return Err(Failure {
            code: exit::PARSE,
            message: format!("plan was made for robot `{}`, scenario uses `{}`", robot.name, scenario.robot.name),
        });
    }
    let report = validate_plan(&plan, &scenario);
    for check in PlanCheck::ALL {
        let worst = report.worst[&check];
        let count = report.violations_of(check).count();
        let verdict = if count == 0 { "ok" } else { "FAIL" };
        if worst.is_finite() {
            println!("{:<13} {verdict:<4} worst excess {worst:+.3e}, {count} violations", check.as_str());
        } else {
            println!("{:<13} {verdict:<4} no steps", check.as_str());
        }
    }
    for v in report.violations.iter().take(20) {
        println!("  step {}: {} exceeded by {:.3e}", v.step, v.check.as_str(), v.amount);
    }
    Ok(if report.is_clean() { exit::OK } else { exit::INVALID_PLAN })
}

fn run_export(input: &ScenarioArg, output: &Path, horizon: Option<usize>) -> Result<u8, Failure> {
    let mut scenario = read_scenario(input)?;
    if let Some(h) = horizon {
        scenario.max_steps = h;
    }
    let problem = assemble(&scenario)?;
    write_file(output, &write_lp(&problem))?;
    println!(
        "wrote {} ({} variables, {} binaries, {} rows)",
        output.display(),
        problem.num_vars,
        problem.binaries.len(),
        problem.inequalities.len() + problem.equalities.len()
    );
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Plan { input, output, svg, chunk, timing, solve } => {
            run_plan(input, output.as_deref(), svg.as_deref(), *chunk, *timing, solve)
        }
        Command::Bench { input, horizons, output, no_solve, solve } => {
            run_bench(input, horizons, output.as_deref(), *no_solve, solve)
        }
        Command::Validate { plan, input } => run_validate(plan, input),
        Command::ExportMip { input, output, horizon } => run_export(input, output, *horizon),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
