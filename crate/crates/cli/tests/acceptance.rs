//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

#[allow(dead_code)]
#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use footplan::formulation::{assemble, validate_assignment, VariableLayout};
use footplan::io::{load_scenario, load_scenario_with_robot};
use footplan::linearization::{PwlTable, TrigFn};
use footplan::model::Scenario;
use footplan::planner::{plan, validate_plan, FootstepPlan, PlannerOptions};
use footplan::solver::{brute_force_solve, solve_miqp, MiqpLimits, MiqpStatus};

/// Per-chunk wall-clock allowance for the stepping-stones course.
const CHUNK_BUDGET: Duration = Duration::from_secs(60);
/// Reported 24-step solve time of the original implementation, seconds.
const REFERENCE_CHUNK_SECONDS: f64 = 0.44;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn repo_root() -> PathBuf {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    root.canonicalize().unwrap_or(root)
}

fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(format!("{name}.toml"))
}

fn quadruped_path() -> PathBuf {
    repo_root().join("robots/littledog_quadruped.toml")
}

fn options() -> PlannerOptions {
    PlannerOptions {
        limits: MiqpLimits { time_limit: Some(CHUNK_BUDGET), workers: 1, ..MiqpLimits::default() },
        ..PlannerOptions::default()
    }
}

struct Run {
    label: &'static str,
    scenario: Scenario,
    plan: Result<FootstepPlan, String>,
}

fn run(label: &'static str, scenario: Scenario) -> Run {
    let plan = plan(&scenario, &options()).map_err(|e| e.to_string());
    Run { label, scenario, plan }
}

fn summary(plan: &FootstepPlan) -> String {
    format!(
        "{} steps, {} chunks, CoC error {:.4} m, yaw error {:.4} rad",
        plan.steps.len(),
        plan.chunks.len(),
        plan.coc_error,
        plan.yaw_error
    )
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let limits = MiqpLimits { gap_tol: 1e-9, ..MiqpLimits::default() };
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let p = common::random_miqp(seed, 8, 10);
        let exact = match brute_force_solve(&p) {
            Ok(s) if s.status == MiqpStatus::Optimal => s,
            other => {
                failures.push(format!("seed {seed}: enumeration gave {:?}", other.map(|s| s.status)));
                continue;
            }
        };
        let found = solve_miqp(&p, &limits);
        let diff = (found.objective - exact.objective).abs();
        worst = worst.max(diff);
        if !found.status.is_solved() || !(diff <= 1e-5) {
            failures.push(format!("seed {seed}: {} vs {}", found.objective, exact.objective));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && elapsed < 60.0;
    let mut detail = format!("100 random MIQPs vs enumeration: max |diff| {worst:.2e}, {elapsed:.1} s");
    if !failures.is_empty() {
        detail.push_str(&format!("; mismatches: {}", failures.join(", ")));
    }
    Outcome::new(pass, detail)
}

fn criterion_feasibility(runs: &[Run]) -> Outcome {
    let mut problems = Vec::new();
    let mut chunks = 0;
    for r in runs {
        let plan = match &r.plan {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("{}: {e}", r.label));
                continue;
            }
        };
        let report = validate_plan(plan, &r.scenario);
        if !report.is_clean() {
            problems.push(format!("{}: {} plan violations", r.label, report.violations.len()));
        }
        for (k, trace) in plan.traces.iter().enumerate() {
            chunks += 1;
            let clean = assemble(&trace.scenario)
                .and_then(|p| validate_assignment(&p, &trace.x, 1e-6))
                .map(|v| v.is_clean())
                .unwrap_or(false);
            if !clean {
                problems.push(format!("{} chunk {k}: assignment violations", r.label));
            }
        }
    }
    let detail = if problems.is_empty() {
        format!("{} plans, {chunks} chunk assignments, zero violations", runs.len())
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn criterion_pwl() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n_segments in [4usize, 8, 16] {
        let h = 2.0 * PI / n_segments as f64;
        let bound = h * h / 8.0 + 1e-12;
        let mut worst: f64 = 0.0;
        for kind in [TrigFn::Sin, TrigFn::Cos] {
            let table = PwlTable::build(kind, [-PI, PI], n_segments).expect("table builds");
            let grid = 100_000;
            for g in 0..=grid {
                let t = (-PI + 2.0 * PI * g as f64 / grid as f64).min(PI);
                let approx = table.eval(t).expect("inside range");
                worst = worst.max((approx - exact_trig(kind, t)).abs());
            }
        }
        pass &= worst <= bound;
        parts.push(format!("N_s={n_segments}: {worst:.4} <= {bound:.4}"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn exact_trig(kind: TrigFn, t: f64) -> f64 {
    match kind {
        TrigFn::Sin => t.sin(),
        TrigFn::Cos => t.cos(),
    }
}

fn criterion_stepping_stones(run: &Run) -> Outcome {
    let plan = match &run.plan {
        Ok(p) => p,
        Err(e) => return Outcome::new(false, format!("planning failed: {e}")),
    };
    let slowest = plan.chunks.iter().map(|c| c.wall_time).max().unwrap_or_default();
    let unsolved: Vec<String> = plan
        .chunks
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.status.is_solved() || c.wall_time > CHUNK_BUDGET)
        .map(|(k, c)| format!("chunk {k} {} after {:.1} s (gap {:.2e})", c.status.as_str(), c.wall_time.as_secs_f64(), c.gap))
        .collect();
    let regions = run.scenario.regions.len();
    let pass = plan.converged
        && plan.coc_error <= 0.05
        && plan.yaw_error <= 0.05
        && unsolved.is_empty()
        && regions == 13
        && (run.scenario.goal.yaw - FRAC_PI_4).abs() < 1e-12;
    let n = plan.n_legs;
    let yaw_gap: Vec<f64> = plan.steps.iter().step_by(n).map(|s| (s.theta - run.scenario.goal.yaw).abs()).collect();
    let monotone = yaw_gap.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let slowest_s = slowest.as_secs_f64();
    let mut detail = format!(
        "{}, {regions} regions; slowest chunk {slowest_s:.2} s = {:.0}x the reference {REFERENCE_CHUNK_SECONDS} s; yaw monotone: {}",
        summary(plan),
        slowest_s / REFERENCE_CHUNK_SECONDS,
        if monotone { "yes" } else { "no" }
    );
    if !unsolved.is_empty() {
        detail.push_str(&format!("; {}", unsolved.join(", ")));
    }
    Outcome::new(pass, detail)
}

fn criterion_rotation(run: &Run) -> Outcome {
    let plan = match &run.plan {
        Ok(p) => p,
        Err(e) => return Outcome::new(false, format!("planning failed: {e}")),
    };
    let final_yaw = plan.steps.last().map_or(run.scenario.start.yaw, |s| s.theta);
    let windows: Vec<String> =
        plan.chunks.iter().map(|c| format!("[{:.0}, {:.0}]", c.theta_range[0].to_degrees(), c.theta_range[1].to_degrees())).collect();
    let width = run.scenario.theta_range[1] - run.scenario.theta_range[0];
    let recentered = plan.chunks.len() > 1 && width < FRAC_PI_2;
    let pass = plan.converged && (final_yaw - FRAC_PI_2).abs() <= 0.05 && recentered;
    Outcome::new(pass, format!("final yaw {final_yaw:.4} rad, {}, heading windows (deg) {}", summary(plan), windows.join(" ")))
}

fn robot_specific_branches() -> Vec<String> {
    let mut hits = Vec::new();
    let mut files = Vec::new();
    for dir in ["crates/core/src", "crates/cli/src"] {
        collect_sources(&repo_root().join(dir), &mut files);
    }
    let names = ["hexapod", "quadruped", "littledog", "bh3r"];
    for file in files {
        let text = std::fs::read_to_string(&file).unwrap_or_default();
        let code = text.split("#[cfg(test)]").next().unwrap_or("");
        for (i, line) in code.lines().enumerate() {
            let line = line.split("//").next().unwrap_or("");
            let lower = line.to_lowercase();
            let squashed: String = lower.chars().filter(|c| !c.is_whitespace()).collect();
            let literal_leg_test = ["n_legs==", "n_legs!="].iter().any(|op| {
                squashed.match_indices(op).any(|(k, _)| squashed[k + op.len()..].starts_with(|c: char| c.is_ascii_digit() && c != '0'))
            });
            let match_on_legs = squashed.starts_with("match") && squashed.contains("n_legs");
            let named = names.iter().any(|n| lower.contains(n)) || squashed.contains(".name==");
            if literal_leg_test || match_on_legs || named {
                hits.push(format!("{}:{}", file.display(), i + 1));
            }
        }
    }
    hits
}

fn collect_sources(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    let mut entries: Vec<_> = entries.flatten().map(|e| e.path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_sources(&path, out);
        } else if path.extension().is_some_and(|e| e == "rs") {
            out.push(path);
        }
    }
}

fn criterion_generality(quadruped: &[&Run]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in quadruped {
        match &r.plan {
            Ok(p) => {
                let ok = p.converged && r.scenario.robot.n_legs == 4 && validate_plan(p, &r.scenario).is_clean();
                pass &= ok;
                parts.push(format!("{}: {}", r.label, summary(p)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", r.label));
            }
        }
    }
    let hits = robot_specific_branches();
    pass &= hits.is_empty();
    parts.push(if hits.is_empty() {
        "no robot-specific branches in library or CLI sources".to_string()
    } else {
        format!("robot-specific code at {}", hits.join(", "))
    });
    Outcome::new(pass, parts.join("; "))
}

fn footplan_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_footplan"))
}

fn criterion_counts() -> Outcome {
    let path = scenario_path("hexapod_stepping_stones");
    let scenario = load_scenario(&path).expect("bundled scenario loads");
    let output = footplan_bin().args(["bench"]).arg(&path).args(["--horizons", "12,24,36", "--no-solve"]).output();
    let output = match output {
        Ok(o) if o.status.success() => String::from_utf8_lossy(&o.stdout).into_owned(),
        Ok(o) => return Outcome::new(false, format!("bench exited with {:?}", o.status.code())),
        Err(e) => return Outcome::new(false, format!("bench did not start: {e}")),
    };
    let (n, n_r, n_s) = (scenario.robot.n_legs, scenario.regions.len(), scenario.n_segments);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rows = 0;
    for line in output.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [h, b, c, reference, ..] = cols[..] else { continue };
        let (Ok(h), Ok(b), Ok(c)) = (h.parse::<usize>(), b.parse::<usize>(), c.parse::<usize>()) else {
            pass = false;
            continue;
        };
        rows += 1;
        let configs = h / n;
        let binaries = h * n_r + 2 * configs * n_s + h;
        let continuous = 3 * h + 3 * configs;
        let layout = VariableLayout::new(h, n, n_r, n_s);
        pass &= b == binaries && c == continuous && layout.binary_count() == binaries && layout.continuous_count() == continuous;
        parts.push(format!("N={h}: {b} binaries / {c} continuous (reference {reference})"));
    }
    pass &= rows == 3;
    Outcome::new(pass, parts.join(", "))
}

fn criterion_trimming(run: &Run) -> Outcome {
    let plan = match &run.plan {
        Ok(p) => p,
        Err(e) => return Outcome::new(false, format!("planning failed: {e}")),
    };
    let n = plan.n_legs;
    let goals = run.scenario.leg_goals();
    let later = &plan.steps[n.min(plan.steps.len())..];
    let all_trimmed = !later.is_empty() && later.iter().all(|s| s.trimmed);
    let pin_error = plan
        .steps
        .iter()
        .filter(|s| s.trimmed)
        .map(|s| {
            let g = goals[s.leg - 1];
            (s.x - g[0]).abs().max((s.y - g[1]).abs()).max((s.z - g[2]).abs())
        })
        .fold(0.0, f64::max);
    let Some(trace) = plan.traces.first() else {
        return Outcome::new(false, "no chunk trace");
    };
    let problem = assemble(&trace.scenario).expect("chunk assembles");
    let layout = problem.layout.clone().expect("layout");
    let q_t = trace.scenario.weights.q_trim;
    let trim_vars: Vec<usize> = (0..layout.n_steps).map(|i| layout.trim(i)).collect();
    let count = trim_vars.iter().filter(|&&j| trace.x[j] == 1.0).count();
    let term: f64 = trim_vars.iter().map(|&j| problem.linear[j] * trace.x[j]).sum();
    let objective = problem.objective(&trace.x);
    let exact = term == q_t * count as f64;
    let dominated = (objective - term).abs() < term.abs();
    let pass = plan.converged && all_trimmed && pin_error <= 1e-6 && exact && dominated;
    Outcome::new(
        pass,
        format!(
            "{} of {} planned steps trimmed, all after the first configuration: {all_trimmed}; pin error {pin_error:.1e}; \
             trim term {term} = q_t x {count}; objective {objective:.6}",
            plan.steps.iter().filter(|s| s.trimmed).count(),
            plan.steps.len()
        ),
    )
}

fn criterion_determinism() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, format!("no temp dir: {e}")),
    };
    let path = scenario_path("hexapod_short_walk");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let plan_path = dir.path().join(format!("plan{k}.toml"));
        let svg_path = dir.path().join(format!("plan{k}.svg"));
        let status = footplan_bin()
            .arg("plan")
            .arg(&path)
            .arg("-o")
            .arg(&plan_path)
            .arg("--svg")
            .arg(&svg_path)
            .args(["--workers", "1"])
            .output();
        match status {
            Ok(o) if o.status.success() => {}
            Ok(o) => return Outcome::new(false, format!("plan exited with {:?}", o.status.code())),
            Err(e) => return Outcome::new(false, format!("plan did not start: {e}")),
        }
        let plan = std::fs::read(&plan_path).unwrap_or_default();
        let svg = std::fs::read(&svg_path).unwrap_or_default();
        outputs.push((plan, svg));
    }
    let same_plan = !outputs[0].0.is_empty() && outputs[0].0 == outputs[1].0;
    let same_svg = !outputs[0].1.is_empty() && outputs[0].1 == outputs[1].1;
    Outcome::new(
        same_plan && same_svg,
        format!(
            "plan file identical: {same_plan} ({} bytes), SVG identical: {same_svg} ({} bytes)",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn report(id: usize, title: &str, outcome: Outcome) -> bool {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{tag} [{id}] {title}: {}", outcome.detail);
    outcome.pass
}

fn main() {
    let hexapod = |name: &str| load_scenario(&scenario_path(name)).expect("bundled scenario loads");
    let quadruped = |name: &str| {
        load_scenario_with_robot(&scenario_path(name), Some(&quadruped_path())).expect("bundled scenario loads")
    };
    let runs = vec![
        run("hexapod stepping stones", hexapod("hexapod_stepping_stones")),
        run("hexapod rotation", hexapod("hexapod_rotation_90")),
        run("hexapod tilted terrain", hexapod("hexapod_tilted_terrain")),
        run("hexapod trim", hexapod("hexapod_trim")),
        run("hexapod short walk", hexapod("hexapod_short_walk")),
        run("quadruped stepping stones", quadruped("hexapod_stepping_stones")),
        run("quadruped tilted terrain", quadruped("hexapod_tilted_terrain")),
    ];

    let results = [
        report(1, "oracle equivalence", criterion_oracle()),
        report(2, "constraint feasibility", criterion_feasibility(&runs)),
        report(3, "PWL error bound", criterion_pwl()),
        report(4, "stepping stones", criterion_stepping_stones(&runs[0])),
        report(5, "90 degree rotation", criterion_rotation(&runs[1])),
        report(6, "generality", criterion_generality(&[&runs[5], &runs[6]])),
        report(7, "variable counts", criterion_counts()),
        report(8, "trimming", criterion_trimming(&runs[3])),
        report(9, "determinism", criterion_determinism()),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
