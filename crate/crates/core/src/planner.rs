//! Chunked planning: solve fixed-size horizons one after another, hand the
//! last configuration of each chunk to the next, and concatenate the steps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::time::Duration;

use crate::error::{Error, PlanningFailure, Result};
use crate::formulation::{assemble, VariableLayout};
use crate::model::{coc, leg_of, nominal_position, Footstep, Scenario, StartState, Xyz};
use crate::solver::{solve_miqp, MiqpLimits, MiqpStatus};

/// Tolerance for treating a trimmed step as not having moved.
const STATIONARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOptions {
    /// Chunk length in configurations; a chunk holds `chunk_multiplier * n_legs` steps.
    pub chunk_multiplier: usize,
    /// Converged when the final CoC is this close to the goal (meters, xy).
    pub goal_tol: f64,
    /// Converged when the final yaw is this close to the goal yaw (radians).
    pub yaw_tol: f64,
    /// A chunk must reduce the CoC distance or the yaw error by at least this much.
    pub progress_tol: f64,
    pub limits: MiqpLimits,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self { chunk_multiplier: 4, goal_tol: 0.05, yaw_tol: 0.05, progress_tol: 0.01, limits: MiqpLimits::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    NoProgress,
    MaxSteps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::NoProgress => "no-progress",
            Termination::MaxSteps => "max-steps",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converged" => Some(Termination::Converged),
            "no-progress" => Some(Termination::NoProgress),
            "max-steps" => Some(Termination::MaxSteps),
            _ => None,
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solver statistics of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStats {
    /// Steps in the chunk's MIQP horizon.
    pub horizon: usize,
    /// Steps of this chunk kept in the plan.
    pub kept_steps: usize,
    pub variables: usize,
    pub binaries: usize,
    pub nodes: usize,
    pub wall_time: Duration,
    pub gap: f64,
    pub objective: f64,
    pub status: MiqpStatus,
    pub theta_range: [f64; 2],
}

/// The sub-problem a chunk solved and the MIQP point it chose.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkTrace {
    pub scenario: Scenario,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootstepPlan {
    pub steps: Vec<Footstep>,
    pub n_legs: usize,
    pub chunks: Vec<ChunkStats>,
    /// One entry per chunk; not part of the plan file.
    pub traces: Vec<ChunkTrace>,
    pub termination: Termination,
    pub converged: bool,
    /// Distance in xy between the final CoC and the goal.
    pub coc_error: f64,
    /// Wrapped difference between the final yaw and the goal yaw.
    pub yaw_error: f64,
    /// Some chunk stopped at a node or time limit and its incumbent was used.
    pub limits_hit: bool,
}

impl FootstepPlan {
    pub fn configurations(&self) -> impl Iterator<Item = &[Footstep]> {
        self.steps.chunks(self.n_legs)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI { w - 2.0 * PI } else { w }
}

fn coc_error(scenario: &Scenario, feet: &[Xyz]) -> f64 {
    let c = coc(feet, scenario.robot.n_legs).expect("one foothold per leg");
    (c[0] - scenario.goal.position[0]).hypot(c[1] - scenario.goal.position[1])
}

fn yaw_error(scenario: &Scenario, yaw: f64) -> f64 {
    wrap_angle(yaw - scenario.goal.yaw).abs()
}

/// Plans from the scenario's start to its goal in chunks of
/// `chunk_multiplier * n_legs` steps.
pub fn plan(scenario: &Scenario, options: &PlannerOptions) -> Result<FootstepPlan> {
    plan_with_progress(scenario, options, |_, _| {})
}

/// [`plan`], calling `progress(chunk_index, stats)` after each chunk is solved.
pub fn plan_with_progress(
    scenario: &Scenario,
    options: &PlannerOptions,
    mut progress: impl FnMut(usize, &ChunkStats),
) -> Result<FootstepPlan> {
    scenario.validate()?;
    let n = scenario.robot.n_legs;
    let chunk = options.chunk_multiplier * n;
    if options.chunk_multiplier == 0 || chunk > scenario.max_steps {
        return Err(Error::Config(format!(
            "chunk of {} steps does not fit max_steps = {}",
            chunk, scenario.max_steps
        )));
    }
    let width = scenario.theta_range[1] - scenario.theta_range[0];

    let mut feet = scenario.start.footholds.clone();
    let mut prior = scenario.prior_footholds().to_vec();
    let mut yaw = scenario.start.yaw;
    let mut dist = coc_error(scenario, &feet);
    let mut yaw_err = yaw_error(scenario, yaw);

    let mut steps: Vec<Footstep> = Vec::new();
    let mut chunks = Vec::new();
    let mut traces = Vec::new();
    let mut limits_hit = false;

    let converged = |d: f64, e: f64| d <= options.goal_tol && e <= options.yaw_tol;
    let termination = loop {
        if converged(dist, yaw_err) {
            break Termination::Converged;
        }
        let remaining = scenario.max_steps - steps.len();
        let horizon = chunk.min(remaining / n * n);
        if horizon == 0 {
            break Termination::MaxSteps;
        }
        let index = chunks.len();
        let theta_range = if index == 0 {
            scenario.theta_range
        } else {
            [yaw - width / 2.0, yaw + width / 2.0]
        };
        let sub = Scenario {
            start: StartState { footholds: feet.clone(), yaw, prior_footholds: Some(prior.clone()) },
            max_steps: horizon,
            theta_range,
            ..scenario.clone()
        };
        let problem = assemble(&sub).map_err(|e| match e {
            Error::InfeasibleScenario(reason) => Error::Planning {
                chunk: index,
                reason,
                kind: PlanningFailure::Infeasible,
                snapshot: Box::new(sub.clone()),
            },
            other => other,
        })?;
        let solution = solve_miqp(&problem, &options.limits);
        let x = match (&solution.x, solution.status) {
            (Some(x), status) => {
                limits_hit |= !status.is_solved();
                x.clone()
            }
            (None, MiqpStatus::Infeasible) => {
                return Err(Error::Planning {
                    chunk: index,
                    reason: "the chunk's MIQP is infeasible".into(),
                    kind: PlanningFailure::Infeasible,
                    snapshot: Box::new(sub),
                })
            }
            (None, status) => {
                return Err(Error::Planning {
                    chunk: index,
                    reason: format!("stopped at {} without a feasible point", status.as_str()),
                    kind: PlanningFailure::LimitsHit,
                    snapshot: Box::new(sub),
                })
            }
        };
        let layout = problem.layout.expect("assembled problems carry a layout");
        let chunk_steps = extract_steps(&layout, &x);
        let kept = kept_configs(&chunk_steps, &feet, n);
        chunks.push(ChunkStats {
            horizon,
            kept_steps: kept * n,
            variables: problem.num_vars,
            binaries: problem.binaries.len(),
            nodes: solution.nodes,
            wall_time: solution.wall_time,
            gap: solution.gap,
            objective: solution.objective,
            status: solution.status,
            theta_range,
        });
        progress(index, chunks.last().expect("just pushed"));
        traces.push(ChunkTrace { scenario: sub, x });
        if kept == 0 {
            break Termination::NoProgress;
        }
        let chunk_steps = &chunk_steps[..kept * n];
        prior = if kept >= 2 {
            chunk_steps[(kept - 2) * n..(kept - 1) * n].iter().map(Footstep::position).collect()
        } else {
            feet.clone()
        };
        feet = chunk_steps[(kept - 1) * n..].iter().map(Footstep::position).collect();
        yaw = chunk_steps[(kept - 1) * n].theta;
        steps.extend_from_slice(chunk_steps);

        let (new_dist, new_err) = (coc_error(scenario, &feet), yaw_error(scenario, yaw));
        let progressed = dist - new_dist >= options.progress_tol || yaw_err - new_err >= options.progress_tol;
        (dist, yaw_err) = (new_dist, new_err);
        if converged(dist, yaw_err) {
            break Termination::Converged;
        }
        if !progressed {
            break Termination::NoProgress;
        }
    };

    Ok(FootstepPlan {
        steps,
        n_legs: n,
        chunks,
        traces,
        termination,
        converged: termination == Termination::Converged,
        coc_error: dist,
        yaw_error: yaw_err,
        limits_hit,
    })
}

/// Reads the footsteps of an MIQP point; regions are taken from the active
/// assignment binary.
pub fn extract_steps(layout: &VariableLayout, x: &[f64]) -> Vec<Footstep> {
    (0..layout.n_steps)
        .map(|i| {
            let region = (0..layout.n_regions)
                .max_by(|&a, &b| x[layout.region(i, a)].total_cmp(&x[layout.region(i, b)]))
                .filter(|&r| x[layout.region(i, r)] > 0.5);
            Footstep {
                x: x[layout.foot(i, 0)],
                y: x[layout.foot(i, 1)],
                z: x[layout.foot(i, 2)],
                theta: x[layout.theta(layout.config_of_step(i))],
                leg: leg_of(i + 1, layout.n_legs),
                trimmed: x[layout.trim(i)] > 0.5,
                region,
            }
        })
        .collect()
}

/// Number of leading configurations to keep: trailing configurations that
/// are fully trimmed and leave every foot where it was are dropped.
fn kept_configs(steps: &[Footstep], start: &[Xyz], n: usize) -> usize {
    let configs: Vec<&[Footstep]> = steps.chunks(n).collect();
    let mut kept = configs.len();
    while kept > 0 {
        let before: Vec<Xyz> = if kept >= 2 {
            configs[kept - 2].iter().map(Footstep::position).collect()
        } else {
            start.to_vec()
        };
        let idle = configs[kept - 1].iter().zip(&before).all(|(s, p)| {
            s.trimmed && (0..3).all(|k| (s.position()[k] - p[k]).abs() <= STATIONARY_TOL)
        });
        if !idle {
            break;
        }
        kept -= 1;
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlanCheck {
    /// Foot within the reference box around its nominal position.
    Reference,
    /// Foot within reach of the previous nominal position of the same leg.
    Reachability,
    /// Height change against the previous step of the same leg.
    Height,
    /// Foot inside its assigned region.
    Region,
    /// All steps of a configuration share one yaw; configurations are complete.
    Grouping,
}

impl PlanCheck {
    pub const ALL: [PlanCheck; 5] =
        [PlanCheck::Reference, PlanCheck::Reachability, PlanCheck::Height, PlanCheck::Region, PlanCheck::Grouping];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanCheck::Reference => "reference",
            PlanCheck::Reachability => "reachability",
            PlanCheck::Height => "height",
            PlanCheck::Region => "region",
            PlanCheck::Grouping => "grouping",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanViolation {
    pub check: PlanCheck,
    /// 1-based step index in the plan.
    pub step: usize,
    /// Amount by which the limit (including slack) is exceeded.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    /// Worst excess per check (negative values are margins).
    pub worst: BTreeMap<PlanCheck, f64>,
    pub violations: Vec<PlanViolation>,
    /// Slack added to the reference and reachability limits per leg.
    pub trig_slack: Vec<f64>,
}

impl PlanReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, check: PlanCheck) -> impl Iterator<Item = &PlanViolation> {
        self.violations.iter().filter(move |v| v.check == check)
    }
}

/// Absolute tolerance of every plan check on top of its limit.
pub const PLAN_TOL: f64 = 1e-6;

/// Re-checks a plan against the exact (non-linearized) geometry.
///
/// The linearized nominal positions differ from the exact ones by at most
/// `L_leg (|cos phi| + |sin phi|) h^2 / 8` per axis, which is added to the
/// reference and reachability limits.
pub fn validate_plan(plan: &FootstepPlan, scenario: &Scenario) -> PlanReport {
    let robot = &scenario.robot;
    let n = robot.n_legs;
    let convention = scenario.coc_convention;
    let h = (scenario.theta_range[1] - scenario.theta_range[0]) / scenario.n_segments.max(1) as f64;
    let chord = h * h / 8.0;
    let trig_slack: Vec<f64> = robot
        .leg_offsets
        .iter()
        .map(|phi| robot.l_leg * (phi.cos().abs() + phi.sin().abs()) * chord)
        .collect();

    // Full history: prior configuration, start configuration, then the plan.
    let mut history: Vec<(Xyz, f64)> = Vec::with_capacity(plan.steps.len() + 2 * n);
    history.extend(scenario.prior_footholds().iter().map(|&p| (p, scenario.start.yaw)));
    history.extend(scenario.start.footholds.iter().map(|&p| (p, scenario.start.yaw)));
    history.extend(plan.steps.iter().map(|s| (s.position(), s.theta)));
    let offset = 2 * n;

    let window_len = convention.window_len(n);
    let nominal = |h_idx: usize| -> [f64; 2] {
        let window: Vec<Xyz> = convention
            .window_offsets(n)
            .map(|d| history[(h_idx as isize + d) as usize].0)
            .collect();
        let c = coc(&window, window_len).expect("window length matches the convention");
        let leg = leg_of(h_idx + 1, n);
        nominal_position(c, history[h_idx].1, leg, robot).expect("leg in range")
    };

    let mut worst: BTreeMap<PlanCheck, f64> = PlanCheck::ALL.iter().map(|&c| (c, f64::NEG_INFINITY)).collect();
    let mut violations = Vec::new();
    let mut record = |check: PlanCheck, step: usize, excess: f64| {
        let w = worst.get_mut(&check).expect("all checks present");
        *w = w.max(excess);
        if excess > PLAN_TOL || excess.is_nan() {
            violations.push(PlanViolation { check, step, amount: excess });
        }
    };

    if plan.steps.len() % n != 0 {
        record(PlanCheck::Grouping, plan.steps.len(), 1.0);
    }
    for (i, step) in plan.steps.iter().enumerate() {
        let k = offset + i;
        let leg = leg_of(i + 1, n);
        let slack = trig_slack[leg - 1];
        let p = step.position();
        if step.leg != leg {
            record(PlanCheck::Grouping, i + 1, 1.0);
        }
        let first = i - i % n;
        record(PlanCheck::Grouping, i + 1, (step.theta - plan.steps[first].theta).abs());

        let r = nominal(k);
        let reference = (p[0] - r[0]).abs().max((p[1] - r[1]).abs()) - robot.l_bnd - slack;
        record(PlanCheck::Reference, i + 1, reference);

        let prev_slack = if i < n { 0.0 } else { slack };
        let r = nominal(k - n);
        let reach = (p[0] - r[0]).abs().max((p[1] - r[1]).abs()) - robot.d_lim - prev_slack;
        record(PlanCheck::Reachability, i + 1, reach);

        let dz = (p[2] - history[k - n].0[2]).abs() - robot.dz_max;
        record(PlanCheck::Height, i + 1, dz);

        let region = match step.region.and_then(|r| scenario.regions.get(r)) {
            Some(region) => region.violation(p),
            None => scenario
                .regions
                .iter()
                .map(|r| r.violation(p))
                .fold(f64::INFINITY, f64::min),
        };
        record(PlanCheck::Region, i + 1, region);
    }
    PlanReport { worst, violations, trig_slack }
}
