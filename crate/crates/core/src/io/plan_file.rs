//! TOML plan files: the footsteps, per-chunk solver statistics and the
//! convergence record, together with the robot they were planned for.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::scenario_file::RobotSpec;
use crate::error::{Error, Result};
use crate::model::{leg_of, Footstep, RobotModel};
use crate::planner::{ChunkStats, FootstepPlan, Termination};
use crate::solver::MiqpStatus;

pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub leg: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<usize>,
    pub trimmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkRecord {
    pub horizon: usize,
    pub kept_steps: usize,
    pub variables: usize,
    pub binaries: usize,
    pub nodes: usize,
    pub gap: f64,
    pub objective: f64,
    pub status: String,
    pub theta_range: [f64; 2],
    /// Seconds; only written on request so that plan files are reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Convergence {
    pub termination: String,
    pub converged: bool,
    pub coc_error: f64,
    pub yaw_error: f64,
    pub limits_hit: bool,
    pub steps: usize,
    pub trimmed_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub version: u32,
    pub convergence: Convergence,
    pub robot: RobotSpec,
    #[serde(default)]
    pub chunks: Vec<ChunkRecord>,
    #[serde(default)]
    pub steps: Vec<StepRecord>,
}

fn status_from_str(s: &str) -> Option<MiqpStatus> {
    [MiqpStatus::Optimal, MiqpStatus::GapLimit, MiqpStatus::Infeasible, MiqpStatus::NodeLimit, MiqpStatus::TimeLimit]
        .into_iter()
        .find(|st| st.as_str() == s)
}

impl PlanFile {
    pub fn from_plan(plan: &FootstepPlan, robot: &RobotModel, include_timing: bool) -> Self {
        PlanFile {
            version: PLAN_VERSION,
            convergence: Convergence {
                termination: plan.termination.as_str().to_string(),
                converged: plan.converged,
                coc_error: plan.coc_error,
                yaw_error: plan.yaw_error,
                limits_hit: plan.limits_hit,
                steps: plan.steps.len(),
                trimmed_steps: plan.steps.iter().filter(|s| s.trimmed).count(),
            },
            robot: RobotSpec::from_model(robot),
            chunks: plan
                .chunks
                .iter()
                .map(|c| ChunkRecord {
                    horizon: c.horizon,
                    kept_steps: c.kept_steps,
                    variables: c.variables,
                    binaries: c.binaries,
                    nodes: c.nodes,
                    gap: c.gap,
                    objective: c.objective,
                    status: c.status.as_str().to_string(),
                    theta_range: c.theta_range,
                    wall_time: include_timing.then(|| c.wall_time.as_secs_f64()),
                })
                .collect(),
            steps: plan
                .steps
                .iter()
                .map(|s| StepRecord {
                    leg: s.leg,
                    x: s.x,
                    y: s.y,
                    z: s.z,
                    theta: s.theta,
                    region: s.region,
                    trimmed: s.trimmed,
                })
                .collect(),
        }
    }

    /// Rebuilds the plan (without chunk traces) and the embedded robot.
    pub fn to_plan(&self, origin: &str) -> Result<(FootstepPlan, RobotModel)> {
        let err = |msg: String| Error::Parse(format!("{origin}: {msg}"));
        if self.version != PLAN_VERSION {
            return Err(err(format!("unsupported version {} (expected {PLAN_VERSION})", self.version)));
        }
        let robot = self.robot.to_model(origin, None)?;
        let n = robot.n_legs;
        if self.steps.len() % n != 0 {
            return Err(err(format!("{} steps do not fill whole configurations of {n} legs", self.steps.len())));
        }
        if self.steps.len() != self.convergence.steps {
            return Err(err(format!(
                "convergence record lists {} steps, file has {}",
                self.convergence.steps,
                self.steps.len()
            )));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.leg != leg_of(i + 1, n) {
                return Err(err(format!("steps[{i}]: leg {} breaks the gait order", s.leg)));
            }
        }
        let termination = Termination::parse(&self.convergence.termination)
            .ok_or_else(|| err(format!("unknown termination `{}`", self.convergence.termination)))?;
        let chunks = self
            .chunks
            .iter()
            .enumerate()
            .map(|(k, c)| {
                Ok(ChunkStats {
                    horizon: c.horizon,
                    kept_steps: c.kept_steps,
                    variables: c.variables,
                    binaries: c.binaries,
                    nodes: c.nodes,
                    wall_time: Duration::from_secs_f64(c.wall_time.unwrap_or(0.0).max(0.0)),
                    gap: c.gap,
                    objective: c.objective,
                    status: status_from_str(&c.status)
                        .ok_or_else(|| err(format!("chunks[{k}]: unknown status `{}`", c.status)))?,
                    theta_range: c.theta_range,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = self
            .steps
            .iter()
            .map(|s| Footstep {
                x: s.x,
                y: s.y,
                z: s.z,
                theta: s.theta,
                leg: s.leg,
                trimmed: s.trimmed,
                region: s.region,
            })
            .collect();
        let plan = FootstepPlan {
            steps,
            n_legs: n,
            chunks,
            traces: Vec::new(),
            termination,
            converged: self.convergence.converged,
            coc_error: self.convergence.coc_error,
            yaw_error: self.convergence.yaw_error,
            limits_hit: self.convergence.limits_hit,
        };
        Ok((plan, robot))
    }
}

pub fn plan_to_toml(plan: &FootstepPlan, robot: &RobotModel, include_timing: bool) -> String {
    toml::to_string(&PlanFile::from_plan(plan, robot, include_timing)).expect("plan serializes")
}

pub fn parse_plan(text: &str, origin: &str) -> Result<(FootstepPlan, RobotModel)> {
    let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))?;
    file.to_plan(origin)
}

pub fn load_plan(path: &Path) -> Result<(FootstepPlan, RobotModel)> {
    let text = std::fs::read_to_string(path)?;
    parse_plan(&text, &path.display().to_string())
}
