//! Robots, footsteps, safe regions and scenarios, plus the exact geometric
//! helpers (center of contacts, nominal foot positions, gait indexing).
//!
//! Steps are numbered from 1 and legs from 1, matching the cyclic gait
//! `leg(i) = ((i - 1) mod n_legs) + 1`. The start configuration occupies the
//! virtual step indices `1 - n_legs ..= 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::qp;

pub type Xy = [f64; 2];
pub type Xyz = [f64; 3];

/// Which footsteps enter the center of contacts used for step `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CocConvention {
    /// Mean of the `n_legs - 1` steps preceding `i`; `f_i` itself is excluded.
    #[default]
    ExcludeCurrent,
    /// Mean of the `n_legs` steps ending at `i`.
    IncludeCurrent,
}

impl CocConvention {
    pub fn window_len(self, n_legs: usize) -> usize {
        match self {
            CocConvention::ExcludeCurrent => n_legs - 1,
            CocConvention::IncludeCurrent => n_legs,
        }
    }

    /// Step offsets `d` (relative to `i`) averaged into the CoC of step `i`.
    pub fn window_offsets(self, n_legs: usize) -> std::ops::RangeInclusive<isize> {
        let n = n_legs as isize;
        match self {
            CocConvention::ExcludeCurrent => (1 - n)..=-1,
            CocConvention::IncludeCurrent => (1 - n)..=0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    #[serde(default)]
    pub name: String,
    pub n_legs: usize,
    /// Angle from body yaw to each leg's nominal direction, radians.
    pub leg_offsets: Vec<f64>,
    /// Distance from the center of contacts to the nominal foot position.
    pub l_leg: f64,
    /// Half-side of the square reference box around the nominal position.
    pub l_bnd: f64,
    /// Half-side of the reachability box around the previous nominal position.
    pub d_lim: f64,
    /// Largest height change of one foot between consecutive steps.
    pub dz_max: f64,
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_legs < 2 {
            return Err(Error::Config(format!("n_legs must be >= 2, got {}", self.n_legs)));
        }
        if self.leg_offsets.len() != self.n_legs {
            return Err(Error::Config(format!(
                "leg_offsets has {} entries but n_legs = {}",
                self.leg_offsets.len(),
                self.n_legs
            )));
        }
        if let Some(phi) = self.leg_offsets.iter().find(|phi| !(-PI..PI).contains(*phi)) {
            return Err(Error::Config(format!("leg offset {phi} outside [-pi, pi)")));
        }
        for (name, value) in [("l_leg", self.l_leg), ("l_bnd", self.l_bnd), ("d_lim", self.d_lim)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.dz_max >= 0.0 && self.dz_max.is_finite()) {
            return Err(Error::Config(format!("dz_max must be >= 0, got {}", self.dz_max)));
        }
        Ok(())
    }

    /// Leg (1-based) that moves at 1-based step `step`.
    pub fn leg_of(&self, step: usize) -> usize {
        leg_of(step, self.n_legs)
    }

    /// Configuration (1-based) containing 1-based step `step`.
    pub fn config_of(&self, step: usize) -> usize {
        config_of(step, self.n_legs)
    }

    pub fn offset(&self, leg: usize) -> Result<f64> {
        if leg == 0 || leg > self.n_legs {
            return Err(Error::Contract(format!("leg {leg} outside 1..={}", self.n_legs)));
        }
        Ok(self.leg_offsets[leg - 1])
    }
}

pub fn leg_of(step: usize, n_legs: usize) -> usize {
    debug_assert!(step >= 1, "steps are 1-based");
    (step - 1) % n_legs + 1
}

pub fn config_of(step: usize, n_legs: usize) -> usize {
    debug_assert!(step >= 1, "steps are 1-based");
    step.div_ceil(n_legs)
}

/// Leg (1-based) for any step index, including the virtual start indices `<= 0`.
pub fn leg_of_signed(step: isize, n_legs: usize) -> usize {
    ((step - 1).rem_euclid(n_legs as isize)) as usize + 1
}

/// Arithmetic mean of the xy coordinates of `window`, which must hold exactly
/// `expected_len` points.
pub fn coc(window: &[Xyz], expected_len: usize) -> Result<Xy> {
    if window.len() != expected_len || expected_len == 0 {
        return Err(Error::Contract(format!(
            "center of contacts needs {expected_len} steps, got {}",
            window.len()
        )));
    }
    let k = window.len() as f64;
    let (sx, sy) = window.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    Ok([sx / k, sy / k])
}

/// Exact nominal foot position of `leg` for a body at `center` with yaw `theta`.
pub fn nominal_position(center: Xy, theta: f64, leg: usize, robot: &RobotModel) -> Result<Xy> {
    let phi = robot.offset(leg)?;
    let angle = theta + phi;
    Ok([center[0] + robot.l_leg * angle.cos(), center[1] + robot.l_leg * angle.sin()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Xyz,
    pub yaw: f64,
}

/// Per-leg goal footholds: the nominal positions around the goal CoC at the goal yaw.
pub fn derive_leg_goals(goal: &Pose, robot: &RobotModel) -> Vec<Xyz> {
    (1..=robot.n_legs)
        .map(|leg| {
            let [x, y] = nominal_position([goal.position[0], goal.position[1]], goal.yaw, leg, robot)
                .expect("leg index in range");
            [x, y, goal.position[2]]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    /// 1-based leg index.
    pub leg: usize,
    pub trimmed: bool,
    /// Index into the scenario's region list.
    pub region: Option<usize>,
}

impl Footstep {
    pub fn position(&self) -> Xyz {
        [self.x, self.y, self.z]
    }
}

/// Convex polytope `{x : A x <= b}` of obstacle-free terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeRegion {
    pub name: String,
    pub a: Vec<Xyz>,
    pub b: Vec<f64>,
}

impl SafeRegion {
    pub fn new(name: impl Into<String>, a: Vec<Xyz>, b: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if a.len() != b.len() {
            return Err(Error::Config(format!(
                "region {name}: {} normals but {} offsets",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { name, a, b })
    }

    /// Largest `a_k . p - b_k`; non-positive iff `p` lies in the region.
    pub fn violation(&self, p: Xyz) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| dot3(*a, p) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Xyz, tol: f64) -> bool {
        self.violation(p) <= tol
    }

    /// Axis-aligned bounding box, obtained by minimizing and maximizing each
    /// coordinate over the polytope. Fails if the region is empty or unbounded.
    pub fn bounding_box(&self) -> Result<Aabb> {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut objective = [0.0; 3];
                objective[axis] = sign;
                let value = match qp::minimize_linear_over_polytope(&self.a, &self.b, objective) {
                    qp::LinearOutcome::Optimal(v) => v,
                    qp::LinearOutcome::Infeasible => {
                        return Err(Error::Config(format!("region {} is empty", self.name)))
                    }
                    qp::LinearOutcome::Unbounded => {
                        return Err(Error::Config(format!("region {} is unbounded", self.name)))
                    }
                    qp::LinearOutcome::Failed => {
                        return Err(Error::Config(format!(
                            "region {}: bounding LP did not converge",
                            self.name
                        )))
                    }
                };
                if sign > 0.0 {
                    min[axis] = value;
                } else {
                    max[axis] = -value;
                }
            }
        }
        Ok(Aabb { min, max })
    }

    /// Vertices of the polytope, found by intersecting every triple of
    /// facet planes. Intended for small facet counts (plotting).
    pub fn vertices(&self) -> Vec<Xyz> {
        let m = self.a.len();
        let mut out: Vec<Xyz> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    let Some(p) = solve3(
                        [self.a[i], self.a[j], self.a[k]],
                        [self.b[i], self.b[j], self.b[k]],
                    ) else {
                        continue;
                    };
                    if self.contains(p, 1e-9) && !out.iter().any(|q| dist3(*q, p) < 1e-9) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Xyz,
    pub max: Xyz,
}

impl Aabb {
    pub fn contains(&self, p: Xyz, tol: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - tol && p[k] <= self.max[k] + tol)
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }
}

/// Objective weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// Weight on (x, y, z, yaw) error of each final footstep against its leg goal.
    pub q_goal: [[f64; 4]; 4],
    /// Reward (negative) per trimmed step.
    pub q_trim: f64,
    /// Weight on the xy displacement of the CoC between consecutive configurations.
    pub q_drift: [[f64; 2]; 2],
}

/// Initial configuration of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    /// Foot positions of legs `1..=n_legs`.
    pub footholds: Vec<Xyz>,
    pub yaw: f64,
    /// Configuration preceding the start (legs `1..=n_legs`); a robot that
    /// has been standing still is assumed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_footholds: Option<Vec<Xyz>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub robot: RobotModel,
    pub regions: Vec<SafeRegion>,
    pub start: StartState,
    pub goal: Pose,
    /// Horizon `N`; a multiple of `n_legs`.
    pub max_steps: usize,
    pub theta_range: [f64; 2],
    pub n_segments: usize,
    pub weights: Weights,
    pub workspace: Aabb,
    #[serde(default)]
    pub coc_convention: CocConvention,
}

impl Scenario {
    /// Footholds of the configuration preceding the start, or the start itself.
    pub fn prior_footholds(&self) -> &[Xyz] {
        self.start.prior_footholds.as_deref().unwrap_or(&self.start.footholds)
    }

    pub fn leg_goals(&self) -> Vec<Xyz> {
        derive_leg_goals(&self.goal, &self.robot)
    }

    pub fn start_coc(&self) -> Xy {
        coc(&self.start.footholds, self.robot.n_legs).expect("start has n_legs footholds")
    }

    /// Checks every invariant that does not need the solver.
    pub fn validate_structure(&self) -> Result<()> {
        self.robot.validate()?;
        let n = self.robot.n_legs;
        if self.max_steps == 0 || self.max_steps % n != 0 {
            return Err(Error::Contract(format!(
                "max_steps = {} is not a positive multiple of n_legs = {n}",
                self.max_steps
            )));
        }
        if self.n_segments < 2 {
            return Err(Error::Config(format!("n_segments must be >= 2, got {}", self.n_segments)));
        }
        let [lo, hi] = self.theta_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!("empty theta range [{lo}, {hi}]")));
        }
        if !(self.weights.q_trim < 0.0) {
            return Err(Error::Config(format!("q_trim must be negative, got {}", self.weights.q_trim)));
        }
        check_psd4(&self.weights.q_goal)?;
        check_psd2(&self.weights.q_drift)?;
        if self.start.footholds.len() != n {
            return Err(Error::Config(format!(
                "start has {} footholds but the robot has {n} legs",
                self.start.footholds.len()
            )));
        }
        if let Some(prior) = &self.start.prior_footholds {
            if prior.len() != n {
                return Err(Error::Config(format!(
                    "prior_footholds has {} entries but the robot has {n} legs",
                    prior.len()
                )));
            }
        }
        let ws = &self.workspace;
        if (0..3).any(|k| !(ws.min[k] < ws.max[k])) {
            return Err(Error::Config("workspace box is empty".into()));
        }
        for (leg, p) in self.start.footholds.iter().enumerate() {
            if !ws.contains(*p, 1e-9) {
                return Err(Error::Config(format!(
                    "start foothold of leg {} lies outside the workspace box",
                    leg + 1
                )));
            }
        }
        if !ws.contains(self.goal.position, 1e-9) {
            return Err(Error::Config("goal lies outside the workspace box".into()));
        }
        if self.regions.is_empty() {
            return Err(Error::Config("scenario has no safe regions".into()));
        }
        Ok(())
    }

    /// Full validation: structure, region emptiness/boundedness, and that
    /// every leg goal lies in some region. Returns the region bounding boxes.
    pub fn validate(&self) -> Result<Vec<Aabb>> {
        self.validate_structure()?;
        let boxes = self
            .regions
            .iter()
            .map(SafeRegion::bounding_box)
            .collect::<Result<Vec<_>>>()?;
        self.check_goals_in_regions()?;
        Ok(boxes)
    }

    pub fn check_goals_in_regions(&self) -> Result<()> {
        for (leg, g) in self.leg_goals().iter().enumerate() {
            if !self.regions.iter().any(|r| r.contains(*g, 1e-9)) {
                return Err(Error::InfeasibleScenario(format!(
                    "goal foothold of leg {} at ({:.3}, {:.3}, {:.3}) lies outside every safe region",
                    leg + 1,
                    g[0],
                    g[1],
                    g[2]
                )));
            }
        }
        Ok(())
    }
}

fn check_psd4(m: &[[f64; 4]; 4]) -> Result<()> {
    let mat = Matrix4::from_fn(|i, j| m[i][j]);
    check_psd("q_goal", mat == mat.transpose(), mat.symmetric_eigenvalues().min())
}

fn check_psd2(m: &[[f64; 2]; 2]) -> Result<()> {
    let mat = Matrix2::from_fn(|i, j| m[i][j]);
    check_psd("q_drift", mat == mat.transpose(), mat.symmetric_eigenvalues().min())
}

fn check_psd(name: &str, symmetric: bool, min_eig: f64) -> Result<()> {
    if !symmetric {
        return Err(Error::Config(format!("{name} is not symmetric")));
    }
    if min_eig < -1e-12 {
        return Err(Error::Config(format!(
            "{name} is not positive semidefinite (min eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

pub(crate) fn dot3(a: Xyz, b: Xyz) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist3(a: Xyz, b: Xyz) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Solves the 3x3 system with rows `rows`, returning `None` when singular.
fn solve3(rows: [Xyz; 3], rhs: Xyz) -> Option<Xyz> {
    let m = nalgebra::Matrix3::from_fn(|i, j| rows[i][j]);
    if m.determinant().abs() < 1e-12 {
        return None;
    }
    let sol = m.lu().solve(&nalgebra::Vector3::from(rhs))?;
    Some([sol[0], sol[1], sol[2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hexapod() -> RobotModel {
        RobotModel {
            name: "hex".into(),
            n_legs: 6,
            leg_offsets: (0..6).map(|k| wrap(k as f64 * PI / 3.0)).collect(),
            l_leg: 0.3,
            l_bnd: 0.1,
            d_lim: 0.15,
            dz_max: 0.1,
        }
    }

    fn wrap(a: f64) -> f64 {
        (a + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn coc_examples() {
        let square = [[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0]];
        assert_eq!(coc(&square, 4).unwrap(), [0.0, 0.0]);
        assert_eq!(coc(&[[2.5, -1.5, 0.3]], 1).unwrap(), [2.5, -1.5]);
        let six = [
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [2.0, 2.0, 0.0],
            [0.0, 2.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, -1.0, 0.0],
        ];
        let c = coc(&six, 6).unwrap();
        // independent summation: x = 6/6, y = 4/6
        let sy: f64 = six.iter().map(|p| p[1]).sum();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] - sy / 6.0).abs() < 1e-15);
        assert!((c[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coc_rejects_wrong_window() {
        assert!(matches!(coc(&[[0.0; 3]; 3], 5), Err(Error::Contract(_))));
    }

    #[test]
    fn nominal_position_examples() {
        let mut robot = hexapod();
        robot.leg_offsets[0] = 0.0;
        let p = nominal_position([0.0, 0.0], 0.0, 1, &robot).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-15 && p[1].abs() < 1e-15);
        let p = nominal_position([1.0, 1.0], PI / 2.0, 1, &robot).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.3).abs() < 1e-15);
        robot.l_leg = 1.0;
        robot.leg_offsets[0] = PI / 4.0;
        let p = nominal_position([0.0, 0.0], PI / 4.0, 1, &robot).unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!(nominal_position([0.0, 0.0], 0.0, 7, &robot).is_err());
    }

    #[test]
    fn leg_indexing() {
        assert_eq!(leg_of(1, 6), 1);
        assert_eq!(leg_of(7, 6), 1);
        assert_eq!(leg_of(12, 4), 4);
        assert_eq!(config_of(6, 6), 1);
        assert_eq!(config_of(7, 6), 2);
        assert_eq!(leg_of_signed(0, 6), 6);
        assert_eq!(leg_of_signed(-5, 6), 1);
    }

    #[test]
    fn hexapod_goals_on_circle() {
        let robot = hexapod();
        let goal = Pose { position: [0.0, 0.0, 0.0], yaw: 0.0 };
        let goals = derive_leg_goals(&goal, &robot);
        assert_eq!(goals.len(), 6);
        for g in &goals {
            assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 0.3).abs() < 1e-12);
        }
        let c = coc(&goals, 6).unwrap();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn quadruped_goals() {
        let robot = RobotModel {
            name: "quad".into(),
            n_legs: 4,
            leg_offsets: vec![PI / 4.0, 3.0 * PI / 4.0, -3.0 * PI / 4.0, -PI / 4.0],
            l_leg: 2f64.sqrt() * 0.2,
            l_bnd: 0.1,
            d_lim: 0.1,
            dz_max: 0.1,
        };
        let goals = derive_leg_goals(&Pose { position: [1.0, 1.0, 0.0], yaw: 0.0 }, &robot);
        let expected = [[1.2, 1.2], [0.8, 1.2], [0.8, 0.8], [1.2, 0.8]];
        for (g, e) in goals.iter().zip(expected) {
            assert!((g[0] - e[0]).abs() < 1e-12 && (g[1] - e[1]).abs() < 1e-12, "{g:?} vs {e:?}");
        }
    }

    #[test]
    fn robot_validation() {
        let mut robot = hexapod();
        assert!(robot.validate().is_ok());
        robot.leg_offsets.pop();
        assert!(robot.validate().is_err());
        let mut robot = hexapod();
        robot.leg_offsets[0] = PI;
        assert!(robot.validate().is_err());
        let mut robot = hexapod();
        robot.n_legs = 1;
        assert!(robot.validate().is_err());
    }

    fn unit_cube() -> SafeRegion {
        SafeRegion::new(
            "cube",
            vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            vec![1.0, 0.0, 2.0, 0.0, 0.5, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn region_box_and_vertices() {
        let cube = unit_cube();
        let bb = cube.bounding_box().unwrap();
        for k in 0..3 {
            assert!(bb.min[k].abs() < 1e-6);
        }
        assert!((bb.max[0] - 1.0).abs() < 1e-6);
        assert!((bb.max[1] - 2.0).abs() < 1e-6);
        assert!((bb.max[2] - 0.5).abs() < 1e-6);
        assert_eq!(cube.vertices().len(), 8);
        assert!(cube.contains([0.5, 0.5, 0.25], 0.0));
        assert!(!cube.contains([1.5, 0.5, 0.25], 1e-9));
    }

    #[test]
    fn empty_and_unbounded_regions_rejected() {
        let empty = SafeRegion::new("e", vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], vec![-1.0, -1.0]).unwrap();
        assert!(empty.bounding_box().is_err());
        let open = SafeRegion::new("o", vec![[1.0, 0.0, 0.0]], vec![1.0]).unwrap();
        assert!(open.bounding_box().is_err());
    }
}
