//! TOML scenario and robot files.
//!
//! Regions are written either as raw halfspaces (`a`, `b`) or as a convex xy
//! polygon lifted onto a plane `z = alpha x + beta y + gamma` with a
//! thickness; the loader expands the polygon form into halfspaces. Angles may
//! be given in radians or, with a `_deg` suffix, in degrees.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    derive_leg_goals, Aabb, CocConvention, Pose, RobotModel, SafeRegion, Scenario, StartState, Weights, Xy, Xyz,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    /// Load the robot from this file (relative to the referring file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_legs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_offsets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_offsets_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_leg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_bnd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_lim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Xyz>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Convex polygon in the xy plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<Xy>>,
    /// Height of a level polygon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// `[alpha, beta, gamma]` of a tilted polygon's plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<[f64; 3]>,
    /// Vertical extent around the plane (default 0.02).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footholds: Option<Vec<Xyz>>,
    /// Place the feet at their nominal positions around this CoC instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coc: Option<Xyz>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_footholds: Option<Vec<Xyz>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub position: Xyz,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_goal: Option<[[f64; 4]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_goal_diag: Option<[f64; 4]>,
    pub q_trim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_drift: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_drift_diag: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_range_deg: Option<[f64; 2]>,
    pub n_segments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coc_convention: Option<CocConvention>,
    pub robot: RobotSpec,
    pub start: StartSpec,
    pub goal: GoalSpec,
    pub weights: WeightsSpec,
    pub workspace: Aabb,
    pub regions: Vec<RegionSpec>,
}

fn parse_error(origin: &str, message: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{origin}: {message}"))
}

fn one_of<T>(origin: &str, key: &str, plain: Option<T>, deg: Option<T>, to_rad: impl Fn(T) -> T) -> Result<Option<T>> {
    match (plain, deg) {
        (Some(_), Some(_)) => Err(parse_error(origin, format!("give either `{key}` or `{key}_deg`, not both"))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(to_rad(v))),
        (None, None) => Ok(None),
    }
}

fn resolve(base: Option<&Path>, file: &str) -> PathBuf {
    match base {
        Some(dir) => dir.join(file),
        None => PathBuf::from(file),
    }
}

impl RobotSpec {
    pub fn to_model(&self, origin: &str, base: Option<&Path>) -> Result<RobotModel> {
        if let Some(file) = &self.file {
            let inline = RobotSpec { file: None, ..self.clone() };
            if inline != RobotSpec::default() {
                return Err(parse_error(origin, "robot: `file` cannot be combined with inline fields"));
            }
            return load_robot(&resolve(base, file));
        }
        let missing = |key: &str| parse_error(origin, format!("robot: missing field `{key}`"));
        let offsets = one_of(origin, "robot.leg_offsets", self.leg_offsets.clone(), self.leg_offsets_deg.clone(), |v| {
            v.into_iter().map(f64::to_radians).collect()
        })?
        .ok_or_else(|| missing("leg_offsets"))?;
        let robot = RobotModel {
            name: self.name.clone().unwrap_or_default(),
            n_legs: self.n_legs.ok_or_else(|| missing("n_legs"))?,
            leg_offsets: offsets,
            l_leg: self.l_leg.ok_or_else(|| missing("l_leg"))?,
            l_bnd: self.l_bnd.ok_or_else(|| missing("l_bnd"))?,
            d_lim: self.d_lim.ok_or_else(|| missing("d_lim"))?,
            dz_max: self.dz_max.ok_or_else(|| missing("dz_max"))?,
        };
        robot.validate().map_err(|e| parse_error(origin, format!("robot: {e}")))?;
        Ok(robot)
    }

    pub fn from_model(robot: &RobotModel) -> Self {
        RobotSpec {
            name: Some(robot.name.clone()).filter(|n| !n.is_empty()),
            n_legs: Some(robot.n_legs),
            leg_offsets: Some(robot.leg_offsets.clone()),
            l_leg: Some(robot.l_leg),
            l_bnd: Some(robot.l_bnd),
            d_lim: Some(robot.d_lim),
            dz_max: Some(robot.dz_max),
            ..RobotSpec::default()
        }
    }
}

/// Halfspaces of a convex xy polygon extruded around the plane
/// `z = alpha x + beta y + gamma` by `thickness`.
pub fn polygon_halfspaces(polygon: &[Xy], plane: [f64; 3], thickness: f64) -> std::result::Result<(Vec<Xyz>, Vec<f64>), String> {
    let m = polygon.len();
    if m < 3 {
        return Err(format!("polygon needs at least 3 vertices, got {m}"));
    }
    if !(thickness >= 0.0 && thickness.is_finite()) {
        return Err(format!("thickness must be >= 0, got {thickness}"));
    }
    let edge = |k: usize| {
        let (p, q) = (polygon[k], polygon[(k + 1) % m]);
        [q[0] - p[0], q[1] - p[1]]
    };
    let area2: f64 = (0..m)
        .map(|k| {
            let (p, q) = (polygon[k], polygon[(k + 1) % m]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    if area2.abs() < 1e-12 {
        return Err("polygon has zero area".into());
    }
    let orientation = area2.signum();
    for k in 0..m {
        let (e, f) = (edge(k), edge((k + 1) % m));
        if orientation * (e[0] * f[1] - e[1] * f[0]) < -1e-12 {
            return Err(format!("polygon is not convex at vertex {}", (k + 1) % m));
        }
    }
    let mut a = Vec::with_capacity(m + 2);
    let mut b = Vec::with_capacity(m + 2);
    for (k, p) in polygon.iter().enumerate() {
        let e = edge(k);
        let len = e[0].hypot(e[1]);
        if len < 1e-12 {
            return Err(format!("polygon has a repeated vertex at {k}"));
        }
        // Outward normal: right of the edge for counter-clockwise polygons.
        let normal = [orientation * e[1] / len, -orientation * e[0] / len];
        a.push([normal[0], normal[1], 0.0]);
        b.push(normal[0] * p[0] + normal[1] * p[1]);
    }
    let [alpha, beta, gamma] = plane;
    a.push([-alpha, -beta, 1.0]);
    b.push(gamma + thickness / 2.0);
    a.push([alpha, beta, -1.0]);
    b.push(thickness / 2.0 - gamma);
    Ok((a, b))
}

pub const DEFAULT_THICKNESS: f64 = 0.02;

impl RegionSpec {
    pub fn to_region(&self, origin: &str, index: usize) -> Result<SafeRegion> {
        let name = self.name.clone().unwrap_or_else(|| format!("region{index}"));
        let err = |msg: String| parse_error(origin, format!("regions[{index}] ({name}): {msg}"));
        let (a, b) = match (&self.a, &self.b, &self.polygon) {
            (Some(a), Some(b), None) => {
                if self.z.is_some() || self.plane.is_some() || self.thickness.is_some() {
                    return Err(err("`z`, `plane` and `thickness` only apply to `polygon` regions".into()));
                }
                (a.clone(), b.clone())
            }
            (None, None, Some(poly)) => {
                let plane = match (self.z, self.plane) {
                    (Some(z), None) => [0.0, 0.0, z],
                    (None, Some(p)) => p,
                    (None, None) => return Err(err("polygon regions need `z` or `plane`".into())),
                    (Some(_), Some(_)) => return Err(err("give either `z` or `plane`, not both".into())),
                };
                polygon_halfspaces(poly, plane, self.thickness.unwrap_or(DEFAULT_THICKNESS)).map_err(err)?
            }
            _ => return Err(err("give either `a` and `b`, or `polygon`".into())),
        };
        SafeRegion::new(name.clone(), a, b).map_err(|e| err(e.to_string()))
    }
}

impl ScenarioFile {
    pub fn to_scenario(&self, origin: &str, base: Option<&Path>) -> Result<Scenario> {
        if self.version != SCENARIO_VERSION {
            return Err(parse_error(
                origin,
                format!("unsupported version {} (expected {SCENARIO_VERSION})", self.version),
            ));
        }
        let robot = self.robot.to_model(origin, base)?;
        let regions = self
            .regions
            .iter()
            .enumerate()
            .map(|(k, r)| r.to_region(origin, k))
            .collect::<Result<Vec<_>>>()?;
        let theta_range = one_of(origin, "theta_range", self.theta_range, self.theta_range_deg, |[a, b]| {
            [a.to_radians(), b.to_radians()]
        })?
        .ok_or_else(|| parse_error(origin, "missing field `theta_range`"))?;

        let start_yaw = one_of(origin, "start.yaw", self.start.yaw, self.start.yaw_deg, f64::to_radians)?.unwrap_or(0.0);
        let footholds = match (&self.start.footholds, self.start.coc) {
            (Some(f), None) => f.clone(),
            (None, Some(c)) => derive_leg_goals(&Pose { position: c, yaw: start_yaw }, &robot),
            _ => return Err(parse_error(origin, "start: give either `footholds` or `coc`")),
        };
        let goal_yaw = one_of(origin, "goal.yaw", self.goal.yaw, self.goal.yaw_deg, f64::to_radians)?.unwrap_or(0.0);

        let w = &self.weights;
        let q_goal = match (w.q_goal, w.q_goal_diag) {
            (Some(q), None) => q,
            (None, Some(d)) => std::array::from_fn(|i| std::array::from_fn(|j| if i == j { d[i] } else { 0.0 })),
            _ => return Err(parse_error(origin, "weights: give either `q_goal` or `q_goal_diag`")),
        };
        let q_drift = match (w.q_drift, w.q_drift_diag) {
            (Some(q), None) => q,
            (None, Some(d)) => [[d[0], 0.0], [0.0, d[1]]],
            (None, None) => [[0.0; 2]; 2],
            _ => return Err(parse_error(origin, "weights: give either `q_drift` or `q_drift_diag`")),
        };

        let scenario = Scenario {
            robot,
            regions,
            start: StartState { footholds, yaw: start_yaw, prior_footholds: self.start.prior_footholds.clone() },
            goal: Pose { position: self.goal.position, yaw: goal_yaw },
            max_steps: self.max_steps,
            theta_range,
            n_segments: self.n_segments,
            weights: Weights { q_goal, q_trim: w.q_trim, q_drift },
            workspace: self.workspace,
            coc_convention: self.coc_convention.unwrap_or_default(),
        };
        scenario.validate_structure().map_err(|e| parse_error(origin, e))?;
        Ok(scenario)
    }

    /// Canonical form: inline robot, halfspace regions, radians, full matrices.
    pub fn from_scenario(scenario: &Scenario, name: Option<String>) -> Self {
        ScenarioFile {
            version: SCENARIO_VERSION,
            name,
            description: None,
            max_steps: scenario.max_steps,
            theta_range: Some(scenario.theta_range),
            theta_range_deg: None,
            n_segments: scenario.n_segments,
            coc_convention: Some(scenario.coc_convention),
            robot: RobotSpec::from_model(&scenario.robot),
            start: StartSpec {
                footholds: Some(scenario.start.footholds.clone()),
                coc: None,
                yaw: Some(scenario.start.yaw),
                yaw_deg: None,
                prior_footholds: scenario.start.prior_footholds.clone(),
            },
            goal: GoalSpec { position: scenario.goal.position, yaw: Some(scenario.goal.yaw), yaw_deg: None },
            weights: WeightsSpec {
                q_goal: Some(scenario.weights.q_goal),
                q_goal_diag: None,
                q_trim: scenario.weights.q_trim,
                q_drift: Some(scenario.weights.q_drift),
                q_drift_diag: None,
            },
            workspace: scenario.workspace,
            regions: scenario
                .regions
                .iter()
                .map(|r| RegionSpec {
                    name: Some(r.name.clone()),
                    a: Some(r.a.clone()),
                    b: Some(r.b.clone()),
                    ..RegionSpec::default()
                })
                .collect(),
        }
    }
}

/// Parses scenario text; `base` is the directory robot file references are
/// resolved against, `origin` names the source in error messages.
pub fn parse_scenario(text: &str, origin: &str, base: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    file.to_scenario(origin, base)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string(), path.parent())
}

/// Loads a scenario and, when `robot` is given, plans it for that robot
/// instead of the one the file names. Start footholds given as a CoC are
/// derived for the substituted robot.
pub fn load_scenario_with_robot(path: &Path, robot: Option<&Path>) -> Result<Scenario> {
    let Some(robot_path) = robot else {
        return load_scenario(path);
    };
    let robot = load_robot(robot_path)?;
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let mut file: ScenarioFile = toml::from_str(&text).map_err(|e| parse_error(&origin, e))?;
    file.robot = RobotSpec::from_model(&robot);
    file.to_scenario(&origin, path.parent())
}

pub fn scenario_to_toml(scenario: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(scenario, None)).expect("scenario serializes")
}

pub fn parse_robot(text: &str, origin: &str, base: Option<&Path>) -> Result<RobotModel> {
    let spec: RobotSpec = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    if spec.file.is_some() {
        return Err(parse_error(origin, "a robot file cannot refer to another robot file"));
    }
    spec.to_model(origin, base)
}

pub fn load_robot(path: &Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path)?;
    parse_robot(&text, &path.display().to_string(), path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"
version = 1
max_steps = 8
theta_range_deg = [-90.0, 90.0]
n_segments = 4

[robot]
name = "quad"
n_legs = 4
leg_offsets_deg = [45.0, 135.0, -135.0, -45.0]
l_leg = 0.2
l_bnd = 0.1
d_lim = 0.1
dz_max = 0.05

[start]
coc = [0.0, 0.0, 0.0]

[goal]
position = [0.3, 0.0, 0.0]

[weights]
q_goal_diag = [1.0, 1.0, 1.0, 1.0]
q_trim = -0.1

[workspace]
min = [-1.0, -1.0, -0.5]
max = [2.0, 1.0, 0.5]

[[regions]]
name = "floor"
polygon = [[-1.0, -1.0], [2.0, -1.0], [2.0, 1.0], [-1.0, 1.0]]
z = 0.0
"#;

    #[test]
    fn polygon_expands_to_halfspaces() {
        let s = parse_scenario(SQUARE, "test", None).unwrap();
        let r = &s.regions[0];
        assert_eq!(r.a.len(), 6);
        assert!(r.contains([1.9, 0.9, 0.0], 1e-12));
        assert!(r.contains([0.0, 0.0, 0.0099], 1e-12));
        assert!(!r.contains([0.0, 0.0, 0.011], 1e-12));
        assert!(!r.contains([2.01, 0.0, 0.0], 1e-12));
        assert!((s.theta_range[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // start feet sit at the nominal positions around the CoC
        let f = s.start.footholds[0];
        assert!((f[0] - 0.2 * (std::f64::consts::FRAC_PI_4).cos()).abs() < 1e-12);
    }

    #[test]
    fn clockwise_polygon_and_tilted_plane() {
        let poly = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let (a, b) = polygon_halfspaces(&poly, [0.1, 0.0, 0.2], 0.02).unwrap();
        let region = SafeRegion::new("tilt", a, b).unwrap();
        assert!(region.contains([0.5, 0.5, 0.25], 1e-12));
        assert!(region.contains([1.0, 0.5, 0.30], 1e-12));
        assert!(!region.contains([0.0, 0.5, 0.30], 1e-12));
        assert!(!region.contains([-0.01, 0.5, 0.2], 1e-12));
    }

    #[test]
    fn rejects_non_convex_polygons() {
        let poly = [[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [2.0, 1.0], [0.0, 1.0]];
        assert!(polygon_halfspaces(&poly, [0.0; 3], 0.01).unwrap_err().contains("not convex"));
    }

    #[test]
    fn round_trip_is_identity() {
        let s = parse_scenario(SQUARE, "test", None).unwrap();
        let text = scenario_to_toml(&s);
        let back = parse_scenario(&text, "round-trip", None).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let text = SQUARE.replace("n_segments = 4", "n_segments = 4\nsegments = 3");
        let err = parse_scenario(&text, "bad.toml", None).unwrap_err().to_string();
        assert!(err.contains("segments"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn missing_robot_names_the_key() {
        let start = SQUARE.find("[robot]").unwrap();
        let end = SQUARE.find("[start]").unwrap();
        let text = format!("{}{}", &SQUARE[..start], &SQUARE[end..]);
        let err = parse_scenario(&text, "bad.toml", None).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("robot"), "{err}");
    }
}
