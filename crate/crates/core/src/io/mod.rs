//! File formats: scenarios, robot presets, plans, and SVG rendering.

pub mod plan_file;
pub mod scenario_file;
pub mod svg;

pub use plan_file::{load_plan, parse_plan, plan_to_toml, PlanFile};
pub use scenario_file::{load_robot, load_scenario, load_scenario_with_robot, parse_robot, parse_scenario, polygon_halfspaces, scenario_to_toml, ScenarioFile};
pub use svg::{convex_hull, render_svg};
