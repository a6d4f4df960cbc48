//! End-to-end checks on small scenarios: assembly invariants, the chunked
//! planner, plan validation, trimming and the file formats.

use footplan::formulation::{assemble, validate_assignment, write_lp};
use footplan::io::{parse_plan, parse_scenario, plan_to_toml, render_svg, scenario_to_toml};
use footplan::model::Scenario;
use footplan::planner::{plan, validate_plan, PlannerOptions, Termination};
use footplan::solver::{solve_miqp, MiqpLimits};
use footplan::Error;

const QUAD: &str = r#"
[robot]
name = "test-quad"
n_legs = 4
leg_offsets_deg = [45.0, 135.0, -135.0, -45.0]
l_leg = 0.2
l_bnd = 0.08
d_lim = 0.1
dz_max = 0.08
"#;

fn flat_walk(goal_x: f64, goal_yaw_deg: f64, max_steps: usize) -> Scenario {
    let text = format!(
        r#"
version = 1
name = "flat-walk"
max_steps = {max_steps}
theta_range_deg = [-30.0, 60.0]
n_segments = 4
{QUAD}
[start]
coc = [0.0, 0.0, 0.0]
yaw = 0.0

[goal]
position = [{goal_x}, 0.0, 0.0]
yaw_deg = {goal_yaw_deg}

[weights]
q_goal_diag = [10.0, 10.0, 10.0, 2.0]
q_trim = -1.0
q_drift_diag = [0.1, 0.1]

[workspace]
min = [-0.6, -0.6, -0.1]
max = [1.2, 0.6, 0.1]

[[regions]]
name = "floor"
polygon = [[-0.5, -0.5], [1.1, -0.5], [1.1, 0.5], [-0.5, 0.5]]
z = 0.0
"#
    );
    parse_scenario(&text, "flat-walk", None).unwrap()
}

fn fast_options() -> PlannerOptions {
    PlannerOptions { chunk_multiplier: 2, ..Default::default() }
}

#[test]
fn assembled_problem_is_well_formed() {
    let s = flat_walk(0.3, 20.0, 8);
    let p = assemble(&s).unwrap();
    p.check_structure().unwrap();
    assert!(p.min_eigenvalue() >= -1e-9);
    let layout = p.layout.unwrap();
    assert_eq!(p.num_vars, 3 * 8 + 3 * 2 + 8 + 2 * 2 * 4 + 8);
    assert_eq!(p.binaries.len(), layout.binary_count());
    for &j in &p.binaries {
        assert_eq!((p.lower[j], p.upper[j]), (0.0, 1.0));
    }
    for row in p.inequalities.iter().chain(&p.equalities) {
        assert!(row.coeffs.iter().all(|&(j, a)| j < p.num_vars && a.is_finite()));
    }
}

#[test]
fn short_walk_converges_and_validates() {
    let s = flat_walk(0.3, 20.0, 32);
    let result = plan(&s, &fast_options()).unwrap();
    assert_eq!(result.termination, Termination::Converged, "{:?}", result.chunks);
    assert!(result.converged && !result.limits_hit);
    assert!(result.coc_error <= 0.05 && result.yaw_error <= 0.05);
    assert_eq!(result.steps.len() % 4, 0);

    let report = validate_plan(&result, &s);
    assert!(report.is_clean(), "{:?}", report.violations);
    for trace in &result.traces {
        let p = assemble(&trace.scenario).unwrap();
        let v = validate_assignment(&p, &trace.x, 1e-6).unwrap();
        assert!(v.is_clean(), "{:?}", v.violations);
    }
}

#[test]
fn plan_file_round_trips_and_outputs_are_stable() {
    let s = flat_walk(0.2, 0.0, 16);
    let a = plan(&s, &fast_options()).unwrap();
    let b = plan(&s, &fast_options()).unwrap();
    let (ta, tb) = (plan_to_toml(&a, &s.robot, false), plan_to_toml(&b, &s.robot, false));
    assert_eq!(ta, tb);
    assert_eq!(render_svg(&a, &s), render_svg(&b, &s));
    let (back, robot) = parse_plan(&ta, "plan").unwrap();
    assert_eq!(robot, s.robot);
    assert_eq!(back.steps, a.steps);
    assert_eq!(back.termination, a.termination);
    assert!(validate_plan(&back, &s).is_clean());
}

#[test]
fn start_at_goal_trims_every_step() {
    let s = flat_walk(0.0, 0.0, 8);
    let p = assemble(&s).unwrap();
    let sol = solve_miqp(&p, &MiqpLimits { gap_tol: 1e-9, ..Default::default() });
    let layout = p.layout.unwrap();
    let x = sol.x.unwrap();
    assert!((0..8).all(|i| x[layout.trim(i)] == 1.0));
    assert!((sol.objective - 8.0 * s.weights.q_trim).abs() < 1e-6, "{}", sol.objective);
}

#[test]
fn goal_outside_regions_is_rejected_at_assembly() {
    let mut s = flat_walk(0.3, 0.0, 8);
    s.goal.position = [1.15, 0.0, 0.0];
    assert!(matches!(assemble(&s), Err(Error::InfeasibleScenario(_))));
}

#[test]
fn scenario_survives_canonical_round_trip() {
    let s = flat_walk(0.3, 20.0, 8);
    let text = scenario_to_toml(&s);
    assert_eq!(parse_scenario(&text, "canonical", None).unwrap(), s);
}

#[test]
fn lp_export_lists_every_binary() {
    let s = flat_walk(0.3, 20.0, 8);
    let p = assemble(&s).unwrap();
    let lp = write_lp(&p);
    let binaries = lp.split("Binaries").nth(1).unwrap();
    let listed = binaries.split_whitespace().filter(|w| *w != "End").count();
    assert_eq!(listed, p.binaries.len());
    assert!(lp.contains("Subject To") && lp.contains("Bounds"));
}
