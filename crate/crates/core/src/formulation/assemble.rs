use crate::error::{Error, Result};
use crate::linearization::{PwlTable, TrigFn};
use crate::model::{leg_of_signed, nominal_position, Scenario, Xy, Xyz};
use crate::problem::{merge_terms, Family, MiqpProblem, RowTag};

use super::layout::VariableLayout;

/// Sparse affine expression `sum a_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(j: usize) -> Self {
        Self { terms: vec![(j, 1.0)], constant: 0.0 }
    }

    pub fn add_scaled(&mut self, other: &Affine, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(j, a)| (j, a * scale)));
        self.constant += other.constant * scale;
    }

    pub fn add_var(&mut self, j: usize, a: f64) {
        self.terms.push((j, a));
    }

    pub fn sub(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>() + self.constant
    }
}

/// Largest value of `a . x - b` over the box `lower <= x <= upper`.
///
/// Returns an assembly error if a variable with a nonzero coefficient has an
/// infinite bound.
pub fn big_m_for_row(coeffs: &[(usize, f64)], rhs: f64, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let mut max = -rhs;
    for &(j, a) in coeffs {
        let v = if a >= 0.0 { a * upper[j] } else { a * lower[j] };
        if a != 0.0 && !v.is_finite() {
            return Err(Error::Assembly(format!(
                "variable {j} is unbounded in a big-M row (bounds [{}, {}])",
                lower[j], upper[j]
            )));
        }
        max += v;
    }
    Ok(max)
}

/// Adds `a . x <= rhs + M (1 - y)` with the row-specific `M`. Rows that hold
/// everywhere in the box are skipped.
fn add_implication(
    problem: &mut MiqpProblem,
    expr: &Affine,
    rhs: f64,
    indicator: usize,
    tag: RowTag,
) -> Result<()> {
    // expr <= rhs  <=>  terms <= rhs - constant
    let rhs = rhs - expr.constant;
    let mut coeffs = merge_terms(expr.terms.clone());
    let m = big_m_for_row(&coeffs, rhs, &problem.lower, &problem.upper)?;
    if m <= 0.0 {
        return Ok(());
    }
    coeffs.push((indicator, m));
    problem.add_le(coeffs, rhs + m, tag);
    Ok(())
}

fn add_le_affine(problem: &mut MiqpProblem, expr: &Affine, rhs: f64, tag: RowTag) {
    problem.add_le(expr.terms.clone(), rhs - expr.constant, tag);
}

/// Adds `(w)' W (w)` for the affine vector `w` to the objective.
pub fn add_quadratic_form<const D: usize>(problem: &mut MiqpProblem, w: &[Affine; D], weight: &[[f64; D]; D]) {
    for p in 0..D {
        for q in 0..D {
            let wpq = weight[p][q];
            if wpq == 0.0 {
                continue;
            }
            for &(i, u) in &w[p].terms {
                for &(j, v) in &w[q].terms {
                    problem.add_product(i, j, wpq * u * v);
                }
                problem.linear[i] += wpq * u * w[q].constant;
            }
            for &(j, v) in &w[q].terms {
                problem.linear[j] += wpq * v * w[p].constant;
            }
            problem.constant += wpq * w[p].constant * w[q].constant;
        }
    }
}

/// Everything about a scenario the formulation derives before building rows.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub layout: VariableLayout,
    pub sin: PwlTable,
    pub cos: PwlTable,
    pub leg_goals: Vec<Xyz>,
}

impl<'a> Context<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate_structure()?;
        let layout = VariableLayout::new(
            scenario.max_steps,
            scenario.robot.n_legs,
            scenario.regions.len(),
            scenario.n_segments,
        );
        Ok(Self {
            scenario,
            layout,
            sin: PwlTable::build(TrigFn::Sin, scenario.theta_range, scenario.n_segments)?,
            cos: PwlTable::build(TrigFn::Cos, scenario.theta_range, scenario.n_segments)?,
            leg_goals: scenario.leg_goals(),
        })
    }

    fn n(&self) -> usize {
        self.scenario.robot.n_legs
    }

    /// Known position of a step at or before the start (`k <= 0`).
    pub fn history_position(&self, k: isize) -> Xyz {
        let n = self.n() as isize;
        let leg = leg_of_signed(k, self.n()) - 1;
        if k > -n {
            self.scenario.start.footholds[leg]
        } else {
            debug_assert!(k > -2 * n, "history reaches back one configuration");
            self.scenario.prior_footholds()[leg]
        }
    }

    /// Coordinate `axis` of the 1-based step `k` as an affine expression.
    pub fn position(&self, k: isize, axis: usize) -> Affine {
        if k >= 1 {
            Affine::var(self.layout.foot(k as usize - 1, axis))
        } else {
            Affine::constant(self.history_position(k)[axis])
        }
    }

    /// Center of contacts used by step `k` (xy).
    pub fn coc(&self, k: isize) -> [Affine; 2] {
        let offsets = self.scenario.coc_convention.window_offsets(self.n());
        let weight = 1.0 / self.scenario.coc_convention.window_len(self.n()) as f64;
        let mut out = [Affine::default(), Affine::default()];
        for d in offsets {
            for (axis, acc) in out.iter_mut().enumerate() {
                acc.add_scaled(&self.position(k + d, axis), weight);
            }
        }
        out
    }

    /// Exact nominal position of a start-configuration step (`k <= 0`).
    pub fn history_nominal(&self, k: isize) -> Xy {
        let c = self.coc(k);
        debug_assert!(c[0].terms.is_empty() && c[1].terms.is_empty());
        let leg = leg_of_signed(k, self.n());
        nominal_position([c[0].constant, c[1].constant], self.scenario.start.yaw, leg, &self.scenario.robot)
            .expect("leg in range")
    }

    /// Nominal position of step `k`: linearized for planned steps, exact for history.
    pub fn nominal(&self, k: isize) -> [Affine; 2] {
        if k <= 0 {
            let [x, y] = self.history_nominal(k);
            return [Affine::constant(x), Affine::constant(y)];
        }
        let robot = &self.scenario.robot;
        let leg = leg_of_signed(k, self.n());
        let phi = robot.leg_offsets[leg - 1];
        let config = self.layout.config_of_step(k as usize - 1);
        let (s, c) = (self.layout.sin(config), self.layout.cos(config));
        let [mut x, mut y] = self.coc(k);
        let l = robot.l_leg;
        // cos(theta + phi) = c cos(phi) - s sin(phi); sin(theta + phi) = s cos(phi) + c sin(phi)
        x.add_var(c, l * phi.cos());
        x.add_var(s, -l * phi.sin());
        y.add_var(s, l * phi.cos());
        y.add_var(c, l * phi.sin());
        [x, y]
    }

    /// Per-step xyz boxes implied by the reachability chain, clipped to the workspace.
    pub fn reach_boxes(&self) -> Result<Vec<[[f64; 2]; 3]>> {
        let robot = &self.scenario.robot;
        let ws = &self.scenario.workspace;
        let n = self.n();
        let mut boxes: Vec<[[f64; 2]; 3]> = Vec::with_capacity(self.layout.n_steps);
        for i in 0..self.layout.n_steps {
            let k = i as isize + 1;
            let raw = if i < n {
                let r = self.history_nominal(k - n as isize);
                let z = self.history_position(k - n as isize)[2];
                [
                    [r[0] - robot.d_lim, r[0] + robot.d_lim],
                    [r[1] - robot.d_lim, r[1] + robot.d_lim],
                    [z - robot.dz_max, z + robot.dz_max],
                ]
            } else {
                let prev = boxes[i - n];
                let grow = robot.l_bnd + robot.d_lim;
                [
                    [prev[0][0] - grow, prev[0][1] + grow],
                    [prev[1][0] - grow, prev[1][1] + grow],
                    [prev[2][0] - robot.dz_max, prev[2][1] + robot.dz_max],
                ]
            };
            let mut clipped = raw;
            for axis in 0..3 {
                clipped[axis][0] = raw[axis][0].max(ws.min[axis]);
                clipped[axis][1] = raw[axis][1].min(ws.max[axis]);
                if clipped[axis][0] > clipped[axis][1] {
                    return Err(Error::InfeasibleScenario(format!(
                        "step {} cannot reach the workspace box along axis {axis}",
                        i + 1
                    )));
                }
            }
            boxes.push(clipped);
        }
        Ok(boxes)
    }
}

/// Builds the footstep MIQP for `scenario`.
pub fn assemble(scenario: &Scenario) -> Result<MiqpProblem> {
    let ctx = Context::new(scenario)?;
    scenario.check_goals_in_regions()?;
    let layout = ctx.layout;
    let robot = &scenario.robot;
    let n = robot.n_legs;
    let n_steps = layout.n_steps;
    let n_configs = layout.n_configs();
    let mut p = MiqpProblem::new(layout.total());
    p.layout = Some(layout);

    // Bounds.
    for (i, b) in ctx.reach_boxes()?.iter().enumerate() {
        for axis in 0..3 {
            p.set_bounds(layout.foot(i, axis), b[axis][0], b[axis][1]);
        }
    }
    let [s_lo, s_hi] = ctx.sin.value_range();
    let [c_lo, c_hi] = ctx.cos.value_range();
    for c in 0..n_configs {
        p.set_bounds(layout.theta(c), scenario.theta_range[0], scenario.theta_range[1]);
        p.set_bounds(layout.sin(c), s_lo, s_hi);
        p.set_bounds(layout.cos(c), c_lo, c_hi);
    }
    for j in layout.binaries() {
        p.mark_binary(j);
    }

    for i in 0..n_steps {
        let k = i as isize + 1;
        let step = i + 1;

        // Reference box around the nominal position.
        let nominal = ctx.nominal(k);
        for axis in 0..2 {
            let d = ctx.position(k, axis).sub(&nominal[axis]);
            let tag = |sub| RowTag::new(Family::Geometric, "ref_box", step, sub);
            add_le_affine(&mut p, &d, robot.l_bnd, tag(2 * axis));
            add_le_affine(&mut p, &Affine::default().sub(&d), robot.l_bnd, tag(2 * axis + 1));
        }

        // Reachability from the previous nominal position of the same leg.
        let prev = ctx.nominal(k - n as isize);
        for axis in 0..2 {
            let d = ctx.position(k, axis).sub(&prev[axis]);
            let tag = |sub| RowTag::new(Family::Reachability, "reach_xy", step, sub);
            add_le_affine(&mut p, &d, robot.d_lim, tag(2 * axis));
            add_le_affine(&mut p, &Affine::default().sub(&d), robot.d_lim, tag(2 * axis + 1));
        }
        let dz = ctx.position(k, 2).sub(&ctx.position(k - n as isize, 2));
        add_le_affine(&mut p, &dz, robot.dz_max, RowTag::new(Family::Reachability, "reach_z", step, 0));
        add_le_affine(
            &mut p,
            &Affine::default().sub(&dz),
            robot.dz_max,
            RowTag::new(Family::Reachability, "reach_z", step, 1),
        );

        // Region assignment.
        p.add_eq(
            (0..scenario.regions.len()).map(|r| (layout.region(i, r), 1.0)).collect(),
            1.0,
            RowTag::new(Family::Region, "one_region", step, 0),
        );
        for (r, region) in scenario.regions.iter().enumerate() {
            for (a, &b) in region.a.iter().zip(&region.b) {
                let mut expr = Affine::default();
                for axis in 0..3 {
                    if a[axis] != 0.0 {
                        expr.add_var(layout.foot(i, axis), a[axis]);
                    }
                }
                add_implication(&mut p, &expr, b, layout.region(i, r), RowTag::new(Family::Region, "in_region", step, r))?;
            }
        }

        // Trimming pins the step (and its configuration yaw) to the leg goal.
        let goal = ctx.leg_goals[i % n];
        let t = layout.trim(i);
        let theta = layout.theta(layout.config_of_step(i));
        let pinned = (0..3)
            .map(|axis| (Affine::var(layout.foot(i, axis)), goal[axis]))
            .chain(std::iter::once((Affine::var(theta), scenario.goal.yaw)));
        for (sub, (expr, target)) in pinned.enumerate() {
            let tag = |s| RowTag::new(Family::Trim, "trim_pin", step, s);
            add_implication(&mut p, &expr, target, t, tag(2 * sub))?;
            add_implication(&mut p, &Affine::default().sub(&expr), -target, t, tag(2 * sub + 1))?;
        }
        if i + n < n_steps {
            p.add_le(
                vec![(t, 1.0), (layout.trim(i + n), -1.0)],
                0.0,
                RowTag::new(Family::Trim, "trim_order", step, 0),
            );
        }
    }

    // Piecewise-linear sine and cosine with one active segment per configuration.
    for c in 0..n_configs {
        let theta = layout.theta(c);
        for (table, value, seg, kind) in [
            (&ctx.sin, layout.sin(c), 0usize, "sin_seg"),
            (&ctx.cos, layout.cos(c), 1usize, "cos_seg"),
        ] {
            let binary = |k| if seg == 0 { layout.sin_segment(c, k) } else { layout.cos_segment(c, k) };
            p.add_eq(
                (0..table.n_segments()).map(|k| (binary(k), 1.0)).collect(),
                1.0,
                RowTag::new(Family::Trig, if seg == 0 { "one_sin_seg" } else { "one_cos_seg" }, c + 1, 0),
            );
            for k in 0..table.n_segments() {
                let tag = |s| RowTag::new(Family::Trig, kind, c + 1, 4 * k + s);
                let th = Affine::var(theta);
                let (lo, hi) = (table.breakpoints[k], table.breakpoints[k + 1]);
                add_implication(&mut p, &Affine::default().sub(&th), -lo, binary(k), tag(0))?;
                add_implication(&mut p, &th, hi, binary(k), tag(1))?;
                // value = m theta + n
                let mut chord = Affine::var(value);
                chord.add_var(theta, -table.slopes[k]);
                add_implication(&mut p, &chord, table.intercepts[k], binary(k), tag(2))?;
                add_implication(&mut p, &Affine::default().sub(&chord), -table.intercepts[k], binary(k), tag(3))?;
            }
        }
    }

    // Valid inequalities: every (theta, sin), (theta, cos) and (cos, sin) point
    // the chord tables produce lies in the convex hull of the knots.
    for c in 0..n_configs {
        let (theta, sin, cos) = (layout.theta(c), layout.sin(c), layout.cos(c));
        let mut sub = 0;
        for (table, value, kind) in [(&ctx.sin, sin, "sin_hull"), (&ctx.cos, cos, "cos_hull")] {
            let knots: Vec<[f64; 2]> = table.breakpoints.iter().map(|&t| [t, table.kind.eval(t)]).collect();
            for (m, b, above) in hull_edges(&knots) {
                // value <= m theta + b (upper hull) or value >= m theta + b (lower hull)
                let sign = if above { 1.0 } else { -1.0 };
                p.add_le(
                    vec![(value, sign), (theta, -sign * m)],
                    sign * b,
                    RowTag::new(Family::Trig, kind, c + 1, sub),
                );
                sub += 1;
            }
        }
        let knots = &ctx.sin.breakpoints;
        for k in 0..ctx.sin.n_segments() {
            let mid = 0.5 * (knots[k] + knots[k + 1]);
            let half = 0.5 * (knots[k + 1] - knots[k]);
            p.add_le(
                vec![(cos, mid.cos()), (sin, mid.sin())],
                half.cos(),
                RowTag::new(Family::Trig, "circle_hull", c + 1, k),
            );
        }
        let [lo, hi] = ctx.sin.range();
        if hi - lo < 2.0 * std::f64::consts::PI - 1e-9 {
            let mid = 0.5 * (lo + hi);
            p.add_le(
                vec![(cos, -mid.cos()), (sin, -mid.sin())],
                -(0.5 * (hi - lo)).cos(),
                RowTag::new(Family::Trig, "circle_hull", c + 1, ctx.sin.n_segments()),
            );
        }
    }

    // Valid inequalities with one constant per segment: theta and value - m theta
    // are bounded by their extremes over the selected segment.
    for c in 0..n_configs {
        let theta = layout.theta(c);
        let mut sub = 0;
        for (table, value, seg) in [(&ctx.sin, layout.sin(c), 0usize), (&ctx.cos, layout.cos(c), 1usize)] {
            let binary = |k| if seg == 0 { layout.sin_segment(c, k) } else { layout.cos_segment(c, k) };
            let segments = table.n_segments();
            let knots = &table.breakpoints;
            let tag = |sub| RowTag::new(Family::Trig, "segment_cap", c + 1, sub);
            // theta >= sum lo_k S_k and theta <= sum hi_k S_k
            let mut lower = vec![(theta, -1.0)];
            lower.extend((0..segments).map(|k| (binary(k), knots[k])));
            p.add_le(lower, 0.0, tag(sub));
            let mut upper = vec![(theta, 1.0)];
            upper.extend((0..segments).map(|k| (binary(k), -knots[k + 1])));
            p.add_le(upper, 0.0, tag(sub + 1));
            sub += 2;
            for j in 0..segments {
                let m = table.slopes[j];
                // Chord values at the knots, so the expression is linear on each segment.
                let expr = |t: f64, k: usize| table.slopes[k] * t + table.intercepts[k] - m * t;
                let ends = |k: usize| [expr(knots[k], k), expr(knots[k + 1], k)];
                let mut up = vec![(value, 1.0), (theta, -m)];
                up.extend((0..segments).map(|k| (binary(k), -ends(k)[0].max(ends(k)[1]))));
                p.add_le(up, 0.0, tag(sub));
                let mut down = vec![(value, -1.0), (theta, m)];
                down.extend((0..segments).map(|k| (binary(k), ends(k)[0].min(ends(k)[1]))));
                p.add_le(down, 0.0, tag(sub + 1));
                sub += 2;
            }
        }
    }

    // Objective: goal error of the final configuration.
    let last = n_configs - 1;
    for i in (n_steps - n)..n_steps {
        let goal = ctx.leg_goals[i % n];
        let w = [
            Affine { terms: vec![(layout.foot(i, 0), 1.0)], constant: -goal[0] },
            Affine { terms: vec![(layout.foot(i, 1), 1.0)], constant: -goal[1] },
            Affine { terms: vec![(layout.foot(i, 2), 1.0)], constant: -goal[2] },
            Affine { terms: vec![(layout.theta(last), 1.0)], constant: -scenario.goal.yaw },
        ];
        add_quadratic_form(&mut p, &w, &scenario.weights.q_goal);
    }
    // Trim reward.
    for i in 0..n_steps {
        p.linear[layout.trim(i)] += scenario.weights.q_trim;
    }
    // CoC displacement between consecutive configurations.
    let config_center = |c: isize| -> [Affine; 2] {
        let mut out = [Affine::default(), Affine::default()];
        for leg in 0..n as isize {
            let k = c * n as isize - leg;
            for (axis, acc) in out.iter_mut().enumerate() {
                acc.add_scaled(&ctx.position(k, axis), 1.0 / n as f64);
            }
        }
        out
    };
    for c in 1..=n_configs as isize {
        let [cx, cy] = config_center(c);
        let [px, py] = config_center(c - 1);
        add_quadratic_form(&mut p, &[cx.sub(&px), cy.sub(&py)], &scenario.weights.q_drift);
    }

    debug_assert!(p.check_structure().is_ok());
    Ok(p)
}

/// Edges `(slope, intercept, upper)` of the convex hull of points sorted by x.
fn hull_edges(points: &[[f64; 2]]) -> Vec<(f64, f64, bool)> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut out = Vec::new();
    for upper in [true, false] {
        let mut chain: Vec<[f64; 2]> = Vec::new();
        for &q in points {
            while chain.len() >= 2 {
                let turn = cross(chain[chain.len() - 2], chain[chain.len() - 1], q);
                if (upper && turn >= 0.0) || (!upper && turn <= 0.0) {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(q);
        }
        for w in chain.windows(2) {
            let m = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
            out.push((m, w[0][1] - m * w[0][0], upper));
        }
    }
    out
}
