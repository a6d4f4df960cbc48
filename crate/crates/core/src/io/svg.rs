//! Top-down SVG rendering of a plan: regions as filled polygons, footsteps as
//! per-leg glyphs, the CoC path of each configuration and the goal pose.
//!
//! All coordinates are written with fixed precision so identical plans give
//! byte-identical files.

use std::fmt::Write;

use crate::model::{Scenario, Xy};
use crate::planner::FootstepPlan;

const CANVAS: f64 = 900.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Counter-clockwise convex hull (monotone chain) of a point set.
pub fn convex_hull(points: &[Xy]) -> Vec<Xy> {
    let mut pts: Vec<Xy> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Xy, a: Xy, b: Xy| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Xy> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Xy>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

struct View {
    min: Xy,
    scale: f64,
    height: f64,
}

impl View {
    fn map(&self, p: Xy) -> (f64, f64) {
        (MARGIN + (p[0] - self.min[0]) * self.scale, self.height - MARGIN - (p[1] - self.min[1]) * self.scale)
    }
}

pub fn render_svg(plan: &FootstepPlan, scenario: &Scenario) -> String {
    let regions: Vec<Vec<Xy>> = scenario
        .regions
        .iter()
        .map(|r| convex_hull(&r.vertices().iter().map(|v| [v[0], v[1]]).collect::<Vec<_>>()))
        .collect();
    let n = scenario.robot.n_legs;
    let goal = [scenario.goal.position[0], scenario.goal.position[1]];

    let mut pts: Vec<Xy> = regions.iter().flatten().copied().collect();
    pts.extend(plan.steps.iter().map(|s| [s.x, s.y]));
    pts.extend(scenario.start.footholds.iter().map(|f| [f[0], f[1]]));
    pts.push(goal);
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-3);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let width = 2.0 * MARGIN + (max[0] - min[0]) * scale;
    let height = 2.0 * MARGIN + (max[1] - min[1]) * scale;
    let view = View { min, scale, height };
    let glyph = (0.012 * scale).clamp(3.0, 9.0);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    writeln!(out, r##"<g id="regions" fill="#d9d9d9" stroke="#7f7f7f" stroke-width="1">"##).unwrap();
    for (r, hull) in scenario.regions.iter().zip(&regions) {
        let points: Vec<String> = hull
            .iter()
            .map(|&p| {
                let (x, y) = view.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(out, r#"<polygon points="{}"><title>{}</title></polygon>"#, points.join(" "), escape(&r.name)).unwrap();
    }
    writeln!(out, "</g>").unwrap();

    // CoC of the start configuration and of every planned configuration.
    let mut centers: Vec<Xy> = vec![scenario.start_coc()];
    for config in plan.configurations().filter(|c| c.len() == n) {
        let (sx, sy) = config.iter().fold((0.0, 0.0), |(sx, sy), s| (sx + s.x, sy + s.y));
        centers.push([sx / n as f64, sy / n as f64]);
    }
    let path: Vec<String> = centers
        .iter()
        .map(|&c| {
            let (x, y) = view.map(c);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    writeln!(
        out,
        r##"<polyline id="coc" points="{}" fill="none" stroke="#333333" stroke-width="1.5" stroke-dasharray="4 2"/>"##,
        path.join(" ")
    )
    .unwrap();

    writeln!(out, r#"<g id="start">"#).unwrap();
    for f in &scenario.start.footholds {
        let (x, y) = view.map([f[0], f[1]]);
        let s = glyph * 1.6;
        writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="{s:.2}" height="{s:.2}" fill="black"/>"#, x - s / 2.0, y - s / 2.0)
            .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r#"<g id="footsteps" stroke-width="1.5">"#).unwrap();
    for (i, s) in plan.steps.iter().enumerate() {
        let color = PALETTE[(s.leg - 1) % PALETTE.len()];
        let (x, y) = view.map([s.x, s.y]);
        let fill = if s.trimmed { "none" } else { color };
        writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{glyph:.2}" fill="{fill}" stroke="{color}"><title>step {} leg {}</title></circle>"#,
            i + 1,
            s.leg
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    let (gx, gy) = view.map(goal);
    let arm = glyph * 2.0;
    let yaw = scenario.goal.yaw;
    let (hx, hy) = (gx + 3.0 * arm * yaw.cos(), gy - 3.0 * arm * yaw.sin());
    writeln!(out, r##"<g id="goal" stroke="#000000" stroke-width="2">"##).unwrap();
    writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, gx - arm, gy - arm, gx + arm, gy + arm).unwrap();
    writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, gx - arm, gy + arm, gx + arm, gy - arm).unwrap();
    writeln!(out, r#"<line x1="{gx:.2}" y1="{gy:.2}" x2="{hx:.2}" y2="{hy:.2}"/>"#).unwrap();
    writeln!(out, "</g>").unwrap();

    writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="12">"#).unwrap();
    for leg in 1..=n {
        let y = 16.0 * leg as f64;
        let color = PALETTE[(leg - 1) % PALETTE.len()];
        writeln!(out, r#"<circle cx="12" cy="{:.1}" r="5" fill="{color}"/>"#, y - 4.0).unwrap();
        writeln!(out, r#"<text x="22" y="{y:.1}">leg {leg}</text>"#).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
