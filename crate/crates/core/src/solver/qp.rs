//! Convex QP relaxation engine.
//!
//! A relaxation is the [`MiqpProblem`] with binaries relaxed to `[0, 1]` and
//! a set of binary fixings applied. Before handing the problem to the
//! interior-point solver the relaxation is reduced: fixed variables are
//! substituted out, rows that cannot be violated inside the current box are
//! dropped, and binaries whose value 1 (or 0) would violate a row on its own
//! are fixed by single-row implication.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use crate::model::Xyz;
use crate::problem::{MiqpProblem, SparseRow};

/// Partial assignment of binaries, indexed by position in `problem.binaries`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fixings {
    values: Box<[i8]>,
}

impl Fixings {
    pub fn none(num_binaries: usize) -> Self {
        Self { values: vec![-1; num_binaries].into_boxed_slice() }
    }

    pub fn from_values(values: &[bool]) -> Self {
        Self { values: values.iter().map(|&v| v as i8).collect() }
    }

    pub fn get(&self, pos: usize) -> Option<bool> {
        match self.values[pos] {
            -1 => None,
            v => Some(v == 1),
        }
    }

    pub fn fix(&mut self, pos: usize, value: bool) {
        self.values[pos] = value as i8;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fixed_count(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpTolerances {
    /// Absolute tolerance on primal and dual residuals of an optimal answer.
    pub feasibility: f64,
    /// Interior-point iteration cap.
    pub max_iter: u32,
}

impl Default for QpTolerances {
    fn default() -> Self {
        Self { feasibility: 1e-6, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    /// Objective unbounded below (only possible with infinite bounds).
    Unbounded,
    NumericalError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Full-length primal vector (fixed variables included).
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    /// Largest constraint or bound violation of `x`.
    pub primal_residual: f64,
    /// Infinity norm of the stationarity residual of the reduced problem.
    pub dual_residual: f64,
    /// For infeasible answers: how the infeasibility was established.
    pub certificate: Option<String>,
}

impl QpSolution {
    fn infeasible(n: usize, why: String) -> Self {
        Self {
            x: vec![f64::NAN; n],
            objective: f64::INFINITY,
            status: QpStatus::Infeasible,
            primal_residual: f64::INFINITY,
            dual_residual: f64::NAN,
            certificate: Some(why),
        }
    }
}

/// Solves the convex relaxation of `problem` under `fixings`.
pub fn solve_qp(problem: &MiqpProblem, fixings: &Fixings, tol: &QpTolerances) -> QpSolution {
    let (mut lower, mut upper) = (problem.lower.clone(), problem.upper.clone());
    for (pos, &j) in problem.binaries.iter().enumerate() {
        if let Some(v) = fixings.get(pos) {
            let v = v as u8 as f64;
            lower[j] = v;
            upper[j] = v;
        }
    }
    solve_with_bounds(problem, lower, upper, tol)
}

/// Solves the relaxation with explicit variable bounds.
pub fn solve_with_bounds(
    problem: &MiqpProblem,
    mut lower: Vec<f64>,
    mut upper: Vec<f64>,
    tol: &QpTolerances,
) -> QpSolution {
    let n = problem.num_vars;
    if let Err(why) = propagate_bounds(problem, &mut lower, &mut upper) {
        return QpSolution::infeasible(n, why);
    }
    let reduced = match Reduced::build(problem, &lower, &upper) {
        Ok(r) => r,
        Err(why) => return QpSolution::infeasible(n, why),
    };
    reduced.solve(problem, &lower, &upper, tol)
}

const PRESOLVE_TOL: f64 = 1e-9;

fn row_activity_range(row: &SparseRow, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    row.coeffs.iter().fold((0.0, 0.0), |(lo, hi), &(j, a)| {
        if a > 0.0 {
            (lo + a * lower[j], hi + a * upper[j])
        } else {
            (lo + a * upper[j], hi + a * lower[j])
        }
    })
}

/// Activity bounds of `sign * row` with the number of unbounded contributions.
struct Activity {
    min: f64,
    min_inf: usize,
}

fn min_activity(row: &SparseRow, sign: f64, lower: &[f64], upper: &[f64]) -> Activity {
    let mut act = Activity { min: 0.0, min_inf: 0 };
    for &(j, a) in &row.coeffs {
        let a = sign * a;
        let v = if a > 0.0 { a * lower[j] } else { a * upper[j] };
        if v.is_finite() {
            act.min += v;
        } else {
            act.min_inf += 1;
        }
    }
    act
}

const PROPAGATION_PASSES: usize = 20;
/// Safety margin added to every derived bound.
const BOUND_EPS: f64 = 1e-9;
/// A binary whose derived bound is this far inside `[0, 1]` is fixed.
const BINARY_EPS: f64 = 1e-6;

/// Activity-based bound propagation: every row `a . x <= b` (and both sides
/// of every equality) bounds each of its variables by what the others can
/// contribute. Binaries are rounded to fixings. Returns an explanation if the
/// box becomes empty.
fn propagate_bounds(problem: &MiqpProblem, lower: &mut [f64], upper: &mut [f64]) -> Result<(), String> {
    let sides = problem
        .inequalities
        .iter()
        .map(|r| (r, 1.0))
        .chain(problem.equalities.iter().flat_map(|r| [(r, 1.0), (r, -1.0)]));
    let sides: Vec<(&SparseRow, f64)> = sides.collect();
    for _ in 0..PROPAGATION_PASSES {
        let mut changed = false;
        for &(row, sign) in &sides {
            let rhs = sign * row.rhs;
            let act = min_activity(row, sign, lower, upper);
            if act.min_inf == 0 && act.min > rhs + PRESOLVE_TOL * (1.0 + rhs.abs()) {
                return Err(format!("row {} cannot be satisfied inside the current box", row.tag));
            }
            if act.min_inf > 1 {
                continue;
            }
            for &(j, a) in &row.coeffs {
                let a = sign * a;
                if a == 0.0 || lower[j] == upper[j] {
                    continue;
                }
                let own = if a > 0.0 { a * lower[j] } else { a * upper[j] };
                let rest = match (own.is_finite(), act.min_inf) {
                    (true, 0) => act.min - own,
                    (false, 1) => act.min,
                    _ => continue,
                };
                let limit = (rhs - rest) / a;
                let margin = BOUND_EPS * (1.0 + limit.abs());
                let binary = problem.is_binary(j);
                if a > 0.0 {
                    let bound = limit + margin;
                    if binary {
                        if bound < 1.0 - BINARY_EPS && upper[j] > 0.0 {
                            upper[j] = 0.0;
                            changed = true;
                        }
                    } else if bound < upper[j] - tightening_step(lower[j], upper[j]) {
                        upper[j] = bound;
                        changed = true;
                    }
                } else {
                    let bound = limit - margin;
                    if binary {
                        if bound > BINARY_EPS && lower[j] < 1.0 {
                            lower[j] = 1.0;
                            changed = true;
                        }
                    } else if bound > lower[j] + tightening_step(lower[j], upper[j]) {
                        lower[j] = bound;
                        changed = true;
                    }
                }
                if lower[j] > upper[j] {
                    if lower[j] - upper[j] > PRESOLVE_TOL * (1.0 + lower[j].abs()) || binary {
                        return Err(format!("bounds of {} cross after propagation", problem.var_name(j)));
                    }
                    let mid = 0.5 * (lower[j] + upper[j]);
                    lower[j] = mid;
                    upper[j] = mid;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

/// Smallest improvement worth recording for a continuous bound; stops long
/// tails of tiny tightenings.
fn tightening_step(lower: f64, upper: f64) -> f64 {
    let width = upper - lower;
    if width.is_finite() { (1e-3 * width).max(1e-7) } else { 1e-7 }
}

/// Tolerance for accepting a polished point.
const POLISH_TOL: f64 = 1e-7;

/// Groups of binaries tied by a `sum = 1` row that carry no objective terms.
fn choice_groups(problem: &MiqpProblem) -> Vec<&SparseRow> {
    let in_objective = |j: usize| problem.linear[j] != 0.0;
    let mut quad_vars: Vec<usize> = problem.quad.keys().flat_map(|&(i, j)| [i, j]).collect();
    quad_vars.sort_unstable();
    problem
        .equalities
        .iter()
        .filter(|row| {
            row.rhs == 1.0
                && row.coeffs.len() >= 2
                && row.coeffs.iter().all(|&(j, a)| {
                    a == 1.0 && problem.is_binary(j) && !in_objective(j) && quad_vars.binary_search(&j).is_err()
                })
        })
        .collect()
}

/// Interior-point solutions sit at the center of the optimal face, which
/// spreads tied choices evenly across a group. This moves each choice group
/// to a single member whenever that keeps every row satisfied; the objective
/// does not depend on the group, so the point stays optimal.
fn polish_choice_groups(problem: &MiqpProblem, x: &mut [f64], lower: &[f64], upper: &[f64]) {
    let groups = choice_groups(problem);
    if groups.is_empty() {
        return;
    }
    let mut member = vec![false; problem.num_vars];
    for g in &groups {
        for &(j, _) in &g.coeffs {
            member[j] = true;
        }
    }
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); problem.num_vars];
    for (r, row) in problem.inequalities.iter().enumerate() {
        for &(j, _) in &row.coeffs {
            if member[j] {
                touching[j].push(r);
            }
        }
    }
    for g in groups {
        let vars: Vec<usize> = g.coeffs.iter().map(|&(j, _)| j).collect();
        if vars.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0) {
            continue;
        }
        let mut rows: Vec<usize> = vars.iter().flat_map(|&j| touching[j].iter().copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut order = vars.clone();
        order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        let saved: Vec<f64> = vars.iter().map(|&j| x[j]).collect();
        for &pick in &order {
            if upper[pick] < 1.0 || vars.iter().any(|&j| j != pick && lower[j] > 0.0) {
                continue;
            }
            for &j in &vars {
                x[j] = if j == pick { 1.0 } else { 0.0 };
            }
            let ok = rows.iter().all(|&r| {
                let row = &problem.inequalities[r];
                row.activity(x) <= row.rhs + POLISH_TOL
            });
            if ok {
                break;
            }
            for (&j, &v) in vars.iter().zip(&saved) {
                x[j] = v;
            }
        }
    }
}

/// Coefficient tightening for a reduced row with a single free binary `y`:
/// the binary's coefficient is shrunk to what the rest of the row can
/// actually reach inside the current box. Both values of `y` keep exactly
/// the same meaning, but the relaxation becomes tighter (local big-M).
fn tighten_indicator(
    problem: &MiqpProblem,
    free: &[usize],
    coeffs: &mut [(usize, f64)],
    rhs: &mut f64,
    lower: &[f64],
    upper: &[f64],
) {
    let mut binary = None;
    for (k, &(p, _)) in coeffs.iter().enumerate() {
        if problem.is_binary(free[p]) {
            if binary.is_some() {
                return;
            }
            binary = Some(k);
        }
    }
    let Some(k) = binary else { return };
    let mut rest_max = 0.0;
    for (i, &(p, a)) in coeffs.iter().enumerate() {
        if i != k {
            let j = free[p];
            rest_max += if a > 0.0 { a * upper[j] } else { a * lower[j] };
        }
    }
    if !rest_max.is_finite() {
        return;
    }
    let a_y = coeffs[k].1;
    if a_y > 0.0 {
        // y = 0 leaves the row slack by d; y = 1 must still give rest <= rhs - a_y.
        let d = *rhs - rest_max;
        if d > 0.0 {
            coeffs[k].1 -= d;
            *rhs -= d;
        }
    } else if rest_max < *rhs - a_y {
        // y = 1 leaves the row slack; y = 0 keeps rest <= rhs.
        coeffs[k].1 = *rhs - rest_max;
    }
}

struct Reduced {
    /// Original index of each reduced variable.
    free: Vec<usize>,
    /// Reduced index of each original variable, if free.
    position: Vec<Option<usize>>,
    /// Constant part of the objective after substitution.
    constant: f64,
    p: CscMatrix<f64>,
    q: Vec<f64>,
    a: CscMatrix<f64>,
    b: Vec<f64>,
    n_eq: usize,
    n_ineq: usize,
}

impl Reduced {
    fn build(problem: &MiqpProblem, lower: &[f64], upper: &[f64]) -> Result<Self, String> {
        let n = problem.num_vars;
        for j in 0..n {
            if lower[j] > upper[j] + PRESOLVE_TOL {
                return Err(format!("bounds of {} cross", problem.var_name(j)));
            }
        }
        let fixed = |j: usize| upper[j] - lower[j] <= 0.0;
        let mut position = vec![None; n];
        let mut free = Vec::new();
        for j in 0..n {
            if !fixed(j) {
                position[j] = Some(free.len());
                free.push(j);
            }
        }
        let nf = free.len();
        let fixed_value = |j: usize| lower[j];

        // Objective: 1/2 x'Qx + c'x + k with fixed parts substituted.
        let mut q = vec![0.0; nf];
        let mut constant = problem.constant;
        for j in 0..n {
            match position[j] {
                Some(p) => q[p] += problem.linear[j],
                None => constant += problem.linear[j] * fixed_value(j),
            }
        }
        let mut p_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nf];
        for (&(i, j), &v) in &problem.quad {
            match (position[i], position[j]) {
                (Some(pi), Some(pj)) => {
                    let (r, c) = (pi.min(pj), pi.max(pj));
                    p_cols[c].push((r, v));
                }
                (Some(pi), None) => q[pi] += v * fixed_value(j),
                (None, Some(pj)) => q[pj] += v * fixed_value(i),
                (None, None) => {
                    constant += if i == j { 0.5 * v * fixed_value(i).powi(2) } else { v * fixed_value(i) * fixed_value(j) };
                }
            }
        }

        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let reduce_row = |row: &SparseRow| -> (Vec<(usize, f64)>, f64) {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                match position[j] {
                    Some(p) => coeffs.push((p, a)),
                    None => rhs -= a * fixed_value(j),
                }
            }
            (coeffs, rhs)
        };
        for row in &problem.equalities {
            let (coeffs, rhs) = reduce_row(row);
            if coeffs.is_empty() {
                if rhs.abs() > PRESOLVE_TOL {
                    return Err(format!("equality {} violated by fixed variables", row.tag));
                }
                continue;
            }
            rows.push((coeffs, rhs));
        }
        let n_eq = rows.len();
        for row in &problem.inequalities {
            let (min_act, max_act) = row_activity_range(row, lower, upper);
            if max_act <= row.rhs {
                continue;
            }
            if min_act > row.rhs + PRESOLVE_TOL {
                return Err(format!("row {} cannot be satisfied inside the current box", row.tag));
            }
            let (mut coeffs, mut rhs) = reduce_row(row);
            if coeffs.is_empty() {
                continue;
            }
            tighten_indicator(problem, &free, &mut coeffs, &mut rhs, lower, upper);
            rows.push((coeffs, rhs));
        }
        for (p, &j) in free.iter().enumerate() {
            if upper[j].is_finite() {
                rows.push((vec![(p, 1.0)], upper[j]));
            }
            if lower[j].is_finite() {
                rows.push((vec![(p, -1.0)], -lower[j]));
            }
        }
        let n_ineq = rows.len() - n_eq;

        let p = csc_from_columns(nf, p_cols);
        let mut a_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nf];
        let mut b = Vec::with_capacity(rows.len());
        for (r, (coeffs, rhs)) in rows.into_iter().enumerate() {
            for (p, a) in coeffs {
                a_cols[p].push((r, a));
            }
            b.push(rhs);
        }
        let a = csc_from_columns(b.len(), a_cols);
        Ok(Self { free, position, constant, p, q, a, b, n_eq, n_ineq })
    }

    fn solve(&self, problem: &MiqpProblem, lower: &[f64], upper: &[f64], tol: &QpTolerances) -> QpSolution {
        let n = problem.num_vars;
        let mut x: Vec<f64> = (0..n).map(|j| if self.position[j].is_none() { lower[j] } else { 0.0 }).collect();
        if self.free.is_empty() {
            let residual = primal_residual(problem, &x, lower, upper);
            if residual > tol.feasibility {
                return QpSolution::infeasible(n, format!("fixed point violates constraints by {residual:.3e}"));
            }
            return QpSolution {
                objective: problem.objective(&x),
                x,
                status: QpStatus::Optimal,
                primal_residual: residual,
                dual_residual: 0.0,
                certificate: None,
            };
        }

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if self.n_eq > 0 {
            cones.push(ZeroConeT(self.n_eq));
        }
        if self.n_ineq > 0 {
            cones.push(NonnegativeConeT(self.n_ineq));
        }
        let settings = DefaultSettings::<f64> {
            verbose: false,
            max_iter: tol.max_iter,
            presolve_enable: false,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&self.p, &self.q, &self.a, &self.b, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                return QpSolution {
                    x: vec![f64::NAN; n],
                    objective: f64::NAN,
                    status: QpStatus::NumericalError,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    certificate: Some(e.to_string()),
                }
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => QpStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => QpStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => QpStatus::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => QpStatus::MaxIterations,
            _ => QpStatus::NumericalError,
        };
        if status == QpStatus::Infeasible {
            return QpSolution::infeasible(
                n,
                format!("Farkas certificate from the interior-point solver ({:?})", sol.status),
            );
        }
        for (p, &j) in self.free.iter().enumerate() {
            // Interior points sit strictly inside the box; clip the tiny excursions.
            x[j] = sol.x[p].clamp(lower[j], upper[j]);
        }
        let dual_residual = self.stationarity(&sol.x, &sol.z);
        if status == QpStatus::Optimal {
            polish_choice_groups(problem, &mut x, lower, upper);
        }
        let primal_residual = primal_residual(problem, &x, lower, upper);
        let mut status = status;
        if status == QpStatus::Optimal && primal_residual > tol.feasibility {
            status = QpStatus::NumericalError;
        }
        QpSolution {
            objective: problem.objective(&x),
            x,
            status,
            primal_residual,
            dual_residual,
            certificate: None,
        }
    }

    /// `|| P x + q + A' z ||_inf` on the reduced problem.
    fn stationarity(&self, x: &[f64], z: &[f64]) -> f64 {
        let nf = self.free.len();
        let mut r = self.q.clone();
        for col in 0..nf {
            for k in self.p.colptr[col]..self.p.colptr[col + 1] {
                let (row, v) = (self.p.rowval[k], self.p.nzval[k]);
                r[row] += v * x[col];
                if row != col {
                    r[col] += v * x[row];
                }
            }
            for k in self.a.colptr[col]..self.a.colptr[col + 1] {
                r[col] += self.a.nzval[k] * z[self.a.rowval[k]];
            }
        }
        let _ = self.constant;
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn csc_from_columns(nrows: usize, mut cols: Vec<Vec<(usize, f64)>>) -> CscMatrix<f64> {
    let ncols = cols.len();
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in cols.iter_mut() {
        col.sort_by_key(|&(r, _)| r);
        let mut last: Option<usize> = None;
        for &(r, v) in col.iter() {
            if last == Some(r) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                last = Some(r);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
}

/// Largest violation of rows and bounds at `x`.
pub fn primal_residual(problem: &MiqpProblem, x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let rows = problem
        .inequalities
        .iter()
        .map(|r| (r.activity(x) - r.rhs).max(0.0))
        .chain(problem.equalities.iter().map(|r| (r.activity(x) - r.rhs).abs()));
    let bounds = (0..problem.num_vars).map(|j| (lower[j] - x[j]).max(x[j] - upper[j]).max(0.0));
    rows.chain(bounds).fold(0.0, f64::max)
}

pub enum LinearOutcome {
    Optimal(f64),
    Infeasible,
    Unbounded,
    Failed,
}

/// Minimizes `objective . x` over `{x : a_k . x <= b_k}` in three dimensions.
pub fn minimize_linear_over_polytope(a: &[Xyz], b: &[f64], objective: Xyz) -> LinearOutcome {
    let mut problem = MiqpProblem::new(3);
    problem.linear = objective.to_vec();
    for (k, (row, &rhs)) in a.iter().zip(b).enumerate() {
        problem.add_le(
            vec![(0, row[0]), (1, row[1]), (2, row[2])],
            rhs,
            crate::problem::RowTag::generic(k),
        );
    }
    let sol = solve_qp(&problem, &Fixings::none(0), &QpTolerances::default());
    match sol.status {
        QpStatus::Optimal => LinearOutcome::Optimal(sol.objective),
        QpStatus::Infeasible => LinearOutcome::Infeasible,
        QpStatus::Unbounded => LinearOutcome::Unbounded,
        _ => LinearOutcome::Failed,
    }
}
