//! Exhaustive enumeration of binary assignments; the reference oracle for
//! [`solve_miqp`](super::solve_miqp) on small problems.

use std::time::Instant;

use super::bnb::{MiqpSolution, MiqpStatus};
use super::qp::{solve_qp, Fixings, QpStatus, QpTolerances};
use crate::error::{Error, Result};
use crate::problem::MiqpProblem;

pub const BRUTE_FORCE_MAX_BINARIES: usize = 20;

pub fn brute_force_solve(problem: &MiqpProblem) -> Result<MiqpSolution> {
    let b = problem.binaries.len();
    if b > BRUTE_FORCE_MAX_BINARIES {
        return Err(Error::TooManyBinaries { binaries: b, limit: BRUTE_FORCE_MAX_BINARIES });
    }
    let start = Instant::now();
    let tol = QpTolerances::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    let total = 1usize << b;
    for mask in 0..total {
        let values: Vec<bool> = (0..b).map(|k| mask >> k & 1 == 1).collect();
        let sol = solve_qp(problem, &Fixings::from_values(&values), &tol);
        if sol.status != QpStatus::Optimal {
            continue;
        }
        if best.as_ref().is_none_or(|(_, o)| sol.objective < *o) {
            trace.push((mask + 1, sol.objective));
            best = Some((sol.x, sol.objective));
        }
    }
    let (x, objective, status) = match best {
        Some((x, o)) => (Some(x), o, MiqpStatus::Optimal),
        None => (None, f64::INFINITY, MiqpStatus::Infeasible),
    };
    Ok(MiqpSolution {
        x,
        objective,
        best_bound: objective,
        gap: if status == MiqpStatus::Optimal { 0.0 } else { f64::INFINITY },
        nodes: total,
        wall_time: start.elapsed(),
        status,
        incumbent_trace: trace,
    })
}
