//! Mixed-integer QP solver: convex relaxations plus best-first branch-and-bound.

mod bnb;
mod brute;
pub mod qp;

pub use bnb::{relative_gap, solve_miqp, BnbNode, MiqpLimits, MiqpSolution, MiqpStatus, PRUNE_TOL};
pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_BINARIES};
pub use qp::{solve_qp, Fixings, QpSolution, QpStatus, QpTolerances};
