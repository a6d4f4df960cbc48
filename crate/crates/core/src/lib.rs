//! Footstep planning for multilegged robots as a mixed-integer quadratic program.
//!
//! A [`Scenario`](model::Scenario) (robot, safe regions, start, goal, weights)
//! is turned into a [`MiqpProblem`](problem::MiqpProblem) by
//! [`formulation::assemble`], solved by [`solver::solve_miqp`], and driven
//! chunk by chunk by [`planner::plan`].

pub mod error;
pub mod formulation;
pub mod io;
pub mod linearization;
pub mod model;
pub mod planner;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
