use thiserror::Error;

use crate::model::Scenario;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid robot, scenario or table parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The scenario cannot admit any plan, detected before solving.
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    /// A constraint row could not be built (e.g. an unbounded variable inside a big-M row).
    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("brute force refused: {binaries} binaries exceeds the limit of {limit}")]
    TooManyBinaries { binaries: usize, limit: usize },

    /// A chunk of the chunked planner could not be solved.
    #[error("planning failed in chunk {chunk}: {reason}")]
    Planning {
        chunk: usize,
        reason: String,
        kind: PlanningFailure,
        snapshot: Box<Scenario>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanningFailure {
    Infeasible,
    LimitsHit,
}
