//! Incremental stable matching: given preferences before and after a change
//! and a matching stable before it, find a matching stable afterwards that
//! minimizes the symmetric difference to the original.
//!
//! The crate provides exact solvers for the tractable cases (strict roommates
//! via guess-and-propagate, marriage with ties via partner guessing or tie
//! breaking, master-list and few-outlier profiles), an exponential-time oracle
//! for verification on small instances, and generators that turn the known
//! hardness constructions into concrete test instances.

pub mod classic;
pub mod gadgets;
pub mod gen;
pub mod incremental;
pub mod model;
pub mod oracle;
pub mod structured;
pub mod ties;

pub use model::{
    modified_agents, swap_distance, symmetric_difference, symmetric_difference_count,
    validate_instance, AgentId, Bipartition, IncrementalInstance, Matching, Pair, Partner,
    PreferenceList, PreferenceProfile, SwapDistance, Violation,
};

use std::fmt;

/// Errors shared by all modules.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A precondition on the input was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An enumeration would exceed a configured bound.
    #[error("resource limit exceeded: {what} needs {need} but the limit is {limit}")]
    ResourceLimit {
        what: &'static str,
        need: u128,
        limit: u128,
    },
    /// A solver invariant failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Result of an incremental solve: the optimal stable matching for the
/// changed profile with its distance to the initial matching, or the
/// certified absence of any stable matching there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Solved { matching: Matching, diff: u64 },
    Infeasible,
}

impl SolveOutcome {
    pub fn solved(matching: Matching, diff: u64) -> Self {
        SolveOutcome::Solved { matching, diff }
    }

    pub fn diff(&self) -> Option<u64> {
        match self {
            SolveOutcome::Solved { diff, .. } => Some(*diff),
            SolveOutcome::Infeasible => None,
        }
    }

    pub fn matching(&self) -> Option<&Matching> {
        match self {
            SolveOutcome::Solved { matching, .. } => Some(matching),
            SolveOutcome::Infeasible => None,
        }
    }
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveOutcome::Solved { diff, .. } => write!(f, "solved (diff {diff})"),
            SolveOutcome::Infeasible => write!(f, "infeasible"),
        }
    }
}

/// Enumeration bounds. Exceeding a bound is an error, never a silent
/// truncation or a partial answer.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Maximum number of agents for exhaustive stable-matching enumeration.
    pub oracle_agents: usize,
    /// Maximum value of the guess-space bound of the roommates solver.
    pub guess_space: u128,
    /// Maximum number of outliers for the enumeration by outlier guessing.
    pub outliers: usize,
    /// Maximum number of tied agents for partner guessing.
    pub tied_agents: usize,
    /// Maximum summed tie size for tie-break enumeration.
    pub summed_tie_size: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            oracle_agents: 12,
            guess_space: 5_000_000_000,
            outliers: 8,
            tied_agents: 8,
            summed_tie_size: 16,
        }
    }
}
