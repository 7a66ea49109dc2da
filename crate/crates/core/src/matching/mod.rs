//! Error-tolerant minimum-cost subgraph matching between segment graphs.

mod problem;
mod solver;
mod sweep;

pub use problem::{build_problem, MatchProblem, MatchResult};
pub use solver::{solve, solve_with_stats, SolveLimits, SolveStats};
pub use sweep::{component_pairs, components, match_all_components, Component, ComponentMatch, PairStatus};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub eps_node: f64,
    pub eps_edge: f64,
    pub size_cap: usize,
    /// Per-pair budget; a pair that runs out is rejected.
    pub timeout_ms: Option<u64>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { eps_node: 0.1, eps_edge: 0.1, size_cap: 400, timeout_ms: Some(10_000) }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_node", self.eps_node), ("eps_edge", self.eps_edge)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}
