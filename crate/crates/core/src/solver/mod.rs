//! Branch-and-bound over the LP relaxation with an any-time incumbent.

mod bnb;
mod lp;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Structure;

pub use bnb::{branch_and_bound, branch_and_bound_observed, round_incumbent, NodeEvent};
pub use lp::{solve_lp, Fixing, LpSolution, LpStatus, LP_FEASIBILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Entry closest to 0.5, ties by lowest index.
    MostFractional,
    /// Lowest-index fractional entry.
    FirstFractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Seconds.
    pub time_limit: f64,
    /// Percent.
    pub gap_tol: f64,
    pub int_tol: f64,
    pub node_order: NodeOrder,
    pub branch_rule: BranchRule,
    /// Worker count; 1 is deterministic.
    pub threads: usize,
    /// Seconds between progress lines.
    pub log_interval: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            time_limit: 7200.0,
            gap_tol: 1e-6,
            int_tol: 1e-6,
            node_order: NodeOrder::BestBound,
            branch_rule: BranchRule::MostFractional,
            threads: 1,
            log_interval: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
    NoIncumbent,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeout => "feasible-timeout",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NoIncumbent => "no-incumbent",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub structure: Option<Structure>,
    /// Incumbent objective `z`.
    #[serde(with = "crate::float_serde::option")]
    pub objective: Option<f64>,
    /// Best remaining bound `z̄`.
    #[serde(with = "crate::float_serde")]
    pub upper_bound: f64,
    #[serde(with = "crate::float_serde")]
    pub gap_percent: f64,
    /// Objective of the root relaxation.
    #[serde(with = "crate::float_serde::option")]
    pub root_bound: Option<f64>,
    pub nodes_explored: usize,
    /// Seconds. Kept out of the JSON so identical runs serialize identically.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveResult {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `100·(z̄ − z)/|z̄|`; `+∞` without an incumbent or when `z̄ = 0 < z̄ − z`,
/// and 0 when the bound is attained.
pub fn gap_percent(incumbent: Option<f64>, upper_bound: f64) -> f64 {
    match incumbent {
        None => f64::INFINITY,
        Some(z) if z >= upper_bound => 0.0,
        Some(_) if upper_bound == 0.0 => f64::INFINITY,
        Some(z) => 100.0 * (upper_bound - z) / upper_bound.abs(),
    }
}
