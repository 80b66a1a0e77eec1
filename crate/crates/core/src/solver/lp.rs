//! LP relaxation of a [`MilpModel`] through `microlp`, with `η` relaxed to
//! `[0, 1]` and optional per-entry fixings.

use std::time::Duration;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions, SolveOutcome, Variable};

use crate::error::{Error, Result};
use crate::milp::{MilpModel, RowKind, Sense};

/// Maximum row or bound violation accepted from the LP engine.
pub const LP_FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `cᵀx` recomputed from `values`; `−∞` when infeasible.
    pub objective: f64,
    /// Column values in model order; empty unless optimal.
    pub values: Vec<f64>,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            values: Vec::new(),
        }
    }

    pub fn eta<'a>(&'a self, model: &MilpModel) -> &'a [f64] {
        &self.values[..model.num_eta()]
    }
}

/// Fixes `η[col]` to 1 (`true`) or 0 (`false`).
pub type Fixing = (usize, bool);

pub(crate) struct Relaxation {
    pub problem: Problem,
    pub vars: Vec<Variable>,
}

impl Relaxation {
    pub fn new(model: &MilpModel, fixings: &[Fixing]) -> Self {
        let mut lower = model.lower().to_vec();
        let mut upper = model.upper().to_vec();
        for &(col, one) in fixings {
            let v = if one { 1.0 } else { 0.0 };
            lower[col] = v;
            upper[col] = v;
        }
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<Variable> = (0..model.num_columns())
            .map(|c| problem.add_var(model.objective()[c], (lower[c], upper[c])))
            .collect();
        for row in model.rows() {
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Eq => ComparisonOp::Eq,
                Sense::Ge => ComparisonOp::Ge,
            };
            problem.add_constraint(
                row.terms.iter().filter(|t| t.1 != 0.0).map(|&(c, a)| (vars[c], a)),
                op,
                row.rhs,
            );
        }
        Self { problem, vars }
    }

    pub fn solve(&self, time_limit: Option<Duration>) -> Result<Outcome> {
        let mut options = SolveOptions::default();
        options.time_limit = time_limit;
        classify(self.problem.solve_with(options))
    }
}

/// Result of one engine call.
pub(crate) enum Outcome {
    Solved(Box<microlp::Solution>),
    Infeasible,
    Unbounded,
    TimedOut,
}

pub(crate) fn classify(res: std::result::Result<SolveOutcome, microlp::Error>) -> Result<Outcome> {
    match res {
        Ok(SolveOutcome::Solution(s)) => Ok(Outcome::Solved(Box::new(s))),
        Ok(SolveOutcome::Interrupted(_)) => Ok(Outcome::TimedOut),
        Err(microlp::Error::Infeasible) => Ok(Outcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(Outcome::Unbounded),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

/// Removes the engine's round-off: each `η` block is rescaled to sum to one
/// and every `τ^m` is reset to the largest value its margin rows allow, so
/// selection and margin rows hold to machine precision.
fn polish(model: &MilpModel, x: &mut [f64]) {
    let catalog = model.catalog();
    for i in 0..catalog.num_vars() {
        let block = &mut x[catalog.block(i)];
        block.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let sum: f64 = block.iter().sum();
        if sum > 0.0 {
            block.iter_mut().for_each(|v| *v /= sum);
        }
    }
    if model.num_tau() == 0 {
        return;
    }
    for m in 0..model.num_tau() {
        let t = model.tau_column(m);
        x[t] = model.upper()[t];
    }
    for row in model.rows() {
        let RowKind::Margin { sample, .. } = row.kind else {
            continue;
        };
        let t = model.tau_column(sample);
        let mut coef = 0.0;
        let mut rest = 0.0;
        for &(c, a) in &row.terms {
            if c == t {
                coef += a;
            } else {
                rest += a * x[c];
            }
        }
        if coef > 0.0 {
            x[t] = x[t].min((row.rhs - rest) / coef);
        }
    }
    for m in 0..model.num_tau() {
        let t = model.tau_column(m);
        x[t] = x[t].max(model.lower()[t]);
    }
}

/// Reads all column values, polishes them and checks them against the
/// model. `None` when a row or bound is still violated beyond the tolerance.
pub(crate) fn extract(model: &MilpModel, sol: &microlp::Solution, vars: &[Variable]) -> Option<LpSolution> {
    let mut values: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
    polish(model, &mut values);
    let violation = model.max_violation(&values);
    if violation.is_nan() || violation > LP_FEASIBILITY_TOL {
        log::debug!("LP answer rejected, violation {violation:e}");
        return None;
    }
    Some(LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_value(&values),
        values,
    })
}

/// Solves the relaxation from scratch with the given fixings.
pub fn solve_lp(model: &MilpModel, fixings: &[Fixing]) -> Result<LpSolution> {
    let relax = Relaxation::new(model, fixings);
    match relax.solve(None)? {
        Outcome::Solved(sol) => extract(model, &sol, &relax.vars)
            .ok_or_else(|| Error::Lp("LP solution violates the model beyond tolerance".into())),
        Outcome::Infeasible => Ok(LpSolution::infeasible()),
        Outcome::Unbounded => Ok(LpSolution::unbounded()),
        Outcome::TimedOut => unreachable!("no time limit was set"),
    }
}
