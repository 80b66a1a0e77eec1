//! Exact structure learning for Bayesian network classifiers.
//!
//! Structures maximizing the probabilistic soft margin (SM), the binary soft
//! margin (SBM) or a decomposable MDL score are found by solving a mixed-integer
//! linear program whose acyclicity is enforced with `N² − N` order constraints.
//! The program is solved by an any-time branch-and-bound engine over an LP
//! relaxation, reporting the incumbent together with a worst-case
//! sub-optimality gap.
//!
//! The pipeline, bottom-up:
//!
//! * [`data`]: CSV ingestion, quantile discretization, stratified folds.
//! * [`catalog`]: candidate parent sets per variable and the stacked
//!   selection vector layout.
//! * [`estimation`]: count tables and Laplace-smoothed CPT parameters,
//!   including the one-vs-all families used by the binary margin.
//! * [`coefficients`]: linear objective coefficients for SM, SBM and MDL.
//! * [`milp`]: the mixed-integer program, order certificates and MPS export.
//! * [`solver`]: LP relaxation and branch-and-bound.
//! * [`classifier`]: prediction, margins, evaluation and cross-validation.
//! * [`cli`]: the `marginbn` command-line tool.

pub mod catalog;
pub mod classifier;
pub mod cli;
pub mod coefficients;
pub mod data;
mod error;
pub mod estimation;
pub mod milp;
pub mod pipeline;
pub mod solver;

mod float_serde;

pub use catalog::{CatalogMode, ParentSetCatalog, Structure};
pub use classifier::{BnClassifier, EvalReport};
pub use coefficients::{gamma_from_p, CoefficientBank, ScoreKind, DEFAULT_P_GRID};
pub use data::{Dataset, FoldPlan};
pub use error::{Error, Result};
pub use estimation::{OvaParamTable, ParamTable};
pub use milp::MilpModel;
pub use solver::{branch_and_bound, SolveConfig, SolveResult, SolveStatus};
