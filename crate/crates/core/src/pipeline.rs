//! A single learning run: catalog, coefficients, program, solve and the
//! resulting classifier.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogMode, ParentSetCatalog};
use crate::classifier::BnClassifier;
use crate::coefficients::{gamma_from_p, CoefficientBank, ScoreKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::milp::{MilpModel, DEFAULT_DELTA};
use crate::solver::{branch_and_bound, SolveConfig, SolveResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub score: ScoreKind,
    /// Desired log-margin. Ignored for MDL.
    #[serde(with = "crate::float_serde")]
    pub gamma: f64,
    pub max_parents: usize,
    pub delta: f64,
    pub solve: SolveConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            score: ScoreKind::Sm,
            gamma: gamma_from_p(0.9).expect("0.9 is a valid p"),
            max_parents: 2,
            delta: DEFAULT_DELTA,
            solve: SolveConfig::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.score.is_margin() && !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be finite, got {}",
                self.gamma
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Outcome of [`learn`]. `classifier` is `None` only when the solver stopped
/// before finding any structure.
#[derive(Debug, Clone)]
pub struct Learned {
    pub catalog: ParentSetCatalog,
    pub result: SolveResult,
    pub classifier: Option<BnClassifier>,
}

/// Margin scores restrict feature parents to sets containing the class;
/// MDL searches every parent set.
pub fn catalog_for(score: ScoreKind, num_vars: usize, max_parents: usize) -> Result<ParentSetCatalog> {
    if max_parents + 1 > num_vars {
        warn!(
            "max-parents {max_parents} exceeds the {} other variables; clamping",
            num_vars - 1
        );
    }
    let mode = if score.is_margin() {
        CatalogMode::Margin
    } else {
        CatalogMode::Generative
    };
    ParentSetCatalog::enumerate(num_vars, max_parents, mode)
}

pub fn build_model(ds: &Dataset, config: &LearnConfig) -> Result<MilpModel> {
    config.validate()?;
    let catalog = catalog_for(config.score, ds.num_vars(), config.max_parents)?;
    let bank = CoefficientBank::build(config.score, ds, &catalog, config.gamma)?;
    MilpModel::build(bank, &catalog, config.delta)
}

/// Solves an already assembled program and fits the Laplace-smoothed
/// classifier for the incumbent on `ds`.
pub fn solve_model(ds: &Dataset, model: &MilpModel, solve: &SolveConfig) -> Result<Learned> {
    let result = branch_and_bound(model, solve)?;
    let classifier = match &result.structure {
        Some(st) => Some(BnClassifier::fit(ds, st.clone(), true)?),
        None => None,
    };
    Ok(Learned {
        catalog: model.catalog().clone(),
        result,
        classifier,
    })
}

pub fn learn(ds: &Dataset, config: &LearnConfig) -> Result<Learned> {
    let model = build_model(ds, config)?;
    info!(
        "{} program: {} columns, {} rows",
        config.score,
        model.num_columns(),
        model.num_rows()
    );
    solve_model(ds, &model, &config.solve)
}
