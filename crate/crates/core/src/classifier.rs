//! Bayesian network classifiers: prediction, log-margins, evaluation and
//! cross-validation with inner model selection.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogMode, ParentSetCatalog, Structure};
use crate::coefficients::{gamma_from_p, CoefficientBank};
use crate::data::{make_folds, stratified_holdout, Dataset, FoldPlan, CLASS};
use crate::error::{Error, Result};
use crate::estimation::FamilyCounts;
use crate::milp::MilpModel;
use crate::pipeline::{self, LearnConfig};
use crate::solver::SolveStatus;

const BUNDLE_FORMAT: &str = "marginbn-classifier";
const BUNDLE_VERSION: u32 = 1;

/// z-value of the two-sided 95% normal interval.
const Z95: f64 = 1.96;

/// A structure together with the count tables of its selected families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnClassifier {
    format: String,
    version: u32,
    names: Vec<String>,
    cardinalities: Vec<usize>,
    laplace: bool,
    structure: Structure,
    /// One family per variable, in variable order.
    families: Vec<FamilyCounts>,
    /// Class histogram of the data the tables were fitted on.
    train_class_counts: Vec<u64>,
}

impl BnClassifier {
    pub fn fit(ds: &Dataset, structure: Structure, laplace: bool) -> Result<Self> {
        check_structure(&structure, ds.num_vars())?;
        let families = (0..ds.num_vars())
            .map(|i| FamilyCounts::tally(ds, i, &structure.parents[i]))
            .collect();
        Ok(Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            names: ds.names().to_vec(),
            cardinalities: ds.cardinalities().to_vec(),
            laplace,
            structure,
            families,
            train_class_counts: ds.class_counts().into_iter().map(|n| n as u64).collect(),
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn class_cardinality(&self) -> usize {
        self.cardinalities[CLASS]
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn laplace(&self) -> bool {
        self.laplace
    }

    pub fn family(&self, var: usize) -> &FamilyCounts {
        &self.families[var]
    }

    pub fn train_class_counts(&self) -> &[u64] {
        &self.train_class_counts
    }

    fn check_state(&self, x: &[u32], offset: usize) -> Result<()> {
        let n = self.num_vars();
        if x.len() + offset != n {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                n - offset,
                x.len()
            )));
        }
        for (j, &v) in x.iter().enumerate() {
            let var = j + offset;
            if v as usize >= self.cardinalities[var] {
                return Err(Error::Validation(format!(
                    "variable {var}: state {} exceeds cardinality {}",
                    v as usize + 1,
                    self.cardinalities[var]
                )));
            }
        }
        Ok(())
    }

    fn log_joint_unchecked(&self, x: &[u32]) -> f64 {
        self.families
            .iter()
            .map(|fam| fam.log_theta(x[fam.var] as usize, fam.config_of(x), self.laplace))
            .sum()
    }

    /// `log P_B(x)` for a complete joint state, class first.
    pub fn log_joint(&self, x: &[u32]) -> Result<f64> {
        self.check_state(x, 0)?;
        Ok(self.log_joint_unchecked(x))
    }

    /// `log P_B(c, z)` for every class value `c`, given the features `z`.
    pub fn class_log_joints(&self, z: &[u32]) -> Result<Vec<f64>> {
        self.check_state(z, 1)?;
        let mut x = Vec::with_capacity(self.num_vars());
        x.push(0);
        x.extend_from_slice(z);
        Ok((0..self.class_cardinality())
            .map(|c| {
                x[CLASS] = c as u32;
                self.log_joint_unchecked(&x)
            })
            .collect())
    }

    /// Most probable class for the features `z`; ties go to the smallest state.
    pub fn predict(&self, z: &[u32]) -> Result<usize> {
        Ok(argmax(&self.class_log_joints(z)?))
    }

    /// `log δ` of a labeled sample (class first): the log-joint of its own
    /// class minus the best competing one.
    pub fn margin(&self, x: &[u32]) -> Result<f64> {
        self.check_state(x, 0)?;
        let joints = self.class_log_joints(&x[1..])?;
        Ok(log_margin(&joints, x[CLASS] as usize))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let clf: Self = serde_json::from_str(s)?;
        clf.validate()?;
        Ok(clf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("classifier bundle: {msg}")));
        if self.format != BUNDLE_FORMAT || self.version != BUNDLE_VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        let n = self.cardinalities.len();
        if n < 2 || self.names.len() != n || self.families.len() != n {
            return bad("inconsistent variable count".into());
        }
        if self.train_class_counts.len() != self.cardinalities[CLASS] {
            return bad("class histogram does not match the class cardinality".into());
        }
        check_structure(&self.structure, n)?;
        for (i, fam) in self.families.iter().enumerate() {
            let parent_cards: Vec<usize> = fam.parents.iter().map(|&p| self.cardinalities[p]).collect();
            if fam.var != i
                || fam.parents != self.structure.parents[i]
                || fam.var_card != self.cardinalities[i]
                || fam.parent_cards != parent_cards
            {
                return bad(format!("family {i} does not match the structure"));
            }
            let configs = fam.num_configs();
            if fam.counts.len() != configs * fam.var_card || fam.totals.len() != configs {
                return bad(format!("family {i} has malformed count arrays"));
            }
            for h in 0..configs {
                let sum: u64 = (0..fam.var_card).map(|j| fam.count(j, h)).sum();
                if sum != fam.totals[h] {
                    return bad(format!("family {i}, configuration {h}: totals disagree with counts"));
                }
            }
        }
        Ok(())
    }

    /// Graphviz digraph with one node per variable and one edge per parent.
    pub fn to_dot(&self) -> String {
        structure_to_dot(&self.structure, &self.names)
    }
}

fn check_structure(structure: &Structure, num_vars: usize) -> Result<()> {
    if structure.parents.len() != num_vars {
        return Err(Error::InvalidArgument(format!(
            "structure has {} variables, data has {num_vars}",
            structure.parents.len()
        )));
    }
    for (i, ps) in structure.parents.iter().enumerate() {
        if ps.iter().any(|&p| p >= num_vars || p == i) {
            return Err(Error::InvalidArgument(format!(
                "variable {i} has an invalid parent list {ps:?}"
            )));
        }
        if ps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "variable {i}: parents must be sorted and distinct"
            )));
        }
    }
    if !structure.is_acyclic() {
        return Err(Error::CyclicStructure);
    }
    Ok(())
}

pub fn structure_to_dot(structure: &Structure, names: &[String]) -> String {
    let quote = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
    let mut out = String::from("digraph bn {\n");
    for (i, name) in names.iter().enumerate() {
        let shape = if i == CLASS { "doublecircle" } else { "ellipse" };
        let _ = writeln!(out, "  {} [shape={shape}];", quote(name));
    }
    for (from, to) in structure.edges() {
        let _ = writeln!(out, "  {} -> {};", quote(&names[from]), quote(&names[to]));
    }
    out.push_str("}\n");
    out
}

fn argmax(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |best, c| if values[c] > values[best] { c } else { best })
}

fn log_margin(joints: &[f64], class: usize) -> f64 {
    let own = joints[class];
    let other = joints
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != class)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    // Equal values, including two zero-probability joints, tie at 0.
    if own == other {
        0.0
    } else {
        own - other
    }
}

/// Empty class parent set and `{C}` for every feature.
pub fn naive_bayes_structure(catalog: &ParentSetCatalog) -> Result<Structure> {
    if catalog.mode() != CatalogMode::Margin {
        return Err(Error::InvalidArgument("naive Bayes needs a margin-mode catalog".into()));
    }
    let mut selection = vec![0];
    for i in 1..catalog.num_vars() {
        let k = catalog.find(i, &[CLASS]).ok_or_else(|| {
            Error::InvalidArgument(format!("catalog offers no class-only parent set for variable {i}"))
        })?;
        selection.push(k);
    }
    catalog.structure(selection)
}

/// Per-fold line of a cross-validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub max_parents: usize,
    #[serde(with = "crate::float_serde::option")]
    pub p: Option<f64>,
    #[serde(with = "crate::float_serde")]
    pub gamma: f64,
    /// Inner-validation accuracy of the chosen pair; `None` without a grid.
    pub validation_accuracy: Option<f64>,
    pub status: Option<SolveStatus>,
    #[serde(with = "crate::float_serde::option")]
    pub objective: Option<f64>,
    #[serde(with = "crate::float_serde")]
    pub gap_percent: f64,
    pub structure: Structure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
    /// `log δ` per sample; a sample counts as correct only when it is positive.
    #[serde(with = "crate::float_serde::vec")]
    pub margins: Vec<f64>,
    /// Samples whose class never occurred in the training data.
    pub unseen_label_samples: Vec<usize>,
    pub folds: Vec<FoldReport>,
}

impl EvalReport {
    fn new(class_card: usize, n: usize) -> Self {
        Self {
            n,
            correct: 0,
            accuracy: 0.0,
            ci95: 0.0,
            confusion: vec![vec![0; class_card]; class_card],
            predictions: vec![0; n],
            margins: vec![0.0; n],
            unseen_label_samples: Vec::new(),
            folds: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.accuracy = self.correct as f64 / self.n as f64;
        self.ci95 = ci95(self.accuracy, self.n);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text summary, one line per fold when cross-validated.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        if !self.folds.is_empty() {
            let _ = writeln!(
                out,
                "fold  train  test  correct  accuracy  K  gamma     status            gap"
            );
            for f in &self.folds {
                let status = f.status.map_or("none", |s| s.as_str());
                let _ = writeln!(
                    out,
                    "{:>4}  {:>5}  {:>4}  {:>7}  {:>8.4}  {}  {:>8.4}  {:<16}  {:.2}%",
                    f.fold + 1,
                    f.train_size,
                    f.test_size,
                    f.correct,
                    f.accuracy,
                    f.max_parents,
                    f.gamma,
                    status,
                    f.gap_percent
                );
            }
        }
        let _ = writeln!(
            out,
            "accuracy={:.2}% ± {:.2} ({}/{})",
            100.0 * self.accuracy,
            100.0 * self.ci95,
            self.correct,
            self.n
        );
        if !self.unseen_label_samples.is_empty() {
            let _ = writeln!(
                out,
                "unseen_labels={} samples counted as errors",
                self.unseen_label_samples.len()
            );
        }
        out
    }
}

/// `1.96·sqrt(acc(1 − acc)/n)`.
pub fn ci95(accuracy: f64, n: usize) -> f64 {
    Z95 * (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

struct SampleOutcome {
    prediction: usize,
    margin: f64,
    correct: bool,
    unseen: bool,
}

fn score_sample(clf: &BnClassifier, x: &[u32]) -> Result<SampleOutcome> {
    let joints = clf.class_log_joints(&x[1..])?;
    let class = x[CLASS] as usize;
    let margin = log_margin(&joints, class);
    let unseen = clf.train_class_counts[class] == 0;
    Ok(SampleOutcome {
        prediction: argmax(&joints),
        margin,
        correct: margin > 0.0 && !unseen,
        unseen,
    })
}

fn record(report: &mut EvalReport, slot: usize, class: usize, out: &SampleOutcome) {
    report.predictions[slot] = out.prediction;
    report.margins[slot] = out.margin;
    report.confusion[class][out.prediction] += 1;
    if out.correct {
        report.correct += 1;
    }
}

/// Scores every sample of `test`. Zero margins count as errors, and so does
/// any sample whose class was absent from the training data (flagged in the
/// report).
pub fn evaluate(clf: &BnClassifier, test: &Dataset) -> Result<EvalReport> {
    if test.cardinalities() != clf.cardinalities() {
        return Err(Error::InvalidArgument(format!(
            "test cardinalities {:?} differ from the classifier's {:?}",
            test.cardinalities(),
            clf.cardinalities()
        )));
    }
    let mut report = EvalReport::new(clf.class_cardinality(), test.num_samples());
    for m in 0..test.num_samples() {
        let x = test.sample(m);
        let out = score_sample(clf, x)?;
        if out.unseen {
            report.unseen_label_samples.push(m);
        }
        record(&mut report, m, x[CLASS] as usize, &out);
    }
    if !report.unseen_label_samples.is_empty() {
        warn!(
            "{} test samples carry a class absent from training",
            report.unseen_label_samples.len()
        );
    }
    report.finish();
    Ok(report)
}

/// Cross-validation settings. Each candidate pair (`γ`, `K`) from the grids
/// is scored on validation data carved out of the training fold only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    /// Score, `Δ` and solver settings; `gamma` and `max_parents` serve as the
    /// fallback when the corresponding grid is empty.
    pub learn: LearnConfig,
    pub p_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub inner_folds: usize,
    pub holdout_fraction: f64,
    /// Training folds larger than this use a single holdout split.
    pub holdout_above: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            learn: LearnConfig::default(),
            p_grid: crate::coefficients::DEFAULT_P_GRID.to_vec(),
            k_grid: vec![1, 2],
            inner_folds: 5,
            holdout_fraction: 0.2,
            holdout_above: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    max_parents: usize,
    p: Option<f64>,
    gamma: f64,
}

impl CvConfig {
    /// Candidates ordered by `K`, then `γ`, both ascending, so that a strict
    /// improvement scan keeps the smaller pair on ties.
    fn candidates(&self) -> Result<Vec<Candidate>> {
        let mut gammas: Vec<(Option<f64>, f64)> = if !self.learn.score.is_margin() {
            vec![(None, f64::NAN)]
        } else if self.p_grid.is_empty() {
            vec![(None, self.learn.gamma)]
        } else {
            self.p_grid
                .iter()
                .map(|&p| Ok((Some(p), gamma_from_p(p)?)))
                .collect::<Result<_>>()?
        };
        gammas.sort_by(|a, b| a.1.total_cmp(&b.1));
        gammas.dedup_by(|a, b| a.1 == b.1);
        let mut ks = if self.k_grid.is_empty() {
            vec![self.learn.max_parents]
        } else {
            self.k_grid.clone()
        };
        ks.sort_unstable();
        ks.dedup();
        Ok(ks
            .iter()
            .flat_map(|&k| {
                gammas.iter().map(move |&(p, gamma)| Candidate {
                    max_parents: k,
                    p,
                    gamma,
                })
            })
            .collect())
    }
}

/// Validation splits of a training fold: a stratified holdout for large
/// folds, inner k-fold otherwise.
fn inner_splits(train: &Dataset, config: &CvConfig, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if train.num_samples() > config.holdout_above {
        return Ok(vec![stratified_holdout(train, config.holdout_fraction, seed)?]);
    }
    let k = config.inner_folds.min(train.num_samples());
    let plan = make_folds(train, k, seed)?;
    Ok((0..k).map(|f| (plan.train_indices(f), plan.test_indices(f))).collect())
}

/// Number of validation samples each candidate classifies correctly, and
/// the number of validation samples seen.
fn validation_scores(
    train: &Dataset,
    candidates: &[Candidate],
    config: &CvConfig,
    seed: u64,
) -> Result<(Vec<usize>, usize)> {
    let mut correct = vec![0; candidates.len()];
    let mut seen = 0;
    for (tr, va) in inner_splits(train, config, seed)? {
        seen += va.len();
        let inner_train = train.subset(&tr)?;
        let inner_valid = train.subset(&va)?;
        let mut last_k = None;
        let mut base: Option<(ParentSetCatalog, CoefficientBank)> = None;
        for (slot, cand) in candidates.iter().enumerate() {
            if last_k != Some(cand.max_parents) {
                let catalog = pipeline::catalog_for(config.learn.score, inner_train.num_vars(), cand.max_parents)?;
                let bank = CoefficientBank::build(config.learn.score, &inner_train, &catalog, cand.gamma)?;
                base = Some((catalog, bank));
                last_k = Some(cand.max_parents);
            }
            let (catalog, bank) = base.as_ref().expect("built above");
            let mut bank = bank.clone();
            bank.set_gamma(cand.gamma);
            let model = MilpModel::build(bank, catalog, config.learn.delta)?;
            let learned = pipeline::solve_model(&inner_train, &model, &config.learn.solve)?;
            let clf = match learned.classifier {
                Some(clf) => clf,
                None => BnClassifier::fit(&inner_train, catalog.empty_structure(), true)?,
            };
            correct[slot] += evaluate(&clf, &inner_valid)?.correct;
        }
    }
    Ok((correct, seen))
}

fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// k-fold cross-validation. Within each training fold the grid pair with the
/// best validation accuracy is chosen (ties toward smaller `K`, then smaller
/// `γ`) and the final classifier is retrained on the whole training fold.
pub fn cross_validate(ds: &Dataset, plan: &FoldPlan, config: &CvConfig) -> Result<EvalReport> {
    if plan.assignments.len() != ds.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} samples, dataset has {}",
            plan.assignments.len(),
            ds.num_samples()
        )));
    }
    config.learn.validate()?;
    let candidates = config.candidates()?;
    let mut report = EvalReport::new(ds.class_cardinality(), ds.num_samples());
    for fold in 0..plan.k {
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.test_indices(fold);
        if test_idx.is_empty() || train_idx.is_empty() {
            return Err(Error::InvalidArgument(format!("fold {fold} has an empty side")));
        }
        let train = ds.subset(&train_idx)?;
        let test = ds.subset(&test_idx)?;

        let (chosen, validation_accuracy) = if candidates.len() > 1 {
            let (scores, seen) = validation_scores(&train, &candidates, config, inner_seed(config.seed, fold))?;
            let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
            (candidates[best], Some(scores[best] as f64 / seen as f64))
        } else {
            (candidates[0], None)
        };
        let learn_config = LearnConfig {
            gamma: chosen.gamma,
            max_parents: chosen.max_parents,
            ..config.learn.clone()
        };
        let learned = pipeline::learn(&train, &learn_config)?;
        let clf = match learned.classifier {
            Some(clf) => clf,
            None => {
                warn!("fold {}: no incumbent, falling back to the empty graph", fold + 1);
                BnClassifier::fit(&train, learned.catalog.empty_structure(), true)?
            }
        };

        let mut fold_correct = 0;
        for (t, &m) in test_idx.iter().enumerate() {
            let x = test.sample(t);
            let out = score_sample(&clf, x)?;
            if out.unseen {
                report.unseen_label_samples.push(m);
            }
            fold_correct += out.correct as usize;
            record(&mut report, m, x[CLASS] as usize, &out);
        }
        let fold_report = FoldReport {
            fold,
            train_size: train.num_samples(),
            test_size: test.num_samples(),
            correct: fold_correct,
            accuracy: fold_correct as f64 / test.num_samples() as f64,
            max_parents: chosen.max_parents,
            p: chosen.p,
            gamma: chosen.gamma,
            validation_accuracy,
            status: Some(learned.result.status),
            objective: learned.result.objective,
            gap_percent: learned.result.gap_percent,
            structure: clf.structure().clone(),
        };
        info!(
            "fold {}: accuracy {:.4} with K={} gamma={:.4}",
            fold + 1,
            fold_report.accuracy,
            chosen.max_parents,
            chosen.gamma
        );
        report.folds.push(fold_report);
    }
    report.unseen_label_samples.sort_unstable();
    report.finish();
    Ok(report)
}
