//! Linear objective coefficients. With a structure encoded as the stacked
//! selection vector `η`, the log-margin of sample `m` against class `c` is
//! `α_{m,c}ᵀη`, the binary log-margin is `ᾱ_mᵀη` and the MDL score is `ωᵀη`.

use serde::{Deserialize, Serialize};

use crate::catalog::{ParentSetCatalog, Structure, BINARY_TOL};
use crate::data::{Dataset, CLASS};
use crate::error::{Error, Result};
use crate::estimation::{FamilyCounts, OvaParamTable, ParamTable, OVA_NEGATIVE, OVA_POSITIVE};

/// `p` values whose log-odds form the default `γ` grid.
pub const DEFAULT_P_GRID: [f64; 8] = [0.501, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999];

/// `γ = ln(p / (1 − p))`.
pub fn gamma_from_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Soft margin against every competing class.
    Sm,
    /// Soft margin under one-vs-all parameters.
    Sbm,
    /// Decomposable MDL score.
    Mdl,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Sm => "sm",
            ScoreKind::Sbm => "sbm",
            ScoreKind::Mdl => "mdl",
        }
    }

    pub fn is_margin(self) -> bool {
        self != ScoreKind::Mdl
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sm" => Ok(ScoreKind::Sm),
            "sbm" => Ok(ScoreKind::Sbm),
            "mdl" => Ok(ScoreKind::Mdl),
            other => Err(Error::InvalidArgument(format!("unknown score {other:?}"))),
        }
    }
}

/// One margin constraint: `τ^m ≤ coeffsᵀη`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub sample: usize,
    /// Competing class for SM rows; `None` for SBM rows.
    pub competitor: Option<usize>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBank {
    kind: ScoreKind,
    #[serde(with = "crate::float_serde")]
    gamma: f64,
    /// Block starts per variable plus the total length.
    offsets: Vec<usize>,
    class_card: usize,
    /// `c^m` per sample; empty in MDL mode.
    sample_classes: Vec<usize>,
    /// SM: `M·(sp(C)−1)` rows ordered by sample, then competitor. SBM: `M` rows.
    rows: Vec<MarginRow>,
    /// MDL local scores; empty otherwise.
    omega: Vec<f64>,
}

fn touches_class(fam: &FamilyCounts) -> bool {
    fam.var == CLASS || fam.parents.first() == Some(&CLASS)
}

fn catalog_offsets(catalog: &ParentSetCatalog) -> Vec<usize> {
    (0..catalog.num_vars())
        .map(|i| catalog.block(i).start)
        .chain(std::iter::once(catalog.len()))
        .collect()
}

fn check_inputs(ds: &Dataset, catalog: &ParentSetCatalog, params: &ParamTable) -> Result<()> {
    if ds.num_vars() != catalog.num_vars() || params.num_vars() != catalog.num_vars() {
        return Err(Error::InvalidArgument(
            "dataset, catalog and parameters disagree on the number of variables".into(),
        ));
    }
    if params.families().len() != catalog.len() {
        return Err(Error::InvalidArgument(
            "parameters were fitted on a different catalog".into(),
        ));
    }
    Ok(())
}

fn check_finite(rows: &[MarginRow]) -> Result<()> {
    for row in rows {
        if let Some(pos) = row.coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite coefficient for sample {} at position {pos}; fit parameters with smoothing",
                row.sample
            )));
        }
    }
    Ok(())
}

impl CoefficientBank {
    /// `α(i,k,m,c) = log θ(x^m) − log θ(x^{m,c})` where `x^{m,c}` is `x^m`
    /// with the class replaced by `c`.
    pub fn soft_margin(ds: &Dataset, catalog: &ParentSetCatalog, params: &ParamTable, gamma: f64) -> Result<Self> {
        check_inputs(ds, catalog, params)?;
        let cc = ds.class_cardinality();
        let len = catalog.len();
        let mut rows = Vec::with_capacity(ds.num_samples() * (cc - 1));
        let mut flipped = Vec::with_capacity(ds.num_vars());
        for (m, x) in ds.samples().enumerate() {
            let cm = x[CLASS] as usize;
            for c in (0..cc).filter(|&c| c != cm) {
                flipped.clear();
                flipped.extend_from_slice(x);
                flipped[CLASS] = c as u32;
                let mut coeffs = vec![0.0; len];
                for (pos, fam) in params.families().iter().enumerate() {
                    if touches_class(fam) {
                        coeffs[pos] = params.log_theta_at(pos, x) - params.log_theta_at(pos, &flipped);
                    }
                }
                rows.push(MarginRow {
                    sample: m,
                    competitor: Some(c),
                    coeffs,
                });
            }
        }
        check_finite(&rows)?;
        Ok(Self {
            kind: ScoreKind::Sm,
            gamma,
            offsets: catalog_offsets(catalog),
            class_card: cc,
            sample_classes: ds.samples().map(|x| x[CLASS] as usize).collect(),
            rows,
            omega: Vec::new(),
        })
    }

    /// `ᾱ(i,k,m)`: the log-ratio between relabeled class states "is `c^m`"
    /// and "is not `c^m`" under `Θ(c^m)`.
    pub fn binary_soft_margin(
        ds: &Dataset,
        catalog: &ParentSetCatalog,
        ova: &OvaParamTable,
        gamma: f64,
    ) -> Result<Self> {
        let params = ova.base();
        check_inputs(ds, catalog, params)?;
        let len = catalog.len();
        let mut rows = Vec::with_capacity(ds.num_samples());
        for (m, x) in ds.samples().enumerate() {
            let cm = x[CLASS] as usize;
            let mut coeffs = vec![0.0; len];
            for (pos, fam) in params.families().iter().enumerate() {
                if !touches_class(fam) {
                    continue;
                }
                let log_theta = |b: usize| {
                    let j = if fam.var == CLASS { b } else { x[fam.var] as usize };
                    ova.log_theta(cm, pos, j, ova.config_with_class(pos, x, b))
                };
                coeffs[pos] = log_theta(OVA_POSITIVE) - log_theta(OVA_NEGATIVE);
            }
            rows.push(MarginRow {
                sample: m,
                competitor: None,
                coeffs,
            });
        }
        check_finite(&rows)?;
        Ok(Self {
            kind: ScoreKind::Sbm,
            gamma,
            offsets: catalog_offsets(catalog),
            class_card: ds.class_cardinality(),
            sample_classes: ds.samples().map(|x| x[CLASS] as usize).collect(),
            rows,
            omega: Vec::new(),
        })
    }

    /// `ω_{i,k} = LL_{i,k} − (log₂ M)/2 · sp(S_{i,k})·(sp(X_i)−1)`, with the
    /// log-likelihood in bits from raw counts and `0·log 0 = 0`.
    pub fn mdl(ds: &Dataset, catalog: &ParentSetCatalog) -> Result<Self> {
        if ds.num_vars() != catalog.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} variables, catalog has {}",
                ds.num_vars(),
                catalog.num_vars()
            )));
        }
        let half_log_m = (ds.num_samples() as f64).log2() / 2.0;
        let mut omega = Vec::with_capacity(catalog.len());
        for i in 0..catalog.num_vars() {
            for s in catalog.sets(i) {
                let fam = FamilyCounts::tally(ds, i, s);
                let mut ll = 0.0;
                for h in 0..fam.num_configs() {
                    let n_h = fam.total(h) as f64;
                    for j in 0..fam.var_card {
                        let n = fam.count(j, h) as f64;
                        if n > 0.0 {
                            ll += n * (n / n_h).log2();
                        }
                    }
                }
                let free = (fam.num_configs() * (fam.var_card - 1)) as f64;
                omega.push(ll - half_log_m * free);
            }
        }
        Ok(Self {
            kind: ScoreKind::Mdl,
            gamma: f64::NAN,
            offsets: catalog_offsets(catalog),
            class_card: ds.class_cardinality(),
            sample_classes: Vec::new(),
            rows: Vec::new(),
            omega,
        })
    }

    /// Builds the bank for `kind`, fitting smoothed parameters as needed.
    pub fn build(kind: ScoreKind, ds: &Dataset, catalog: &ParentSetCatalog, gamma: f64) -> Result<Self> {
        match kind {
            ScoreKind::Sm => Self::soft_margin(ds, catalog, &ParamTable::fit(ds, catalog, true)?, gamma),
            ScoreKind::Sbm => Self::binary_soft_margin(ds, catalog, &OvaParamTable::fit(ds, catalog, true)?, gamma),
            ScoreKind::Mdl => Self::mdl(ds, catalog),
        }
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    /// Desired log-margin; `NaN` in MDL mode.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        if self.kind.is_margin() {
            self.gamma = gamma;
        }
    }

    /// Length of `η`.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_vars(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_samples(&self) -> usize {
        self.sample_classes.len()
    }

    pub fn rows(&self) -> &[MarginRow] {
        &self.rows
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `α_{m,c}`. Only competing classes have rows.
    pub fn alpha(&self, m: usize, c: usize) -> Result<&[f64]> {
        if self.kind != ScoreKind::Sm {
            return Err(Error::InvalidArgument("α rows exist only in sm mode".into()));
        }
        let cm = *self
            .sample_classes
            .get(m)
            .ok_or_else(|| Error::InvalidArgument(format!("sample {m} out of range")))?;
        if c == cm {
            return Err(Error::InvalidArgument(format!("class {c} is the label of sample {m}")));
        }
        if c >= self.class_card {
            return Err(Error::InvalidArgument(format!("class {c} out of range")));
        }
        let idx = m * (self.class_card - 1) + if c < cm { c } else { c - 1 };
        Ok(&self.rows[idx].coeffs)
    }

    /// `ᾱ_m`.
    pub fn alpha_bar(&self, m: usize) -> Result<&[f64]> {
        if self.kind != ScoreKind::Sbm {
            return Err(Error::InvalidArgument("ᾱ rows exist only in sbm mode".into()));
        }
        self.rows
            .get(m)
            .map(|r| r.coeffs.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("sample {m} out of range")))
    }

    /// Checks that `η` is binary with one selection per block and returns the
    /// selected index per variable.
    pub fn selection_from_eta(&self, eta: &[f64]) -> Result<Vec<usize>> {
        if eta.len() != self.len() {
            return Err(Error::InvalidSelection(format!(
                "expected {} entries, got {}",
                self.len(),
                eta.len()
            )));
        }
        let mut selection = Vec::with_capacity(self.num_vars());
        for i in 0..self.num_vars() {
            let block = &eta[self.offsets[i]..self.offsets[i + 1]];
            let mut chosen = None;
            for (k, &v) in block.iter().enumerate() {
                if (v - 1.0).abs() <= BINARY_TOL {
                    if chosen.replace(k).is_some() {
                        return Err(Error::InvalidSelection(format!(
                            "variable {i} selects several parent sets"
                        )));
                    }
                } else if v.abs() > BINARY_TOL {
                    return Err(Error::InvalidSelection(format!(
                        "variable {i} has non-binary entry {v}"
                    )));
                }
            }
            selection.push(chosen.ok_or_else(|| Error::InvalidSelection(format!("variable {i} selects nothing")))?);
        }
        Ok(selection)
    }

    /// SM: `Σ_m min(min_c α_{m,c}ᵀη, γ)`; SBM: `Σ_m min(ᾱ_mᵀη, γ)`; MDL: `ωᵀη`.
    pub fn score_structure(&self, eta: &[f64]) -> Result<f64> {
        let selection = self.selection_from_eta(eta)?;
        Ok(self.score_selection(&selection))
    }

    /// As [`score_structure`](Self::score_structure) for a validated selection.
    pub fn score_selection(&self, selection: &[usize]) -> f64 {
        let positions: Vec<usize> = selection
            .iter()
            .enumerate()
            .map(|(i, &k)| self.offsets[i] + k)
            .collect();
        match self.kind {
            ScoreKind::Mdl => positions.iter().map(|&p| self.omega[p]).sum(),
            _ => self
                .log_margins_at(&positions)
                .into_iter()
                .map(|d| d.min(self.gamma))
                .sum(),
        }
    }

    pub fn score(&self, structure: &Structure) -> f64 {
        self.score_selection(&structure.selection)
    }

    /// Per-sample log-margins `log δ^m` (or `log δ̄^m`) of a selection.
    pub fn log_margins(&self, selection: &[usize]) -> Vec<f64> {
        let positions: Vec<usize> = selection
            .iter()
            .enumerate()
            .map(|(i, &k)| self.offsets[i] + k)
            .collect();
        self.log_margins_at(&positions)
    }

    fn log_margins_at(&self, positions: &[usize]) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.num_samples()];
        for row in &self.rows {
            let v: f64 = positions.iter().map(|&p| row.coeffs[p]).sum();
            let slot = &mut out[row.sample];
            *slot = slot.min(v);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
