//! Sufficient statistics and maximum-likelihood CPT parameters for every
//! candidate family `(i, k)` of a catalog.
//!
//! Counts are exact integers; `θ` and `log θ` are derived on demand. Parent
//! configurations are mixed-radix encoded in catalog order with the first
//! parent as the least significant digit. Since the class is variable 0 and
//! parent sets are sorted, the class (when present) is always that digit.

use serde::{Deserialize, Serialize};

use crate::catalog::{ParentSetCatalog, Structure};
use crate::data::{Dataset, CLASS};
use crate::error::{Error, Result};

/// Counts for one variable under one parent set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub var: usize,
    pub parents: Vec<usize>,
    pub var_card: usize,
    pub parent_cards: Vec<usize>,
    /// `n_{j|h}` stored at `h * var_card + j`.
    pub counts: Vec<u64>,
    /// `n_h`.
    pub totals: Vec<u64>,
}

impl FamilyCounts {
    pub fn tally(ds: &Dataset, var: usize, parents: &[usize]) -> Self {
        let var_card = ds.cardinality(var);
        let parent_cards: Vec<usize> = parents.iter().map(|&p| ds.cardinality(p)).collect();
        let configs: usize = parent_cards.iter().product();
        let mut fam = Self {
            var,
            parents: parents.to_vec(),
            var_card,
            parent_cards,
            counts: vec![0; configs * var_card],
            totals: vec![0; configs],
        };
        for x in ds.samples() {
            let h = fam.config_of(x);
            fam.counts[h * var_card + x[var] as usize] += 1;
            fam.totals[h] += 1;
        }
        fam
    }

    pub fn num_configs(&self) -> usize {
        self.totals.len()
    }

    /// Configuration index `h` of the parents in joint state `x`.
    pub fn config_of(&self, x: &[u32]) -> usize {
        let mut h = 0;
        let mut stride = 1;
        for (&p, &card) in self.parents.iter().zip(&self.parent_cards) {
            h += x[p] as usize * stride;
            stride *= card;
        }
        h
    }

    pub fn count(&self, j: usize, h: usize) -> u64 {
        self.counts[h * self.var_card + j]
    }

    pub fn total(&self, h: usize) -> u64 {
        self.totals[h]
    }

    pub fn theta(&self, j: usize, h: usize, laplace: bool) -> f64 {
        smoothed(self.count(j, h), self.total(h), self.var_card, laplace)
    }

    pub fn log_theta(&self, j: usize, h: usize, laplace: bool) -> f64 {
        self.theta(j, h, laplace).ln()
    }

    /// Sum of counts over all samples; equals `M`.
    pub fn num_samples(&self) -> u64 {
        self.totals.iter().sum()
    }
}

/// `(n + a) / (n_h + a·sp)` with `a = 1` under Laplace smoothing; an empty
/// configuration without smoothing gets the uniform distribution.
fn smoothed(n: u64, n_h: u64, card: usize, laplace: bool) -> f64 {
    if laplace {
        (n as f64 + 1.0) / (n_h as f64 + card as f64)
    } else if n_h == 0 {
        1.0 / card as f64
    } else {
        n as f64 / n_h as f64
    }
}

/// Count tables for every catalog position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub laplace: bool,
    /// Start of each variable's block, as in the catalog.
    offsets: Vec<usize>,
    families: Vec<FamilyCounts>,
}

impl ParamTable {
    pub fn fit(ds: &Dataset, catalog: &ParentSetCatalog, laplace: bool) -> Result<Self> {
        check_shapes(ds, catalog)?;
        let mut families = Vec::with_capacity(catalog.len());
        for i in 0..catalog.num_vars() {
            for s in catalog.sets(i) {
                families.push(FamilyCounts::tally(ds, i, s));
            }
        }
        let offsets = (0..catalog.num_vars()).map(|i| catalog.block(i).start).collect();
        Ok(Self {
            laplace,
            offsets,
            families,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.offsets.len()
    }

    pub fn position(&self, var: usize, k: usize) -> usize {
        self.offsets[var] + k
    }

    pub fn family(&self, pos: usize) -> &FamilyCounts {
        &self.families[pos]
    }

    pub fn families(&self) -> &[FamilyCounts] {
        &self.families
    }

    pub fn theta(&self, pos: usize, j: usize, h: usize) -> f64 {
        self.families[pos].theta(j, h, self.laplace)
    }

    pub fn log_theta(&self, pos: usize, j: usize, h: usize) -> f64 {
        self.families[pos].log_theta(j, h, self.laplace)
    }

    /// `log θ` of variable `var`'s state in `x` under family `pos`.
    pub fn log_theta_at(&self, pos: usize, x: &[u32]) -> f64 {
        let fam = &self.families[pos];
        fam.log_theta(x[fam.var] as usize, fam.config_of(x), self.laplace)
    }

    /// `Σ_i log θ^{i,k_i}_{x_i | x(S_{i,k_i})}`. Returns `−∞` when an unsmoothed
    /// table assigns zero probability.
    pub fn log_joint(&self, structure: &Structure, x: &[u32]) -> f64 {
        let total: f64 = structure
            .selection
            .iter()
            .enumerate()
            .map(|(i, &k)| self.log_theta_at(self.position(i, k), x))
            .sum();
        if total == f64::NEG_INFINITY {
            log::debug!("zero-probability state under unsmoothed parameters: {x:?}");
        }
        total
    }

    /// Families selected by `structure`, one per variable.
    pub fn select(&self, structure: &Structure) -> Vec<FamilyCounts> {
        structure
            .selection
            .iter()
            .enumerate()
            .map(|(i, &k)| self.families[self.position(i, k)].clone())
            .collect()
    }

    /// Inspection dump: per family, counts and `θ`.
    pub fn export_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Entry<'a> {
            var: usize,
            k: usize,
            parents: &'a [usize],
            parent_cards: &'a [usize],
            counts: &'a [u64],
            theta: Vec<f64>,
        }
        let entries: Vec<Entry> = self
            .families
            .iter()
            .enumerate()
            .map(|(pos, fam)| Entry {
                var: fam.var,
                k: pos - self.offsets[fam.var],
                parents: &fam.parents,
                parent_cards: &fam.parent_cards,
                counts: &fam.counts,
                theta: (0..fam.num_configs())
                    .flat_map(|h| (0..fam.var_card).map(move |j| (j, h)))
                    .map(|(j, h)| fam.theta(j, h, self.laplace))
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "laplace": self.laplace,
            "families": entries,
        }))?)
    }
}

fn check_shapes(ds: &Dataset, catalog: &ParentSetCatalog) -> Result<()> {
    if ds.num_vars() != catalog.num_vars() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} variables, catalog has {}",
            ds.num_vars(),
            catalog.num_vars()
        )));
    }
    Ok(())
}

/// One-vs-all parameter families `Θ(c)`: class `c` is relabeled as state 0
/// and all other classes as state 1.
///
/// Only families touching the class differ from the base table. For those
/// with the class as a parent, a class-marginalized count array is kept;
/// "class c" rows are read from the base table and "other" rows are the
/// marginal minus the class-c rows. The class variable's own family needs
/// nothing extra because `n_h` is already stored.
#[derive(Debug, Clone, PartialEq)]
pub struct OvaParamTable {
    base: ParamTable,
    class_card: usize,
    /// Per position: counts summed over the class digit, `[h_rest * var_card + j]`.
    marginals: Vec<Option<Vec<u64>>>,
}

/// Relabeled class states.
pub const OVA_POSITIVE: usize = 0;
pub const OVA_NEGATIVE: usize = 1;

impl OvaParamTable {
    pub fn fit(ds: &Dataset, catalog: &ParentSetCatalog, laplace: bool) -> Result<Self> {
        Ok(Self::from_base(
            ParamTable::fit(ds, catalog, laplace)?,
            ds.class_cardinality(),
        ))
    }

    pub fn from_base(base: ParamTable, class_card: usize) -> Self {
        let marginals = base
            .families
            .iter()
            .map(|fam| {
                (fam.parents.first() == Some(&CLASS)).then(|| {
                    let rest = fam.num_configs() / class_card;
                    let mut m = vec![0u64; rest * fam.var_card];
                    for h_rest in 0..rest {
                        for c in 0..class_card {
                            let h = c + class_card * h_rest;
                            for j in 0..fam.var_card {
                                m[h_rest * fam.var_card + j] += fam.count(j, h);
                            }
                        }
                    }
                    m
                })
            })
            .collect();
        Self {
            base,
            class_card,
            marginals,
        }
    }

    pub fn base(&self) -> &ParamTable {
        &self.base
    }

    pub fn class_cardinality(&self) -> usize {
        self.class_card
    }

    /// Cardinality of family `pos`'s own variable in the relabeled space.
    fn var_card(&self, pos: usize) -> usize {
        let fam = &self.base.families[pos];
        if fam.var == CLASS {
            2
        } else {
            fam.var_card
        }
    }

    /// `n^{i,k}_{j|h}(c)` with `j`, `h` in the relabeled space.
    pub fn count(&self, c: usize, pos: usize, j: usize, h: usize) -> u64 {
        let fam = &self.base.families[pos];
        if fam.var == CLASS {
            let own = fam.count(c, h);
            return if j == OVA_POSITIVE { own } else { fam.total(h) - own };
        }
        match &self.marginals[pos] {
            None => fam.count(j, h),
            Some(marginal) => {
                let (b, h_rest) = (h % 2, h / 2);
                let own = fam.count(j, c + self.class_card * h_rest);
                if b == OVA_POSITIVE {
                    own
                } else {
                    marginal[h_rest * fam.var_card + j] - own
                }
            }
        }
    }

    pub fn total(&self, c: usize, pos: usize, h: usize) -> u64 {
        (0..self.var_card(pos)).map(|j| self.count(c, pos, j, h)).sum()
    }

    pub fn theta(&self, c: usize, pos: usize, j: usize, h: usize) -> f64 {
        smoothed(
            self.count(c, pos, j, h),
            self.total(c, pos, h),
            self.var_card(pos),
            self.base.laplace,
        )
    }

    pub fn log_theta(&self, c: usize, pos: usize, j: usize, h: usize) -> f64 {
        self.theta(c, pos, j, h).ln()
    }

    /// Relabeled configuration index of `x`'s parents with the class slot
    /// forced to `b` (0 = class c, 1 = other).
    pub fn config_with_class(&self, pos: usize, x: &[u32], b: usize) -> usize {
        let fam = &self.base.families[pos];
        let mut h = 0;
        let mut stride = 1;
        for (&p, &card) in fam.parents.iter().zip(&fam.parent_cards) {
            let (v, card) = if p == CLASS { (b, 2) } else { (x[p] as usize, card) };
            h += v * stride;
            stride *= card;
        }
        h
    }

    /// Materializes `Θ(c)` as an ordinary table over a two-state class.
    pub fn class_table(&self, c: usize) -> ParamTable {
        let families = self
            .base
            .families
            .iter()
            .enumerate()
            .map(|(pos, fam)| {
                let var_card = self.var_card(pos);
                let parent_cards: Vec<usize> = fam
                    .parents
                    .iter()
                    .zip(&fam.parent_cards)
                    .map(|(&p, &card)| if p == CLASS { 2 } else { card })
                    .collect();
                let configs: usize = parent_cards.iter().product();
                let mut counts = Vec::with_capacity(configs * var_card);
                let mut totals = Vec::with_capacity(configs);
                for h in 0..configs {
                    for j in 0..var_card {
                        counts.push(self.count(c, pos, j, h));
                    }
                    totals.push(self.total(c, pos, h));
                }
                FamilyCounts {
                    var: fam.var,
                    parents: fam.parents.clone(),
                    var_card,
                    parent_cards,
                    counts,
                    totals,
                }
            })
            .collect();
        ParamTable {
            laplace: self.base.laplace,
            offsets: self.base.offsets.clone(),
            families,
        }
    }
}
