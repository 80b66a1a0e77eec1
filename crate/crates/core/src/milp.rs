//! The mixed-integer program over `(η, τ, o)`.
//!
//! Columns are laid out as all `η` entries in catalog order, then one `τ^m`
//! per sample (margin scores only), then one order variable `o_i` per
//! variable. Rows are the margin rows, one selection row per variable and
//! `N² − N` order rows, in that order.

use std::io::Write;

use serde::Serialize;

use crate::catalog::{ParentSetCatalog, Structure};
use crate::coefficients::{CoefficientBank, ScoreKind};
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    /// `τ^m − α_{m,c}ᵀη ≤ 0`; `competitor` is `None` for binary-margin rows.
    Margin { sample: usize, competitor: Option<usize> },
    /// `Σ_k η_{i,k} = 1`.
    Select { var: usize },
    /// Ordering `o_parent` before `o_child` whenever `parent ∈ S_child`.
    Order { parent: usize, child: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub kind: RowKind,
    pub sense: Sense,
    /// Sparse `(column, coefficient)` pairs in increasing column order.
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn name(&self) -> String {
        match self.kind {
            RowKind::Margin {
                sample,
                competitor: Some(c),
            } => format!("margin_{sample}_{c}"),
            RowKind::Margin {
                sample,
                competitor: None,
            } => format!("margin_{sample}"),
            RowKind::Select { var } => format!("select_{var}"),
            RowKind::Order { parent, child } => format!("order_{parent}_{child}"),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(col, a)| a * x[col]).sum()
    }

    /// Amount by which `x` violates the row; 0 when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    bank: CoefficientBank,
    catalog: ParentSetCatalog,
    delta: f64,
    num_tau: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl MilpModel {
    /// Assembles the program for `bank`'s score. `γ` is taken from the bank.
    pub fn build(bank: CoefficientBank, catalog: &ParentSetCatalog, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Δ must be positive and finite, got {delta}"
            )));
        }
        if bank.len() != catalog.len() || bank.num_vars() != catalog.num_vars() {
            return Err(Error::InvalidArgument(
                "coefficient bank does not match the catalog".into(),
            ));
        }
        let margin = bank.kind().is_margin();
        if margin && !bank.gamma().is_finite() {
            return Err(Error::InvalidArgument(format!(
                "γ must be finite, got {}",
                bank.gamma()
            )));
        }
        let n = catalog.num_vars();
        let num_eta = catalog.len();
        let num_tau = if margin { bank.num_samples() } else { 0 };
        let tau0 = num_eta;
        let o0 = num_eta + num_tau;
        let num_cols = o0 + n;

        let mut objective = vec![0.0; num_cols];
        let mut lower = vec![0.0; num_cols];
        let mut upper = vec![1.0; num_cols];
        let mut rows = Vec::with_capacity(bank.rows().len() + n * n);

        if margin {
            let mut tau_lb = bank.gamma();
            for r in bank.rows() {
                let mut terms: Vec<(usize, f64)> = r
                    .coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a != 0.0)
                    .map(|(col, &a)| (col, -a))
                    .collect();
                terms.push((tau0 + r.sample, 1.0));
                rows.push(Row {
                    kind: RowKind::Margin {
                        sample: r.sample,
                        competitor: r.competitor,
                    },
                    sense: Sense::Le,
                    terms,
                    rhs: 0.0,
                });
                let floor: f64 = r.coeffs.iter().filter(|&&a| a < 0.0).sum();
                tau_lb = tau_lb.min(floor);
            }
            for m in 0..num_tau {
                objective[tau0 + m] = 1.0;
                lower[tau0 + m] = tau_lb;
                upper[tau0 + m] = bank.gamma();
            }
        } else {
            objective[..num_eta].copy_from_slice(bank.omega());
        }

        for i in 0..n {
            rows.push(Row {
                kind: RowKind::Select { var: i },
                sense: Sense::Eq,
                terms: catalog.block(i).map(|col| (col, 1.0)).collect(),
                rhs: 1.0,
            });
        }

        for child in 0..n {
            upper[o0 + child] = delta;
        }
        let rhs = delta / n as f64 - 2.0 * delta;
        for parent in 0..n {
            for child in (0..n).filter(|&c| c != parent) {
                let mut terms: Vec<(usize, f64)> = catalog
                    .block(child)
                    .zip(catalog.sets(child))
                    .filter(|(_, s)| s.contains(&parent))
                    .map(|(col, _)| (col, -2.0 * delta))
                    .collect();
                terms.push((o0 + child, 1.0));
                terms.push((o0 + parent, -1.0));
                terms.sort_by_key(|t| t.0);
                rows.push(Row {
                    kind: RowKind::Order { parent, child },
                    sense: Sense::Ge,
                    terms,
                    rhs,
                });
            }
        }

        Ok(Self {
            bank,
            catalog: catalog.clone(),
            delta,
            num_tau,
            objective,
            lower,
            upper,
            rows,
        })
    }

    pub fn bank(&self) -> &CoefficientBank {
        &self.bank
    }

    pub fn catalog(&self) -> &ParentSetCatalog {
        &self.catalog
    }

    pub fn kind(&self) -> ScoreKind {
        self.bank.kind()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.bank.gamma()
    }

    pub fn num_eta(&self) -> usize {
        self.catalog.len()
    }

    pub fn num_tau(&self) -> usize {
        self.num_tau
    }

    pub fn num_columns(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn tau_column(&self, m: usize) -> usize {
        self.num_eta() + m
    }

    pub fn order_column(&self, var: usize) -> usize {
        self.num_eta() + self.num_tau + var
    }

    pub fn is_integer(&self, col: usize) -> bool {
        col < self.num_eta()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn count_rows(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn column_name(&self, col: usize) -> String {
        if col < self.num_eta() {
            let (i, k) = self.catalog.locate(col);
            format!("eta_{i}_{k}")
        } else if col < self.num_eta() + self.num_tau {
            format!("tau_{}", col - self.num_eta())
        } else {
            format!("o_{}", col - self.num_eta() - self.num_tau)
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &up))| (lo - v).max(v - up).max(0.0));
        let rows = self.rows.iter().map(|r| r.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Complete feasible point for a DAG: `η` from the structure, each `τ^m`
    /// at its best value and `o` from a topological order.
    pub fn point_for(&self, structure: &Structure) -> Result<Vec<f64>> {
        let mut x = self.catalog.eta(structure);
        if self.num_tau > 0 {
            let gamma = self.gamma();
            x.extend(
                self.bank
                    .log_margins(&structure.selection)
                    .into_iter()
                    .map(|d| d.min(gamma)),
            );
        }
        x.extend(certificate_from_dag(structure, self.delta)?);
        Ok(x)
    }

    /// Free-format MPS with an `OBJSENSE MAX` section and integer markers
    /// around the `η` columns.
    pub fn write_mps<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names: Vec<String> = (0..self.num_columns()).map(|c| self.column_name(c)).collect();
        let row_names: Vec<String> = self.rows.iter().map(Row::name).collect();
        let mut by_column: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_columns()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(col, a) in &row.terms {
                by_column[col].push((r, a));
            }
        }

        writeln!(w, "NAME marginbn_{}", self.kind())?;
        writeln!(w, "OBJSENSE")?;
        writeln!(w, "    MAX")?;
        writeln!(w, "ROWS")?;
        writeln!(w, " N obj")?;
        for (row, name) in self.rows.iter().zip(&row_names) {
            let s = match row.sense {
                Sense::Le => "L",
                Sense::Eq => "E",
                Sense::Ge => "G",
            };
            writeln!(w, " {s} {name}")?;
        }
        writeln!(w, "COLUMNS")?;
        writeln!(w, "    MARKER 'MARKER' 'INTORG'")?;
        for col in 0..self.num_columns() {
            if col == self.num_eta() {
                writeln!(w, "    MARKER 'MARKER' 'INTEND'")?;
            }
            if self.objective[col] != 0.0 {
                writeln!(w, "    {} obj {}", names[col], self.objective[col])?;
            }
            for &(r, a) in &by_column[col] {
                if a != 0.0 {
                    writeln!(w, "    {} {} {}", names[col], row_names[r], a)?;
                }
            }
            if self.objective[col] == 0.0 && by_column[col].iter().all(|&(_, a)| a == 0.0) {
                writeln!(w, "    {} obj 0", names[col])?;
            }
        }
        writeln!(w, "RHS")?;
        for (row, name) in self.rows.iter().zip(&row_names) {
            if row.rhs != 0.0 {
                writeln!(w, "    rhs {name} {}", row.rhs)?;
            }
        }
        writeln!(w, "BOUNDS")?;
        for (col, name) in names.iter().enumerate() {
            if self.lower[col] != 0.0 {
                writeln!(w, " LO bnd {name} {}", self.lower[col])?;
            }
            writeln!(w, " UP bnd {name} {}", self.upper[col])?;
        }
        writeln!(w, "ENDATA")
    }

    pub fn to_mps_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_mps(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("MPS output is ASCII")
    }
}

/// `a_{i,j}`: whether `X_i` is a parent of `X_j` in the selection `η`.
fn arcs(catalog: &ParentSetCatalog, structure: &Structure) -> Vec<Vec<bool>> {
    let n = catalog.num_vars();
    let mut a = vec![vec![false; n]; n];
    for (child, parents) in structure.parents.iter().enumerate() {
        for &p in parents {
            a[p][child] = true;
        }
    }
    a
}

fn certificate_tolerance(delta: f64) -> f64 {
    1e-12 * delta.max(1.0)
}

/// Whether `o ∈ [0, Δ]^N` satisfies every order row for the binary selection
/// `η`. Invalid selections fail.
pub fn check_order_certificate(catalog: &ParentSetCatalog, eta: &[f64], o: &[f64], delta: f64) -> bool {
    let n = catalog.num_vars();
    let Ok(structure) = catalog.structure_from_eta(eta) else {
        return false;
    };
    if o.len() != n {
        return false;
    }
    let tol = certificate_tolerance(delta);
    if o.iter().any(|&v| v < -tol || v > delta + tol) {
        return false;
    }
    let a = arcs(catalog, &structure);
    let rhs = delta / n as f64;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let slack = if a[i][j] { 0.0 } else { 2.0 * delta };
            if slack + o[j] - o[i] < rhs - tol {
                return false;
            }
        }
    }
    true
}

/// `o_v = (position of v in a topological order)·Δ/N`, ties broken by
/// smallest variable index.
pub fn certificate_from_dag(structure: &Structure, delta: f64) -> Result<Vec<f64>> {
    let order = structure.topological_order().ok_or(Error::CyclicStructure)?;
    let n = order.len();
    let mut o = vec![0.0; n];
    for (pos, &v) in order.iter().enumerate() {
        o[v] = pos as f64 * delta / n as f64;
    }
    Ok(o)
}

/// Solves the order rows for `o ∈ [0, Δ]^N` with `η` fixed, as an LP
/// feasibility problem.
pub fn order_system_feasible(catalog: &ParentSetCatalog, eta: &[f64], delta: f64) -> Result<bool> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let structure = catalog.structure_from_eta(eta)?;
    let n = catalog.num_vars();
    let a = arcs(catalog, &structure);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let o: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, delta))).collect();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let slack = if a[i][j] { 0.0 } else { 2.0 * delta };
            lp.add_constraint([(o[j], 1.0), (o[i], -1.0)], ComparisonOp::Ge, delta / n as f64 - slack);
        }
    }
    match lp.solve() {
        Ok(_) => Ok(true),
        Err(microlp::Error::Infeasible) => Ok(false),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogMode;
    use crate::data::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn toy(m: usize, cards: &[usize], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let rows: Vec<Vec<u32>> = (0..m)
                .map(|_| cards.iter().map(|&c| rng.random_range(0..c as u32)).collect())
                .collect();
            if let Ok(ds) = Dataset::new(cards.to_vec(), rows) {
                return ds;
            }
        }
    }

    fn model(kind: ScoreKind, ds: &Dataset, k: usize, delta: f64) -> MilpModel {
        let mode = if kind == ScoreKind::Mdl {
            CatalogMode::Generative
        } else {
            CatalogMode::Margin
        };
        let cat = ParentSetCatalog::enumerate(ds.num_vars(), k, mode).unwrap();
        let bank = CoefficientBank::build(kind, ds, &cat, 1.0).unwrap();
        MilpModel::build(bank, &cat, delta).unwrap()
    }

    fn is_margin(k: &RowKind) -> bool {
        matches!(k, RowKind::Margin { .. })
    }
    fn is_select(k: &RowKind) -> bool {
        matches!(k, RowKind::Select { .. })
    }
    fn is_order(k: &RowKind) -> bool {
        matches!(k, RowKind::Order { .. })
    }

    #[test]
    fn row_counts_for_small_instance() {
        let ds = toy(5, &[2, 2, 2], 1);
        for kind in [ScoreKind::Sm, ScoreKind::Sbm] {
            let mm = model(kind, &ds, 1, 1.0);
            assert_eq!(mm.count_rows(is_margin), 5);
            assert_eq!(mm.count_rows(is_select), 3);
            assert_eq!(mm.count_rows(is_order), 6);
            assert_eq!(mm.num_tau(), 5);
            for m in 0..5 {
                assert_eq!(mm.upper()[mm.tau_column(m)], 1.0);
            }
        }
        let mm = model(ScoreKind::Mdl, &ds, 1, 1.0);
        assert_eq!(mm.num_tau(), 0);
        assert_eq!(mm.count_rows(is_margin), 0);
        assert_eq!(mm.num_rows(), 3 + 6);
        assert_eq!(&mm.objective()[..mm.num_eta()], mm.bank().omega());
    }

    #[test]
    fn size_formulas() {
        for (seed, cards) in [(2, vec![3, 2, 2, 3]), (3, vec![2, 3, 2]), (4, vec![4, 2, 2, 2])] {
            let ds = toy(12, &cards, seed);
            let (n, m, cc) = (cards.len(), 12, cards[0]);
            for k in [1, 2] {
                for (kind, margin_rows, taus) in [
                    (ScoreKind::Sm, m * (cc - 1), m),
                    (ScoreKind::Sbm, m, m),
                    (ScoreKind::Mdl, 0, 0),
                ] {
                    let mm = model(kind, &ds, k, 1.0);
                    assert_eq!(mm.num_rows(), margin_rows + n + n * n - n);
                    assert_eq!(mm.num_columns(), mm.catalog().len() + taus + n);
                }
            }
        }
    }

    #[test]
    fn non_positive_delta_is_rejected() {
        let ds = toy(5, &[2, 2, 2], 1);
        let cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::Margin).unwrap();
        let bank = CoefficientBank::build(ScoreKind::Sm, &ds, &cat, 1.0).unwrap();
        assert!(MilpModel::build(bank.clone(), &cat, 0.0).is_err());
        assert!(MilpModel::build(bank, &cat, -1.0).is_err());
    }

    #[test]
    fn order_rows_have_expanded_arc_coefficients() {
        let ds = toy(6, &[2, 2, 2], 5);
        let mm = model(ScoreKind::Sm, &ds, 2, 3.0);
        let cat = mm.catalog().clone();
        for row in mm.rows().iter().filter(|r| is_order(&r.kind)) {
            let RowKind::Order { parent, child } = row.kind else {
                unreachable!()
            };
            assert!((row.rhs - (3.0 / 3.0 - 6.0)).abs() < 1e-15);
            for &(col, a) in &row.terms {
                if col < mm.num_eta() {
                    let (j, k) = cat.locate(col);
                    assert_eq!(j, child);
                    assert!(cat.parent_set(j, k).contains(&parent));
                    assert_eq!(a, -6.0);
                } else if col == mm.order_column(child) {
                    assert_eq!(a, 1.0);
                } else {
                    assert_eq!(col, mm.order_column(parent));
                    assert_eq!(a, -1.0);
                }
            }
        }
    }

    #[test]
    fn tau_lower_bound_never_binds() {
        let ds = toy(15, &[3, 2, 3], 6);
        let mm = model(ScoreKind::Sm, &ds, 2, 1.0);
        let lb = mm.lower()[mm.tau_column(0)];
        for r in mm.bank().rows() {
            let floor: f64 = r.coeffs.iter().filter(|&&a| a < 0.0).sum();
            assert!(lb <= floor);
        }
        assert!(lb <= mm.gamma());
    }

    #[test]
    fn dag_points_are_feasible_with_exact_objective() {
        let ds = toy(10, &[2, 3, 2], 7);
        for kind in [ScoreKind::Sm, ScoreKind::Sbm, ScoreKind::Mdl] {
            let mm = model(kind, &ds, 2, 1.0);
            let cat = mm.catalog().clone();
            let sel_sets: Vec<usize> = (0..3).map(|i| cat.num_sets(i)).collect();
            for a in 0..sel_sets[0] {
                for b in 0..sel_sets[1] {
                    for c in 0..sel_sets[2] {
                        let st = cat.structure(vec![a, b, c]).unwrap();
                        if !st.is_acyclic() {
                            continue;
                        }
                        let x = mm.point_for(&st).unwrap();
                        assert!(mm.max_violation(&x) < 1e-12);
                        let score = mm.bank().score(&st);
                        assert!((mm.objective_value(&x) - score).abs() < 1e-9);
                    }
                }
            }
        }
    }

    fn chain(n: usize) -> (ParentSetCatalog, Structure) {
        let cat = ParentSetCatalog::enumerate(n, 1, CatalogMode::Generative).unwrap();
        let sel = (0..n)
            .map(|i| if i == 0 { 0 } else { cat.find(i, &[i - 1]).unwrap() })
            .collect();
        let st = cat.structure(sel).unwrap();
        (cat, st)
    }

    #[test]
    fn absent_arc_rows_hold_for_any_order() {
        let cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::Generative).unwrap();
        let eta = cat.eta(&cat.empty_structure());
        for o in [[0.0, 1.0, 0.5], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]] {
            assert!(check_order_certificate(&cat, &eta, &o, 1.0));
        }
    }

    #[test]
    fn present_arc_requires_strict_increase() {
        let (cat, st) = chain(3);
        let eta = cat.eta(&st);
        let step = 1.0 / 3.0;
        assert!(check_order_certificate(&cat, &eta, &[0.0, step, 2.0 * step], 1.0));
        assert!(!check_order_certificate(&cat, &eta, &[0.0, 0.0, 2.0 * step], 1.0));
        assert!(!check_order_certificate(
            &cat,
            &eta,
            &[0.0, step * 0.99, 2.0 * step],
            1.0
        ));
        assert!(!check_order_certificate(&cat, &eta, &[0.0, step, 2.0], 1.0));
    }

    #[test]
    fn certificates_from_topological_positions() {
        let (cat, st) = chain(3);
        for delta in [1.0, 10.0, 1000.0] {
            let o = certificate_from_dag(&st, delta).unwrap();
            assert_eq!(o, vec![0.0, delta / 3.0, 2.0 * delta / 3.0]);
            assert!(check_order_certificate(&cat, &cat.eta(&st), &o, delta));
        }
        let o = certificate_from_dag(&cat.empty_structure(), 1.0).unwrap();
        assert_eq!(o, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn cyclic_structures_admit_no_certificate() {
        let cat = ParentSetCatalog::enumerate(2, 1, CatalogMode::Generative).unwrap();
        let st = cat.structure(vec![1, 1]).unwrap();
        assert!(matches!(certificate_from_dag(&st, 1.0), Err(Error::CyclicStructure)));
        for delta in [1.0, 10.0, 1000.0] {
            assert!(!order_system_feasible(&cat, &cat.eta(&st), delta).unwrap());
        }
    }

    #[test]
    fn exhaustive_order_system_on_three_nodes() {
        let cat = ParentSetCatalog::enumerate(3, 2, CatalogMode::Generative).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let st = cat.structure(vec![a, b, c]).unwrap();
                    let eta = cat.eta(&st);
                    for delta in [1.0, 10.0, 1000.0] {
                        assert_eq!(order_system_feasible(&cat, &eta, delta).unwrap(), st.is_acyclic());
                        if st.is_acyclic() {
                            let o = certificate_from_dag(&st, delta).unwrap();
                            assert!(check_order_certificate(&cat, &eta, &o, delta));
                        }
                    }
                }
            }
        }
    }

    /// Minimal free-MPS reader for the writer's own output.
    struct ParsedMps {
        sense_max: bool,
        rows: BTreeMap<String, char>,
        coeffs: BTreeMap<(String, String), f64>,
        rhs: BTreeMap<String, f64>,
        lower: BTreeMap<String, f64>,
        upper: BTreeMap<String, f64>,
        integer: Vec<String>,
    }

    fn parse_mps(text: &str) -> ParsedMps {
        let mut out = ParsedMps {
            sense_max: false,
            rows: BTreeMap::new(),
            coeffs: BTreeMap::new(),
            rhs: BTreeMap::new(),
            lower: BTreeMap::new(),
            upper: BTreeMap::new(),
            integer: Vec::new(),
        };
        let mut section = "";
        let mut in_int = false;
        for line in text.lines() {
            if !line.starts_with(' ') {
                section = line.split_whitespace().next().unwrap();
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match section {
                "OBJSENSE" => out.sense_max = f[0] == "MAX",
                "ROWS" => {
                    out.rows.insert(f[1].to_string(), f[0].chars().next().unwrap());
                }
                "COLUMNS" if f[1] == "'MARKER'" => in_int = f[2] == "'INTORG'",
                "COLUMNS" => {
                    if in_int && out.integer.last().map(String::as_str) != Some(f[0]) {
                        out.integer.push(f[0].to_string());
                    }
                    out.coeffs
                        .insert((f[0].to_string(), f[1].to_string()), f[2].parse().unwrap());
                }
                "RHS" => {
                    out.rhs.insert(f[1].to_string(), f[2].parse().unwrap());
                }
                "BOUNDS" => {
                    let map = if f[0] == "LO" { &mut out.lower } else { &mut out.upper };
                    map.insert(f[2].to_string(), f[3].parse().unwrap());
                }
                _ => {}
            }
        }
        out
    }

    #[test]
    fn mps_round_trip() {
        let ds = toy(8, &[3, 2, 2], 9);
        for kind in [ScoreKind::Sm, ScoreKind::Sbm, ScoreKind::Mdl] {
            let mm = model(kind, &ds, 2, 2.0);
            let p = parse_mps(&mm.to_mps_string());
            assert!(p.sense_max);
            assert_eq!(p.rows.len(), mm.num_rows() + 1);
            let expected_int: Vec<String> = (0..mm.num_eta()).map(|c| mm.column_name(c)).collect();
            assert_eq!(p.integer, expected_int);
            for row in mm.rows() {
                let name = row.name();
                let s = match row.sense {
                    Sense::Le => 'L',
                    Sense::Eq => 'E',
                    Sense::Ge => 'G',
                };
                assert_eq!(p.rows[&name], s);
                assert_eq!(p.rhs.get(&name).copied().unwrap_or(0.0), row.rhs);
                for &(col, a) in row.terms.iter().filter(|t| t.1 != 0.0) {
                    assert_eq!(p.coeffs[&(mm.column_name(col), name.clone())], a);
                }
            }
            for col in 0..mm.num_columns() {
                let name = mm.column_name(col);
                assert_eq!(p.upper[&name], mm.upper()[col]);
                assert_eq!(p.lower.get(&name).copied().unwrap_or(0.0), mm.lower()[col]);
                let obj = p.coeffs.get(&(name, "obj".to_string())).copied().unwrap_or(0.0);
                assert_eq!(obj, mm.objective()[col]);
            }
        }
    }
}
