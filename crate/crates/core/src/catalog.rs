//! Candidate parent sets and the stacked selection-vector layout.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::CLASS;
use crate::error::{Error, Result};

/// Selection values within this distance of 0 or 1 count as binary.
pub const BINARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogMode {
    /// Features may only have the empty parent set or sets containing the class.
    Margin,
    /// Every subset of the other variables up to the parent limit.
    Generative,
}

/// Per-variable candidate parent sets `S_i`, each a sorted list of variable
/// indices. Sets are ordered by size, then lexicographically, so the empty
/// set is always at position 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CatalogRepr", into = "CatalogRepr")]
pub struct ParentSetCatalog {
    num_vars: usize,
    max_parents: usize,
    mode: CatalogMode,
    sets: Vec<Vec<Vec<usize>>>,
    offsets: Vec<usize>,
}

/// Serialized form: variable → list of parent index sets.
#[derive(Serialize, Deserialize)]
struct CatalogRepr {
    num_vars: usize,
    max_parents: usize,
    mode: CatalogMode,
    sets: Vec<Vec<Vec<usize>>>,
}

impl From<ParentSetCatalog> for CatalogRepr {
    fn from(c: ParentSetCatalog) -> Self {
        Self {
            num_vars: c.num_vars,
            max_parents: c.max_parents,
            mode: c.mode,
            sets: c.sets,
        }
    }
}

impl TryFrom<CatalogRepr> for ParentSetCatalog {
    type Error = Error;

    fn try_from(raw: CatalogRepr) -> Result<Self> {
        if raw.sets.len() != raw.num_vars {
            return Err(Error::Validation(
                "catalog set list does not match variable count".into(),
            ));
        }
        for (i, s_i) in raw.sets.iter().enumerate() {
            if s_i.first().map(|s| !s.is_empty()).unwrap_or(true) {
                return Err(Error::Validation(format!(
                    "variable {i}: first parent set must be empty"
                )));
            }
            if s_i.iter().flatten().any(|&p| p == i || p >= raw.num_vars) {
                return Err(Error::Validation(format!("variable {i}: invalid parent index")));
            }
        }
        Ok(Self::from_sets(raw.num_vars, raw.max_parents, raw.mode, raw.sets))
    }
}

/// All `size`-subsets of `pool` in lexicographic order.
fn combinations(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for idx in start..pool.len() {
            if pool.len() - idx < size - cur.len() {
                break;
            }
            cur.push(pool[idx]);
            rec(pool, size, idx + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, size, 0, &mut Vec::with_capacity(size), &mut out);
    out
}

impl ParentSetCatalog {
    /// Enumerates parent sets for `num_vars` variables with at most
    /// `max_parents` parents each. A limit above `num_vars − 1` is clamped.
    pub fn enumerate(num_vars: usize, max_parents: usize, mode: CatalogMode) -> Result<Self> {
        if num_vars < 2 {
            return Err(Error::InvalidArgument(format!(
                "catalog needs at least 2 variables, got {num_vars}"
            )));
        }
        let max_parents = max_parents.min(num_vars - 1);
        let mut sets = Vec::with_capacity(num_vars);
        for i in 0..num_vars {
            let mut s_i: Vec<Vec<usize>> = vec![Vec::new()];
            if mode == CatalogMode::Generative || i == CLASS {
                let others: Vec<usize> = (0..num_vars).filter(|&j| j != i).collect();
                for size in 1..=max_parents {
                    s_i.extend(combinations(&others, size));
                }
            } else {
                let others: Vec<usize> = (0..num_vars).filter(|&j| j != i && j != CLASS).collect();
                for size in 1..=max_parents {
                    // CLASS is index 0, so prepending keeps each set sorted and
                    // the lexicographic order intact.
                    s_i.extend(combinations(&others, size - 1).into_iter().map(|rest| {
                        let mut s = Vec::with_capacity(size);
                        s.push(CLASS);
                        s.extend(rest);
                        s
                    }));
                }
            }
            sets.push(s_i);
        }
        Ok(Self::from_sets(num_vars, max_parents, mode, sets))
    }

    fn from_sets(num_vars: usize, max_parents: usize, mode: CatalogMode, sets: Vec<Vec<Vec<usize>>>) -> Self {
        let mut offsets = Vec::with_capacity(num_vars + 1);
        let mut acc = 0;
        for s in &sets {
            offsets.push(acc);
            acc += s.len();
        }
        offsets.push(acc);
        Self {
            num_vars,
            max_parents,
            mode,
            sets,
            offsets,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn max_parents(&self) -> usize {
        self.max_parents
    }

    pub fn mode(&self) -> CatalogMode {
        self.mode
    }

    /// `Q_i`.
    pub fn num_sets(&self, var: usize) -> usize {
        self.sets[var].len()
    }

    pub fn sets(&self, var: usize) -> &[Vec<usize>] {
        &self.sets[var]
    }

    pub fn parent_set(&self, var: usize, k: usize) -> &[usize] {
        &self.sets[var][k]
    }

    /// Length of the stacked selection vector, `Σ_i Q_i`.
    pub fn len(&self) -> usize {
        self.offsets[self.num_vars]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions of variable `var`'s block in the stacked vector.
    pub fn block(&self, var: usize) -> std::ops::Range<usize> {
        self.offsets[var]..self.offsets[var + 1]
    }

    pub fn position(&self, var: usize, k: usize) -> usize {
        debug_assert!(k < self.num_sets(var));
        self.offsets[var] + k
    }

    /// Inverse of [`position`](Self::position).
    pub fn locate(&self, pos: usize) -> (usize, usize) {
        assert!(pos < self.len(), "position {pos} out of range");
        let var = self.offsets.partition_point(|&o| o <= pos) - 1;
        (var, pos - self.offsets[var])
    }

    pub fn find(&self, var: usize, parents: &[usize]) -> Option<usize> {
        let mut sorted = parents.to_vec();
        sorted.sort_unstable();
        self.sets[var].iter().position(|s| *s == sorted)
    }

    /// Builds a structure from one parent-set index per variable.
    pub fn structure(&self, selection: Vec<usize>) -> Result<Structure> {
        if selection.len() != self.num_vars {
            return Err(Error::InvalidSelection(format!(
                "{} selections for {} variables",
                selection.len(),
                self.num_vars
            )));
        }
        for (i, &k) in selection.iter().enumerate() {
            if k >= self.num_sets(i) {
                return Err(Error::InvalidSelection(format!(
                    "variable {i} has {} parent sets, selection {k} out of range",
                    self.num_sets(i)
                )));
            }
        }
        let parents = selection
            .iter()
            .enumerate()
            .map(|(i, &k)| self.sets[i][k].clone())
            .collect();
        Ok(Structure { selection, parents })
    }

    pub fn empty_structure(&self) -> Structure {
        self.structure(vec![0; self.num_vars])
            .expect("empty set is always present")
    }

    /// Decodes a binary selection vector; each block must hold exactly one 1.
    /// Use [`Structure::is_acyclic`] on the result for the acyclicity flag.
    pub fn structure_from_eta(&self, eta: &[f64]) -> Result<Structure> {
        if eta.len() != self.len() {
            return Err(Error::InvalidSelection(format!(
                "selection vector has length {}, catalog has {} positions",
                eta.len(),
                self.len()
            )));
        }
        let mut selection = Vec::with_capacity(self.num_vars);
        for i in 0..self.num_vars {
            let mut chosen = None;
            for (k, &v) in eta[self.block(i)].iter().enumerate() {
                if (v - 1.0).abs() <= BINARY_TOL {
                    if chosen.replace(k).is_some() {
                        return Err(Error::InvalidSelection(format!(
                            "variable {i} selects more than one parent set"
                        )));
                    }
                } else if v.abs() > BINARY_TOL {
                    return Err(Error::InvalidSelection(format!("entry ({i}, {k}) = {v} is not binary")));
                }
            }
            match chosen {
                Some(k) => selection.push(k),
                None => return Err(Error::InvalidSelection(format!("variable {i} selects no parent set"))),
            }
        }
        self.structure(selection)
    }

    pub fn eta(&self, structure: &Structure) -> Vec<f64> {
        let mut eta = vec![0.0; self.len()];
        for (i, &k) in structure.selection.iter().enumerate() {
            eta[self.position(i, k)] = 1.0;
        }
        eta
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A directed graph given by one chosen parent set per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Structure {
    /// Index `k_i` into the catalog's `S_i`.
    pub selection: Vec<usize>,
    /// The chosen parent sets themselves.
    pub parents: Vec<Vec<usize>>,
}

impl Structure {
    pub fn num_vars(&self) -> usize {
        self.parents.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
    }

    /// Kahn's algorithm, always releasing the smallest ready index first.
    /// `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(self.num_vars(), self.edges())
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .parents
            .iter()
            .enumerate()
            .map(|(i, ps)| {
                let list: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                format!("{i}<-{{{}}}", list.join(","))
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

pub(crate) fn topological_order(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Option<Vec<usize>> {
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (from, to) in edges {
        children[from].push(to);
        indegree[to] += 1;
    }
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
        (0..n).filter(|&v| indegree[v] == 0).map(std::cmp::Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(std::cmp::Reverse(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// True when `target` is reachable from `start` along `children` edges.
pub(crate) fn reachable(children: &[Vec<usize>], start: usize, target: usize) -> bool {
    let mut seen = vec![false; children.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        if v == target {
            return true;
        }
        for &c in &children[v] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    false
}
