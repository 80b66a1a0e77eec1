use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::lp::{self, extract, Fixing, LpSolution, LpStatus, Outcome, Relaxation};
use super::{gap_percent, BranchRule, NodeOrder, SolveConfig, SolveResult, SolveStatus};
use crate::catalog::{reachable, topological_order, ParentSetCatalog, Structure};
use crate::error::{Error, Result};
use crate::milp::MilpModel;

/// What the observer sees after each node's relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEvent {
    /// Evaluation index; the root is 0.
    pub node: usize,
    pub depth: usize,
    /// Relaxation objective of the parent node.
    pub parent_lp_objective: Option<f64>,
    /// `None` when the relaxation is infeasible.
    pub lp_objective: Option<f64>,
    pub incumbent: Option<f64>,
    /// Global `z̄` after this node.
    pub upper_bound: f64,
}

/// Rounds an LP point to a DAG: each variable takes its largest `η` entry
/// (ties by lowest index). If that graph is cyclic, variables are re-added in
/// descending confidence and any selection that would close a cycle is
/// replaced by the empty set.
pub fn round_incumbent(lp: &LpSolution, catalog: &ParentSetCatalog) -> Option<Structure> {
    if lp.status != LpStatus::Optimal || lp.values.len() < catalog.len() {
        return None;
    }
    let n = catalog.num_vars();
    let mut picks: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let block = &lp.values[catalog.block(i)];
            let mut best = 0;
            for (k, &v) in block.iter().enumerate() {
                if v > block[best] {
                    best = k;
                }
            }
            (best, block[best])
        })
        .collect();
    let first = catalog.structure(picks.iter().map(|p| p.0).collect()).ok()?;
    if first.is_acyclic() {
        return Some(first);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| picks[b].1.total_cmp(&picks[a].1).then(a.cmp(&b)));
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in &order {
        let parents = catalog.parent_set(i, picks[i].0);
        // Adding p → i closes a cycle iff p is reachable from i.
        if parents.iter().any(|&p| reachable(&children, i, p)) {
            picks[i].0 = 0;
            continue;
        }
        for &p in parents {
            children[p].push(i);
        }
    }
    catalog.structure(picks.iter().map(|p| p.0).collect()).ok()
}

struct Node {
    bound: f64,
    parent_lp: Option<f64>,
    depth: usize,
    seq: u64,
    fixings: Vec<Fixing>,
    /// Fixings not yet present in `warm`.
    pending: Vec<Fixing>,
    warm: Option<Arc<microlp::Solution>>,
}

struct ByBound(Node);

impl PartialEq for ByBound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ByBound {}

impl PartialOrd for ByBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByBound {
    /// Highest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        a.bound
            .total_cmp(&b.bound)
            .then(a.depth.cmp(&b.depth))
            .then(b.seq.cmp(&a.seq))
    }
}

enum Pool {
    Best(BinaryHeap<ByBound>),
    Depth(Vec<Node>),
}

impl Pool {
    fn new(order: NodeOrder) -> Self {
        match order {
            NodeOrder::BestBound => Pool::Best(BinaryHeap::new()),
            NodeOrder::DepthFirst => Pool::Depth(Vec::new()),
        }
    }

    fn push(&mut self, node: Node) {
        match self {
            Pool::Best(h) => h.push(ByBound(node)),
            Pool::Depth(v) => v.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Pool::Best(h) => h.pop().map(|b| b.0),
            Pool::Depth(v) => v.pop(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Pool::Best(h) => h.len(),
            Pool::Depth(v) => v.len(),
        }
    }

    fn max_bound(&self) -> f64 {
        match self {
            Pool::Best(h) => h.peek().map_or(f64::NEG_INFINITY, |b| b.0.bound),
            Pool::Depth(v) => v.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    TimeLimit,
    GapClosed,
    Failed,
}

struct State {
    pool: Pool,
    /// `(seq, bound)` of nodes being evaluated by workers.
    in_flight: Vec<(u64, f64)>,
    incumbent: Option<(f64, Structure)>,
    upper_bound: f64,
    root_bound: Option<f64>,
    nodes: usize,
    next_seq: u64,
    stop: Option<Stop>,
    error: Option<Error>,
    last_log: Instant,
}

impl State {
    fn z(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(z, _)| *z)
    }

    /// Tightens the reported `z̄` from the open and in-flight bounds.
    fn refresh_bound(&mut self) {
        let open = self
            .in_flight
            .iter()
            .map(|&(_, b)| b)
            .fold(self.pool.max_bound(), f64::max);
        let computed = match self.z() {
            Some(z) => open.max(z),
            None => open,
        };
        self.upper_bound = self.upper_bound.min(computed);
    }

    fn offer(&mut self, z: f64, structure: Structure) -> bool {
        if self.z().is_some_and(|cur| z <= cur) {
            return false;
        }
        self.incumbent = Some((z, structure));
        true
    }
}

fn prune_tol(z: f64) -> f64 {
    1e-9 * z.abs().max(1.0)
}

struct Engine<'a> {
    model: &'a MilpModel,
    config: &'a SolveConfig,
    observer: Option<&'a (dyn Fn(&NodeEvent) + Sync)>,
    /// Column handles; identical for every relaxation of `model`.
    vars: Vec<microlp::Variable>,
    start: Instant,
    deadline: Instant,
    state: Mutex<State>,
    wake: Condvar,
}

enum Evaluated {
    Solved(LpSolution, Arc<microlp::Solution>),
    Infeasible,
    TimedOut,
}

impl Engine<'_> {
    fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    fn cold(&self, fixings: &[Fixing]) -> Result<Evaluated> {
        let relax = Relaxation::new(self.model, fixings);
        match relax.solve(Some(self.remaining()))? {
            Outcome::Solved(sol) => match extract(self.model, &sol, &relax.vars) {
                Some(lp) => Ok(Evaluated::Solved(lp, Arc::from(sol))),
                None => Err(Error::Lp("LP solution violates the model beyond tolerance".into())),
            },
            Outcome::Infeasible => Ok(Evaluated::Infeasible),
            Outcome::Unbounded => Err(Error::Lp("relaxation is unbounded".into())),
            Outcome::TimedOut => Ok(Evaluated::TimedOut),
        }
    }

    /// Re-solves from the parent's basis; falls back to a cold solve when the
    /// warm answer fails validation or the engine reports an internal error.
    fn evaluate(&self, node: &Node) -> Result<Evaluated> {
        if fixings_infeasible(self.model.catalog(), &node.fixings) {
            return Ok(Evaluated::Infeasible);
        }
        let Some(warm) = &node.warm else {
            return self.cold(&node.fixings);
        };
        let mut sol: microlp::Solution = (**warm).clone();
        for &(col, one) in &node.pending {
            let val = if one { 1.0 } else { 0.0 };
            match lp::classify(sol.fix_var(self.vars[col], val)) {
                Ok(Outcome::Solved(next)) => sol = *next,
                // The engine occasionally reports infeasibility after a warm
                // fix that a fresh solve does not confirm.
                Ok(Outcome::Infeasible) => {
                    log::debug!("warm fix reported infeasible; re-solving cold");
                    return self.cold(&node.fixings);
                }
                Ok(Outcome::TimedOut) => return Ok(Evaluated::TimedOut),
                Ok(Outcome::Unbounded) | Err(_) => {
                    log::debug!("warm fix failed; re-solving cold");
                    return self.cold(&node.fixings);
                }
            }
        }
        match extract(self.model, &sol, &self.vars) {
            Some(lp) => Ok(Evaluated::Solved(lp, Arc::new(sol))),
            None => self.cold(&node.fixings),
        }
    }

    fn pick_branch(&self, eta: &[f64]) -> Option<usize> {
        let tol = self.config.int_tol;
        let mut best: Option<(usize, f64)> = None;
        for (col, &v) in eta.iter().enumerate() {
            let frac = v.min(1.0 - v);
            if frac <= tol {
                continue;
            }
            match self.config.branch_rule {
                BranchRule::FirstFractional => return Some(col),
                BranchRule::MostFractional => {
                    if best.is_none_or(|(_, f)| frac > f) {
                        best = Some((col, frac));
                    }
                }
            }
        }
        best.map(|(col, _)| col)
    }

    /// Selection of an LP point whose `η` is integral within tolerance.
    fn integral_structure(&self, eta: &[f64]) -> Result<Structure> {
        let catalog = self.model.catalog();
        let selection = (0..catalog.num_vars())
            .map(|i| {
                let block = &eta[catalog.block(i)];
                (0..block.len()).find(|&k| block[k] > 0.5).unwrap_or(0)
            })
            .collect();
        let st = catalog.structure(selection)?;
        if !st.is_acyclic() {
            return Err(Error::Lp("integral relaxation point encodes a cyclic graph".into()));
        }
        Ok(st)
    }

    fn log_progress(&self, st: &State, force: bool) {
        let now = Instant::now();
        if !force && now.duration_since(st.last_log).as_secs_f64() < self.config.log_interval {
            return;
        }
        let z = st.z().unwrap_or(f64::NEG_INFINITY);
        log::info!(
            "node={} z={} zbar={} gap={:.4}% open={} t={:.3}",
            st.nodes,
            z,
            st.upper_bound,
            gap_percent(st.z(), st.upper_bound),
            st.pool.len() + st.in_flight.len(),
            now.duration_since(self.start).as_secs_f64()
        );
    }

    fn worker(&self) {
        loop {
            let node = {
                let mut st = self.state.lock().expect("solver state poisoned");
                loop {
                    if st.stop.is_some() {
                        return;
                    }
                    if Instant::now() >= self.deadline {
                        st.stop = Some(Stop::TimeLimit);
                        self.wake.notify_all();
                        return;
                    }
                    st.refresh_bound();
                    if st.z().is_some() && gap_percent(st.z(), st.upper_bound) <= self.config.gap_tol {
                        st.stop = Some(Stop::GapClosed);
                        self.wake.notify_all();
                        return;
                    }
                    match st.pool.pop() {
                        Some(node) => {
                            if st.z().is_some_and(|z| node.bound <= z + prune_tol(z)) {
                                continue;
                            }
                            st.in_flight.push((node.seq, node.bound));
                            break node;
                        }
                        None if st.in_flight.is_empty() => return,
                        None => {
                            st = self
                                .wake
                                .wait_timeout(st, self.remaining().max(Duration::from_millis(1)))
                                .expect("solver state poisoned")
                                .0;
                        }
                    }
                }
            };

            let evaluated = self.evaluate(&node);
            let rounded = match &evaluated {
                Ok(Evaluated::Solved(lp, _)) => {
                    let eta = &lp.values[..self.model.num_eta()];
                    let integral = eta.iter().all(|&v| v.min(1.0 - v).abs() <= self.config.int_tol);
                    let candidate = if integral {
                        self.integral_structure(eta).map(Some)
                    } else {
                        Ok(round_incumbent(lp, self.model.catalog()))
                    };
                    candidate.map(|c| c.map(|s| (self.model.bank().score(&s), s, integral)))
                }
                _ => Ok(None),
            };

            let mut st = self.state.lock().expect("solver state poisoned");
            st.in_flight.retain(|&(seq, _)| seq != node.seq);
            let (evaluated, rounded) = match (evaluated, rounded) {
                (Ok(e), Ok(r)) => (e, r),
                (Err(e), _) | (_, Err(e)) => {
                    st.error.get_or_insert(e);
                    st.stop = Some(Stop::Failed);
                    self.wake.notify_all();
                    return;
                }
            };
            let mut lp_objective = None;
            match evaluated {
                Evaluated::TimedOut => {
                    st.pool.push(node);
                    st.stop = Some(Stop::TimeLimit);
                    self.wake.notify_all();
                    return;
                }
                Evaluated::Infeasible => st.nodes += 1,
                Evaluated::Solved(lp, basis) => {
                    st.nodes += 1;
                    lp_objective = Some(lp.objective);
                    if node.depth == 0 {
                        st.root_bound = Some(lp.objective);
                    }
                    let bound = lp.objective.min(node.bound);
                    let mut closed = false;
                    if let Some((z, s, integral)) = rounded {
                        st.offer(z, s);
                        closed = integral;
                    }
                    let z = st.z();
                    let dominated = z.is_some_and(|z| bound <= z + prune_tol(z));
                    if !closed && !dominated {
                        match self.pick_branch(&lp.values[..self.model.num_eta()]) {
                            Some(col) => self.branch(&mut st, &node, col, bound, lp.objective, basis),
                            None => {
                                // Integral within tolerance but not closed: cannot happen.
                                st.error.get_or_insert(Error::Lp("no branching candidate".into()));
                                st.stop = Some(Stop::Failed);
                            }
                        }
                    }
                }
            }
            st.refresh_bound();
            if let Some(obs) = self.observer {
                obs(&NodeEvent {
                    node: st.nodes - 1,
                    depth: node.depth,
                    parent_lp_objective: node.parent_lp,
                    lp_objective,
                    incumbent: st.z(),
                    upper_bound: st.upper_bound,
                });
            }
            self.log_progress(&st, false);
            self.wake.notify_all();
        }
    }

    fn branch(&self, st: &mut State, node: &Node, col: usize, bound: f64, lp_obj: f64, basis: Arc<microlp::Solution>) {
        let catalog = self.model.catalog();
        let (var, _) = catalog.locate(col);
        // η = 1 forces its siblings to 0. The selection row already implies
        // this in the relaxation, so only the branch entry is re-solved warm.
        let siblings: Vec<Fixing> = catalog
            .block(var)
            .filter(|&c| c != col && !node.fixings.iter().any(|&(f, _)| f == c))
            .map(|c| (c, false))
            .collect();
        let make = |st: &mut State, fix: Fixing, implied: &[Fixing]| {
            let mut fixings = node.fixings.clone();
            fixings.push(fix);
            fixings.extend_from_slice(implied);
            let seq = st.next_seq;
            st.next_seq += 1;
            Node {
                bound,
                parent_lp: Some(lp_obj),
                depth: node.depth + 1,
                seq,
                fixings,
                pending: vec![fix],
                warm: Some(Arc::clone(&basis)),
            }
        };
        let one = make(st, (col, true), &siblings);
        let zero = make(st, (col, false), &[]);
        // The stack pops last-in first, so the 1-branch goes on top.
        st.pool.push(zero);
        st.pool.push(one);
    }
}

/// True when the fixings admit no acyclic integral selection, so the node
/// can be pruned without an LP. An entry is usable when it is not fixed to 0
/// and its parent set closes no cycle with the selections fixed to 1. A
/// block without usable entries is dead; a block with exactly one is forced,
/// which may in turn exhaust other blocks.
fn fixings_infeasible(catalog: &ParentSetCatalog, fixings: &[Fixing]) -> bool {
    let n = catalog.num_vars();
    let mut chosen: Vec<Option<usize>> = vec![None; n];
    let mut zero: Vec<Vec<bool>> = (0..n).map(|i| vec![false; catalog.num_sets(i)]).collect();
    for &(col, one) in fixings {
        let (var, k) = catalog.locate(col);
        if one {
            if chosen[var].is_some_and(|c| c != k) {
                return true;
            }
            chosen[var] = Some(k);
        } else {
            zero[var][k] = true;
        }
    }
    if (0..n).any(|i| chosen[i].is_some_and(|k| zero[i][k])) {
        return true;
    }
    loop {
        let mut children = vec![Vec::new(); n];
        for (i, k) in chosen.iter().enumerate() {
            if let Some(k) = *k {
                for &p in catalog.parent_set(i, k) {
                    children[p].push(i);
                }
            }
        }
        let edges = (0..n).flat_map(|p| children[p].iter().map(move |&c| (p, c)));
        if topological_order(n, edges).is_none() {
            return true;
        }
        let mut forced = false;
        for i in 0..n {
            if chosen[i].is_some() {
                continue;
            }
            let mut usable = (0..catalog.num_sets(i))
                .filter(|&k| !zero[i][k] && !catalog.parent_set(i, k).iter().any(|&p| reachable(&children, i, p)));
            match (usable.next(), usable.next()) {
                (None, _) => return true,
                (Some(k), None) => {
                    chosen[i] = Some(k);
                    forced = true;
                }
                _ => {}
            }
        }
        if !forced {
            return false;
        }
    }
}

/// Trivial bound valid before any relaxation is solved.
fn trivial_bound(model: &MilpModel) -> f64 {
    let bank = model.bank();
    if bank.kind().is_margin() {
        bank.num_samples() as f64 * bank.gamma()
    } else {
        let catalog = model.catalog();
        (0..catalog.num_vars())
            .map(|i| {
                bank.omega()[catalog.block(i)]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum()
    }
}

pub fn branch_and_bound(model: &MilpModel, config: &SolveConfig) -> Result<SolveResult> {
    branch_and_bound_observed(model, config, None)
}

/// [`branch_and_bound`] with a callback invoked after every node, in
/// evaluation order.
pub fn branch_and_bound_observed(
    model: &MilpModel,
    config: &SolveConfig,
    observer: Option<&(dyn Fn(&NodeEvent) + Sync)>,
) -> Result<SolveResult> {
    if config.time_limit.is_nan() || config.time_limit <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time limit must be positive, got {}",
            config.time_limit
        )));
    }
    if config.gap_tol.is_nan() || config.gap_tol < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gap tolerance must be non-negative, got {}",
            config.gap_tol
        )));
    }
    if !(config.int_tol >= 0.0 && config.int_tol < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "integrality tolerance must lie in [0, 0.5), got {}",
            config.int_tol
        )));
    }
    let start = Instant::now();
    let deadline = start + Duration::try_from_secs_f64(config.time_limit).unwrap_or(Duration::MAX / 4);
    let mut pool = Pool::new(config.node_order);
    pool.push(Node {
        bound: f64::INFINITY,
        parent_lp: None,
        depth: 0,
        seq: 0,
        fixings: Vec::new(),
        pending: Vec::new(),
        warm: None,
    });
    let engine = Engine {
        model,
        config,
        observer,
        vars: Relaxation::new(model, &[]).vars,
        start,
        deadline,
        state: Mutex::new(State {
            pool,
            in_flight: Vec::new(),
            incumbent: None,
            upper_bound: trivial_bound(model),
            root_bound: None,
            nodes: 0,
            next_seq: 1,
            stop: None,
            error: None,
            last_log: start,
        }),
        wake: Condvar::new(),
    };

    if config.threads <= 1 {
        engine.worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..config.threads {
                scope.spawn(|| engine.worker());
            }
        });
    }

    let mut st = engine.state.into_inner().expect("solver state poisoned");
    if let Some(e) = st.error.take() {
        return Err(e);
    }
    let exhausted = st.stop.is_none();
    if exhausted {
        if let Some(z) = st.z() {
            st.upper_bound = z;
        }
    } else {
        st.refresh_bound();
    }
    let status = match (st.stop, st.incumbent.is_some()) {
        (None, true) | (Some(Stop::GapClosed), _) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
        (Some(_), true) => SolveStatus::FeasibleTimeout,
        (Some(_), false) => SolveStatus::NoIncumbent,
    };
    let z = st.z();
    let result = SolveResult {
        status,
        gap_percent: gap_percent(z, st.upper_bound),
        objective: z,
        upper_bound: st.upper_bound,
        root_bound: st.root_bound,
        nodes_explored: st.nodes,
        structure: st.incumbent.map(|(_, s)| s),
        wall_time: start.elapsed().as_secs_f64(),
    };
    log::info!(
        "node={} z={} zbar={} gap={:.4}% open={} t={:.3}",
        result.nodes_explored,
        z.unwrap_or(f64::NEG_INFINITY),
        result.upper_bound,
        result.gap_percent,
        st.pool.len(),
        result.wall_time
    );
    Ok(result)
}
