//! Incremental quantifier-free integer difference logic: a store of
//! constraints `x - y <= c` with consistency maintained by shortest-path
//! potentials, minimal conflicts extracted as simple negative cycles, and
//! trail-based retraction for backtracking search.
//!
//! A constraint `x - y <= c` is an edge from `y` to `x` of weight `c`; the
//! potential function satisfies `pot(x) <= pot(y) + c` for every stored
//! edge. Asserting a violated constraint triggers a FIFO relaxation wave
//! (stable in variable id) restricted to affected vertices; an attempt to
//! lower the tail of the new edge proves a negative cycle, which is read
//! back from the relaxation parents. A simple negative cycle is irreducible:
//! dropping any one edge leaves an acyclic constraint set.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DLVar(pub u32);

impl DLVar {
    fn index(self) -> usize {
        self.0 as usize
    }
}

/// `x - y <= c`, tagged with an opaque origin token (the decision level in
/// the search engine).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DLConstraint {
    pub x: DLVar,
    pub y: DLVar,
    pub c: i64,
    pub tag: u32,
}

impl DLConstraint {
    pub fn new(x: DLVar, y: DLVar, c: i64, tag: u32) -> Self {
        DLConstraint { x, y, c, tag }
    }
}

/// An irreducible inconsistent subset: the constraints form a simple cycle
/// of negative total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictSet {
    pub constraints: Vec<DLConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertResult {
    Consistent,
    Conflict(ConflictSet),
}

impl AssertResult {
    pub fn is_consistent(&self) -> bool {
        matches!(self, AssertResult::Consistent)
    }
}

/// Integer valuation satisfying every stored constraint, canonicalized so
/// the minimum value is 0 (the earliest schedule under lower-bound chains).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    values: Vec<i64>,
}

impl Valuation {
    pub fn value(&self, v: DLVar) -> i64 {
        self.values[v.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Opaque trail position for [`DlGraph::retract_to`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark(usize);

#[derive(Debug, Error)]
#[error("invalid trail mark")]
pub struct InvalidMark;

enum TrailEntry {
    Var,
    /// An accepted edge, with the potential values it overwrote.
    Edge { undo: Vec<(u32, i64)> },
}

/// The difference-constraint store.
pub struct DlGraph {
    labels: Vec<String>,
    pot: Vec<i64>,
    /// Edge indices grouped by tail variable (`y` of the constraint).
    out: Vec<Vec<u32>>,
    edges: Vec<DLConstraint>,
    trail: Vec<TrailEntry>,
    /// Scratch buffers for the relaxation wave.
    queue: std::collections::VecDeque<u32>,
    parent: Vec<u32>,
    in_queue: Vec<bool>,
}

impl Default for DlGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl DlGraph {
    pub fn new() -> Self {
        DlGraph {
            labels: Vec::new(),
            pot: Vec::new(),
            out: Vec::new(),
            edges: Vec::new(),
            trail: Vec::new(),
            queue: std::collections::VecDeque::new(),
            parent: Vec::new(),
            in_queue: Vec::new(),
        }
    }

    /// Fresh variable with a dense id; labels are descriptive only, never keys.
    pub fn add_var(&mut self, label: impl Into<String>) -> DLVar {
        let id = self.pot.len() as u32;
        self.labels.push(label.into());
        self.pot.push(0);
        self.out.push(Vec::new());
        self.parent.push(u32::MAX);
        self.in_queue.push(false);
        self.trail.push(TrailEntry::Var);
        DLVar(id)
    }

    pub fn num_vars(&self) -> usize {
        self.pot.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, v: DLVar) -> &str {
        &self.labels[v.index()]
    }

    pub fn mark(&self) -> Mark {
        Mark(self.trail.len())
    }

    /// Asserts `c`; on conflict the store is left untouched and the returned
    /// set is a minimal negative cycle through `c`.
    pub fn assert_constraint(&mut self, c: DLConstraint) -> AssertResult {
        debug_assert!(c.x.index() < self.num_vars() && c.y.index() < self.num_vars());
        if c.x == c.y {
            // Self constraints x - x <= c are trivially consistent for c >= 0
            // and a singleton negative cycle otherwise.
            if c.c >= 0 {
                self.edges.push(c);
                self.out[c.y.index()].push(self.edges.len() as u32 - 1);
                self.trail.push(TrailEntry::Edge { undo: Vec::new() });
                return AssertResult::Consistent;
            }
            return AssertResult::Conflict(ConflictSet { constraints: vec![c] });
        }

        let (u, v) = (c.y.index(), c.x.index());
        if self.pot[u] + c.c >= self.pot[v] {
            // Already feasible under the current potentials.
            self.edges.push(c);
            self.out[u].push(self.edges.len() as u32 - 1);
            self.trail.push(TrailEntry::Edge { undo: Vec::new() });
            return AssertResult::Consistent;
        }

        // Relaxation wave from v; reaching u with a decrease closes a
        // negative cycle through the new edge.
        let mut undo: Vec<(u32, i64)> = Vec::new();
        self.queue.clear();
        undo.push((v as u32, self.pot[v]));
        self.pot[v] = self.pot[u] + c.c;
        self.parent[v] = u32::MAX; // head of the new edge
        self.queue.push_back(v as u32);
        self.in_queue[v] = true;

        while let Some(z) = self.queue.pop_front() {
            let z = z as usize;
            self.in_queue[z] = false;
            for ei in 0..self.out[z].len() {
                let eidx = self.out[z][ei];
                let e = self.edges[eidx as usize];
                let t = e.x.index();
                let cand = self.pot[z] + e.c;
                if cand < self.pot[t] {
                    if t == u {
                        let conflict = self.read_cycle(c, z, eidx);
                        for &(var, old) in undo.iter().rev() {
                            self.pot[var as usize] = old;
                        }
                        for q in self.queue.drain(..) {
                            self.in_queue[q as usize] = false;
                        }
                        return AssertResult::Conflict(conflict);
                    }
                    undo.push((t as u32, self.pot[t]));
                    self.pot[t] = cand;
                    self.parent[t] = eidx;
                    if !self.in_queue[t] {
                        self.queue.push_back(t as u32);
                        self.in_queue[t] = true;
                    }
                }
            }
        }

        self.edges.push(c);
        self.out[u].push(self.edges.len() as u32 - 1);
        self.trail.push(TrailEntry::Edge { undo });
        AssertResult::Consistent
    }

    /// Reads the negative cycle: new edge, parent chain from its head down
    /// to `z`, then the closing edge `z -> u`.
    fn read_cycle(&self, new: DLConstraint, z: usize, closing: u32) -> ConflictSet {
        let mut chain = vec![self.edges[closing as usize]];
        let mut cur = z;
        while self.parent[cur] != u32::MAX {
            let e = self.edges[self.parent[cur] as usize];
            chain.push(e);
            cur = e.y.index();
        }
        chain.push(new);
        chain.reverse(); // new edge first, then the path back to its tail
        debug_assert!(chain.iter().map(|e| e.c).sum::<i64>() < 0);
        ConflictSet { constraints: chain }
    }

    /// Restores the store to the state at `mark`, bit-identically.
    pub fn retract_to(&mut self, mark: Mark) -> Result<(), InvalidMark> {
        if mark.0 > self.trail.len() {
            return Err(InvalidMark);
        }
        while self.trail.len() > mark.0 {
            match self.trail.pop().unwrap() {
                TrailEntry::Var => {
                    self.labels.pop();
                    self.pot.pop();
                    self.out.pop();
                    self.parent.pop();
                    self.in_queue.pop();
                }
                TrailEntry::Edge { undo } => {
                    let e = self.edges.pop().unwrap();
                    let popped = self.out[e.y.index()].pop();
                    debug_assert_eq!(popped, Some(self.edges.len() as u32));
                    for &(var, old) in undo.iter().rev() {
                        self.pot[var as usize] = old;
                    }
                }
            }
        }
        Ok(())
    }

    /// Current solution, shifted so the minimum value is 0. The store is
    /// always consistent (conflicting constraints are rejected), so this is
    /// total; it is deterministic for a fixed assertion order.
    pub fn solution(&self) -> Valuation {
        let min = self.pot.iter().copied().min().unwrap_or(0);
        Valuation { values: self.pot.iter().map(|&p| p - min).collect() }
    }

    pub fn constraints(&self) -> &[DLConstraint] {
        &self.edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: DLVar, y: DLVar, b: i64) -> DLConstraint {
        DLConstraint::new(x, y, b, 0)
    }

    #[test]
    fn fresh_vars_get_dense_ids() {
        let mut dl = DlGraph::new();
        assert_eq!(dl.add_var("a"), DLVar(0));
        assert_eq!(dl.add_var("b"), DLVar(1));
        // Duplicate labels still produce fresh variables.
        assert_eq!(dl.add_var("a"), DLVar(2));
    }

    #[test]
    fn nonnegative_cycle_is_consistent() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        assert!(dl.assert_constraint(c(x, y, 3)).is_consistent());
        assert!(dl.assert_constraint(c(y, x, -1)).is_consistent());
    }

    #[test]
    fn three_edge_negative_cycle_is_reported_exactly() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        let z = dl.add_var("z");
        assert!(dl.assert_constraint(c(x, y, 3)).is_consistent());
        assert!(dl.assert_constraint(c(y, z, -4)).is_consistent());
        match dl.assert_constraint(c(z, x, 0)) {
            AssertResult::Conflict(set) => {
                assert_eq!(set.constraints.len(), 3);
                let sum: i64 = set.constraints.iter().map(|e| e.c).sum();
                assert_eq!(sum, -1);
            }
            AssertResult::Consistent => panic!("expected conflict"),
        }
        // The rejected constraint left the store unchanged.
        assert_eq!(dl.num_constraints(), 2);
    }

    #[test]
    fn two_edge_conflict() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        assert!(dl.assert_constraint(c(x, y, -1)).is_consistent());
        match dl.assert_constraint(c(y, x, -1)) {
            AssertResult::Conflict(set) => assert_eq!(set.constraints.len(), 2),
            AssertResult::Consistent => panic!("expected conflict"),
        }
    }

    #[test]
    fn retraction_restores_state() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        let mark = dl.mark();
        assert!(dl.assert_constraint(c(x, y, -2)).is_consistent());
        assert!(dl.assert_constraint(c(y, x, 5)).is_consistent());
        assert_eq!(dl.num_constraints(), 2);
        dl.retract_to(mark).unwrap();
        assert_eq!(dl.num_constraints(), 0);
        assert_eq!(dl.solution().value(x), 0);
        assert_eq!(dl.solution().value(y), 0);
    }

    #[test]
    fn retract_to_initial_mark_empties_store() {
        let mut dl = DlGraph::new();
        let start = dl.mark();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        dl.assert_constraint(c(x, y, 1));
        dl.retract_to(start).unwrap();
        assert_eq!(dl.num_vars(), 0);
        assert_eq!(dl.num_constraints(), 0);
        assert!(dl.retract_to(Mark(7)).is_err());
    }

    #[test]
    fn replay_after_retract_matches_original_outcomes() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        let z = dl.add_var("z");
        let seq = vec![c(x, y, 1), c(y, z, -3), c(z, x, 1), c(z, x, 5)];
        let mark = dl.mark();
        let first: Vec<bool> = seq.iter().map(|&k| dl.assert_constraint(k).is_consistent()).collect();
        dl.retract_to(mark).unwrap();
        let second: Vec<bool> = seq.iter().map(|&k| dl.assert_constraint(k).is_consistent()).collect();
        assert_eq!(first, second);
        assert_eq!(first, vec![true, true, false, true]);
    }

    #[test]
    fn empty_store_solution_is_zero() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        let val = dl.solution();
        assert_eq!(val.value(x), 0);
        assert_eq!(val.value(y), 0);
    }

    #[test]
    fn earliest_canonicalization() {
        let mut dl = DlGraph::new();
        let x = dl.add_var("x");
        let y = dl.add_var("y");
        // x - y <= -2, i.e. y >= x + 2.
        assert!(dl.assert_constraint(c(x, y, -2)).is_consistent());
        let val = dl.solution();
        assert_eq!(val.value(x), 0);
        assert_eq!(val.value(y), 2);
        assert!(val.value(x) - val.value(y) <= -2);
    }

    #[test]
    fn solution_satisfies_all_constraints() {
        let mut dl = DlGraph::new();
        let vars: Vec<DLVar> = (0..6).map(|i| dl.add_var(format!("v{i}"))).collect();
        let cons = vec![
            c(vars[0], vars[1], 4),
            c(vars[1], vars[2], -1),
            c(vars[2], vars[3], 2),
            c(vars[3], vars[0], 3),
            c(vars[4], vars[5], -7),
        ];
        for &k in &cons {
            assert!(dl.assert_constraint(k).is_consistent());
        }
        let val = dl.solution();
        for k in &cons {
            assert!(val.value(k.x) - val.value(k.y) <= k.c);
        }
    }
}
