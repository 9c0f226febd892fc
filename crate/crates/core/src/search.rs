//! Backtracking decision engine over binding, routing, ordering and phase
//! decisions. Difference constraints are posted incrementally as structure
//! is determined; the periodic-overlap theory lazily forces order/phase
//! branching on the first violating resource pair; conflicts backjump to the
//! deepest contributing decision level.
//!
//! Decision order: tasks are bound in topological order (applications
//! sequentially), each message is routed hop by hop as soon as both
//! endpoints are bound, and order/phase decisions are created only when the
//! periodic check reports a violation. Allocation is derived, never decided:
//! a tile is allocated iff a binding or route uses it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::dlsolver::{AssertResult, DLConstraint, DLVar, DlGraph, Mark, Valuation};
use crate::model::{gcd, SpecIndex};
use crate::objectives::{self, ObjectiveSpec, ObjectiveVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// A pair of periodic occupancies sharing a resource; endpoints are kept in
/// ascending identifier order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ResourcePair {
    Tile { tile: usize, a: usize, b: usize },
    Link { link: (usize, usize), a: (usize, usize), b: (usize, usize) },
}

/// An order/phase resolution for one resource pair. `k` is the residue
/// window index within the chosen direction; `None` while only the
/// direction has been decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderRec {
    pub pair: ResourcePair,
    pub dir: Direction,
    pub k: Option<i64>,
    pub order_level: u32,
    pub phase_level: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Hop {
    pub to: usize,
    pub var: DLVar,
    pub level: u32,
}

#[derive(Debug, Clone, Default)]
pub struct RouteState {
    pub hops: Vec<Hop>,
    pub complete: bool,
}

impl RouteState {
    pub fn started(&self) -> bool {
        !self.hops.is_empty()
    }
}

/// The mutable decision state visible to pruners and metrics.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub bindings: Vec<Option<usize>>,
    pub binding_level: Vec<u32>,
    pub routes: Vec<RouteState>,
    pub orders: Vec<OrderRec>,
    pub task_vars: Vec<DLVar>,
    pub origin: DLVar,
}

impl Assignment {
    pub fn is_complete(&self) -> bool {
        self.bindings.iter().all(Option::is_some) && self.routes.iter().all(|r| r.complete)
    }

    /// Full tile path of a message route (source tile first).
    pub fn route_path(&self, idx: &SpecIndex, m: usize) -> Vec<usize> {
        let src = self.bindings[idx.msgs[m].src]
            .map(|o| idx.tasks[idx.msgs[m].src].options[o].tile)
            .expect("route path requires bound source");
        let mut path = vec![src];
        path.extend(self.routes[m].hops.iter().map(|h| h.to));
        path
    }
}

/// One of the four decision kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Bind { task: usize, option: usize },
    Hop { msg: usize, to: usize },
    Order { pair: ResourcePair, dir: Direction },
    Phase { pair: ResourcePair, k: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub id: u64,
    pub spec_fingerprint: u64,
    pub bindings: Vec<usize>,
    /// Tile paths per message, source tile first.
    pub routes: Vec<Vec<usize>>,
    pub orders: Vec<(ResourcePair, Direction, i64)>,
    pub task_starts: Vec<u64>,
    /// Start times by label: task ids and `msg#hop` entries.
    pub schedule: BTreeMap<String, u64>,
    pub objectives: ObjectiveVector,
}

impl Solution {
    /// Canonical undirected links of a message route.
    pub fn route_links(&self, m: usize) -> Vec<(usize, usize)> {
        self.routes[m].windows(2).map(|w| canon_link(w[0], w[1])).collect()
    }
}

pub fn canon_link(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Prune,
}

#[derive(Debug)]
pub enum SolveOutcome {
    Solution(Box<Solution>),
    Exhausted,
    Interrupted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub solutions: u64,
    pub nodes: u64,
    pub prunes: u64,
    pub dl_conflicts: u64,
    pub periodic_violations: u64,
}

// ---------------------------------------------------------------------------
// Periodic-overlap theory
// ---------------------------------------------------------------------------

/// gcd overlap criterion: two periodic jobs on one resource are conflict
/// free iff `w_a <= (s_b - s_a) mod g <= g - w_b` with `g = gcd(p_a, p_b)`.
pub fn gcd_overlap_ok(s_a: i64, w_a: u64, p_a: u64, s_b: i64, w_b: u64, p_b: u64) -> bool {
    let g = gcd(p_a, p_b) as i64;
    let r = (s_b - s_a).rem_euclid(g);
    w_a as i64 <= r && r <= g - w_b as i64
}

#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub var: DLVar,
    pub duration: u64,
    pub period: u64,
}

/// The two periodic occupancies of a resource pair.
pub fn pair_jobs(idx: &SpecIndex, asg: &Assignment, pair: &ResourcePair) -> (Job, Job) {
    match *pair {
        ResourcePair::Tile { a, b, .. } => {
            let job = |t: usize| Job {
                var: asg.task_vars[t],
                duration: idx.tasks[t].options[asg.bindings[t].expect("bound")].wcet,
                period: idx.tasks[t].period,
            };
            (job(a), job(b))
        }
        ResourcePair::Link { a, b, .. } => {
            let job = |(m, h): (usize, usize)| Job {
                var: asg.routes[m].hops[h].var,
                duration: idx.msgs[m].size * idx.link_delay,
                period: idx.apps[idx.msgs[m].app].period,
            };
            (job(a), job(b))
        }
    }
}

pub fn pair_satisfied(
    idx: &SpecIndex,
    asg: &Assignment,
    val: &Valuation,
    pair: &ResourcePair,
) -> bool {
    let (ja, jb) = pair_jobs(idx, asg, pair);
    gcd_overlap_ok(val.value(ja.var), ja.duration, ja.period, val.value(jb.var), jb.duration, jb.period)
}

/// All task pairs co-bound to a tile and all message-hop pairs sharing a
/// link, in deterministic ascending-identifier order.
pub fn resource_pairs(idx: &SpecIndex, asg: &Assignment) -> Vec<ResourcePair> {
    let mut out = Vec::new();
    let mut on_tile: Vec<Vec<usize>> = vec![Vec::new(); idx.tiles.len()];
    for t in 0..idx.tasks.len() {
        if let Some(opt) = asg.bindings[t] {
            on_tile[idx.tasks[t].options[opt].tile].push(t);
        }
    }
    for (tile, tasks) in on_tile.iter().enumerate() {
        for i in 0..tasks.len() {
            for j in i + 1..tasks.len() {
                out.push(ResourcePair::Tile { tile, a: tasks[i], b: tasks[j] });
            }
        }
    }
    let mut on_link: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (m, route) in asg.routes.iter().enumerate() {
        let mut prev = match asg.bindings.get(idx.msgs[m].src).and_then(|b| *b) {
            Some(opt) if route.started() => idx.tasks[idx.msgs[m].src].options[opt].tile,
            _ => continue,
        };
        for (h, hop) in route.hops.iter().enumerate() {
            on_link.entry(canon_link(prev, hop.to)).or_default().push((m, h));
            prev = hop.to;
        }
    }
    for (link, occs) in on_link {
        for i in 0..occs.len() {
            for j in i + 1..occs.len() {
                out.push(ResourcePair::Link { link, a: occs[i], b: occs[j] });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeriodicOutcome {
    Ok,
    Violation(ResourcePair),
}

/// Checks every shared-resource pair against the gcd criterion; the first
/// violating pair in deterministic order is reported.
pub fn periodic_check(idx: &SpecIndex, asg: &Assignment, val: &Valuation) -> PeriodicOutcome {
    for pair in resource_pairs(idx, asg) {
        if !pair_satisfied(idx, asg, val, &pair) {
            return PeriodicOutcome::Violation(pair);
        }
    }
    PeriodicOutcome::Ok
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

/// Admissible next links for an incomplete route: unvisited mesh neighbors
/// of the route head from which the destination (or any candidate
/// destination tile while the destination task is unbound) stays reachable.
pub fn route_extend(idx: &SpecIndex, asg: &Assignment, m: usize) -> Vec<(usize, usize)> {
    let info = &idx.msgs[m];
    let src_tile = asg.bindings[info.src]
        .map(|o| idx.tasks[info.src].options[o].tile)
        .expect("route_extend requires a bound source");
    let route = &asg.routes[m];
    debug_assert!(!route.complete);
    let head = route.hops.last().map(|h| h.to).unwrap_or(src_tile);
    let mut visited: HashSet<usize> = route.hops.iter().map(|h| h.to).collect();
    visited.insert(src_tile);
    let targets: Vec<usize> = match asg.bindings[info.dst] {
        Some(opt) => vec![idx.tasks[info.dst].options[opt].tile],
        None => {
            let mut t: Vec<usize> = idx.tasks[info.dst].options.iter().map(|o| o.tile).collect();
            t.sort_unstable();
            t.dedup();
            t
        }
    };
    idx.neighbors[head]
        .iter()
        .copied()
        .filter(|&n| !visited.contains(&n) && reaches_any(idx, n, &targets, &visited))
        .map(|n| (head, n))
        .collect()
}

fn reaches_any(idx: &SpecIndex, from: usize, targets: &[usize], blocked: &HashSet<usize>) -> bool {
    if targets.contains(&from) {
        return true;
    }
    let mut seen = blocked.clone();
    seen.insert(from);
    let mut queue = vec![from];
    while let Some(t) = queue.pop() {
        for &n in &idx.neighbors[t] {
            if seen.insert(n) {
                if targets.contains(&n) {
                    return true;
                }
                queue.push(n);
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum DecisionPoint {
    Bind { task: usize },
    Hop { msg: usize },
    Order { pair: ResourcePair },
    Phase { order_idx: usize },
}

#[derive(Debug, Clone, Copy)]
enum Alt {
    Opt(usize),
    Link { to: usize },
    Dir(Direction),
    K(i64),
}

enum StructOp {
    Bind { task: usize },
    PushHop { msg: usize },
    CompleteRoute { msg: usize },
    PushOrder,
    SetPhase { order_idx: usize },
}

struct Frame {
    point: DecisionPoint,
    alts: Vec<Alt>,
    next: usize,
    dl_mark: Mark,
    /// Levels the decision point structurally depends on.
    struct_reason: Vec<u32>,
    /// A solution was emitted below this frame (diagnostics for the
    /// backjump soundness check).
    sol_below: bool,
    undo: Vec<StructOp>,
}

/// Backtracking target. `Chron` steps to the deepest remaining frame; a
/// `Levels` jump is raised only for order points whose residue windows are
/// structurally empty (`w_a + w_b > gcd`), where every assignment keeping
/// the pair's co-location decisions is infeasible regardless of anything
/// in between.
#[derive(Debug, Clone)]
enum Reason {
    Chron,
    Levels(BTreeSet<u32>),
}

enum NodeStep {
    Emit(Box<Solution>),
    Branch(DecisionPoint),
    Dead(Reason),
}

#[derive(PartialEq)]
enum Status {
    Fresh,
    Running,
    Done,
}

pub struct SearchState<'a> {
    idx: &'a SpecIndex,
    objectives: ObjectiveSpec,
    check_every: u32,
    dl: DlGraph,
    asg: Assignment,
    frames: Vec<Frame>,
    counters: Counters,
    status: Status,
    resume_at_node: bool,
    next_solution_id: u64,
    deadline: Option<Instant>,
    stop: Option<Arc<AtomicBool>>,
}

impl<'a> SearchState<'a> {
    pub fn new(idx: &'a SpecIndex, objectives: ObjectiveSpec, check_every: u32) -> Self {
        assert!(check_every >= 1, "check_every must be positive");
        let mut dl = DlGraph::new();
        let origin = dl.add_var("origin");
        let mut task_vars = Vec::with_capacity(idx.tasks.len());
        for t in &idx.tasks {
            let v = dl.add_var(t.id.clone());
            task_vars.push(v);
        }
        // Root floor constraints: every start is at or after the origin.
        for &v in &task_vars {
            let res = dl.assert_constraint(DLConstraint::new(origin, v, 0, 0));
            debug_assert!(res.is_consistent());
        }
        let asg = Assignment {
            bindings: vec![None; idx.tasks.len()],
            binding_level: vec![0; idx.tasks.len()],
            routes: vec![RouteState::default(); idx.msgs.len()],
            orders: Vec::new(),
            task_vars,
            origin,
        };
        SearchState {
            idx,
            objectives,
            check_every,
            dl,
            asg,
            frames: Vec::new(),
            counters: Counters::default(),
            status: Status::Fresh,
            resume_at_node: false,
            next_solution_id: 0,
            deadline: None,
            stop: None,
        }
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn assignment(&self) -> &Assignment {
        &self.asg
    }

    pub fn index(&self) -> &SpecIndex {
        self.idx
    }

    pub fn objective_spec(&self) -> &ObjectiveSpec {
        &self.objectives
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn set_stop_flag(&mut self, stop: Option<Arc<AtomicBool>>) {
        self.stop = stop;
    }

    fn interrupted(&self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return true;
            }
        }
        if let Some(s) = &self.stop {
            if s.load(Ordering::Relaxed) {
                return true;
            }
        }
        false
    }

    /// Returns the next solution in deterministic enumeration order not cut
    /// by `pruner`, resuming from the previous state. No complete assignment
    /// is visited twice across successive calls.
    pub fn solve_next(
        &mut self,
        pruner: &mut dyn FnMut(&Assignment) -> Verdict,
    ) -> SolveOutcome {
        let mut pending = match self.status {
            Status::Done => return SolveOutcome::Exhausted,
            Status::Fresh => {
                self.status = Status::Running;
                None // enter the root node
            }
            Status::Running => {
                if self.resume_at_node {
                    self.resume_at_node = false;
                    None
                } else {
                    Some(Reason::Chron) // step past the last emitted solution
                }
            }
        };

        loop {
            match pending.take() {
                None => {
                    self.counters.nodes += 1;
                    if self.counters.nodes % 64 == 0 && self.interrupted() {
                        self.resume_at_node = true;
                        self.counters.nodes -= 1;
                        return SolveOutcome::Interrupted;
                    }
                    match self.enter_node(pruner) {
                        NodeStep::Emit(sol) => {
                            for f in &mut self.frames {
                                f.sol_below = true;
                            }
                            self.counters.solutions += 1;
                            return SolveOutcome::Solution(sol);
                        }
                        NodeStep::Branch(point) => {
                            let frame = self.make_frame(point);
                            self.frames.push(frame);
                            let fi = self.frames.len() - 1;
                            match self.advance_frame(fi) {
                                Ok(()) => {} // descend into the child node
                                Err(reason) => {
                                    self.frames.pop();
                                    pending = Some(reason);
                                }
                            }
                        }
                        NodeStep::Dead(reason) => pending = Some(reason),
                    }
                }
                Some(reason) => {
                    let target = match &reason {
                        Reason::Chron => self.frames.len(),
                        Reason::Levels(s) => s.iter().max().map(|&l| l as usize).unwrap_or(0),
                    };
                    while self.frames.len() > target {
                        let fi = self.frames.len() - 1;
                        // A solution below a skipped frame would extend the
                        // co-location decisions the jump proved infeasible.
                        debug_assert!(
                            !self.frames[fi].sol_below,
                            "backjump skipped a solution-bearing frame"
                        );
                        self.undo_alt(fi);
                        self.frames.pop();
                    }
                    if self.frames.is_empty() {
                        self.status = Status::Done;
                        return SolveOutcome::Exhausted;
                    }
                    let fi = self.frames.len() - 1;
                    self.undo_alt(fi);
                    match self.advance_frame(fi) {
                        Ok(()) => {} // descend
                        Err(r) => {
                            self.frames.pop();
                            pending = Some(r);
                        }
                    }
                }
            }
        }
    }

    // -- node logic ---------------------------------------------------------

    fn enter_node(&mut self, pruner: &mut dyn FnMut(&Assignment) -> Verdict) -> NodeStep {
        // A direction decision is always completed by a phase decision first.
        if let Some(oi) = self.asg.orders.iter().rposition(|r| r.k.is_none()) {
            debug_assert_eq!(oi, self.asg.orders.len() - 1);
            return NodeStep::Branch(DecisionPoint::Phase { order_idx: oi });
        }
        let depth = self.frames.len() as u32;
        let complete = self.asg.is_complete();
        let checks_due = depth % self.check_every == 0;

        if complete || checks_due {
            let val = self.dl.solution();
            if let Some(pair) = self.first_unordered_violation(&val) {
                self.counters.periodic_violations += 1;
                return NodeStep::Branch(DecisionPoint::Order { pair });
            }
        }
        if !complete && checks_due && pruner(&self.asg) == Verdict::Prune {
            self.counters.prunes += 1;
            return NodeStep::Dead(Reason::Chron);
        }
        if complete {
            return NodeStep::Emit(self.build_solution());
        }
        for (m, route) in self.asg.routes.iter().enumerate() {
            if !route.complete
                && self.asg.bindings[self.idx.msgs[m].src].is_some()
                && self.asg.bindings[self.idx.msgs[m].dst].is_some()
            {
                return NodeStep::Branch(DecisionPoint::Hop { msg: m });
            }
        }
        let task = self
            .idx
            .topo_order
            .iter()
            .copied()
            .find(|&t| self.asg.bindings[t].is_none())
            .expect("incomplete assignment has an unbound task");
        NodeStep::Branch(DecisionPoint::Bind { task })
    }

    fn first_unordered_violation(&self, val: &Valuation) -> Option<ResourcePair> {
        for pair in resource_pairs(self.idx, &self.asg) {
            if self.asg.orders.iter().any(|r| r.pair == pair) {
                continue; // window constraints already keep it conflict free
            }
            if !pair_satisfied(self.idx, &self.asg, val, &pair) {
                return Some(pair);
            }
        }
        None
    }

    fn build_solution(&mut self) -> Box<Solution> {
        let val = self.dl.solution();
        debug_assert!(matches!(periodic_check(self.idx, &self.asg, &val), PeriodicOutcome::Ok));
        let task_starts: Vec<u64> =
            self.asg.task_vars.iter().map(|&v| val.value(v) as u64).collect();
        let mut schedule = BTreeMap::new();
        for (t, info) in self.idx.tasks.iter().enumerate() {
            schedule.insert(info.id.clone(), task_starts[t]);
        }
        for (m, route) in self.asg.routes.iter().enumerate() {
            for (h, hop) in route.hops.iter().enumerate() {
                schedule.insert(format!("{}#{}", self.idx.msgs[m].id, h), val.value(hop.var) as u64);
            }
        }
        let objectives = objectives::evaluate(self.idx, &self.objectives, &self.asg, &task_starts)
            .expect("complete assignment evaluates");
        let id = self.next_solution_id;
        self.next_solution_id += 1;
        Box::new(Solution {
            id,
            spec_fingerprint: self.idx.fingerprint,
            bindings: self.asg.bindings.iter().map(|b| b.unwrap()).collect(),
            routes: (0..self.idx.msgs.len()).map(|m| self.asg.route_path(self.idx, m)).collect(),
            orders: self
                .asg
                .orders
                .iter()
                .map(|r| (r.pair, r.dir, r.k.expect("phased")))
                .collect(),
            task_starts,
            schedule,
            objectives,
        })
    }

    // -- frames and alternatives --------------------------------------------

    fn make_frame(&mut self, point: DecisionPoint) -> Frame {
        let (alts, struct_reason) = match &point {
            DecisionPoint::Bind { task } => {
                let alts = (0..self.idx.tasks[*task].options.len()).map(Alt::Opt).collect();
                (alts, Vec::new())
            }
            DecisionPoint::Hop { msg } => {
                let m = *msg;
                let info = &self.idx.msgs[m];
                let dst_tile =
                    self.idx.tasks[info.dst].options[self.asg.bindings[info.dst].unwrap()].tile;
                let mut links = route_extend(self.idx, &self.asg, m);
                links.sort_by_key(|&(_, to)| (self.idx.manhattan(to, dst_tile), to));
                let alts = links.into_iter().map(|(_, to)| Alt::Link { to }).collect();
                let mut reason = vec![
                    self.asg.binding_level[info.src],
                    self.asg.binding_level[info.dst],
                ];
                reason.extend(self.asg.routes[m].hops.iter().map(|h| h.level));
                (alts, reason)
            }
            DecisionPoint::Order { pair } => {
                let mut alts = Vec::new();
                for dir in [Direction::Forward, Direction::Backward] {
                    if !self.phase_domain(pair, dir).is_empty() {
                        alts.push(Alt::Dir(dir));
                    }
                }
                (alts, self.pair_levels(pair))
            }
            DecisionPoint::Phase { order_idx } => {
                let rec = &self.asg.orders[*order_idx];
                let pair = rec.pair;
                let dir = rec.dir;
                let order_level = rec.order_level;
                let alts = self.phase_domain(&pair, dir).into_iter().map(Alt::K).collect();
                let mut reason = self.pair_levels(&pair);
                reason.push(order_level);
                (alts, reason)
            }
        };
        Frame {
            point,
            alts,
            next: 0,
            dl_mark: self.dl.mark(),
            struct_reason,
            sol_below: false,
            undo: Vec::new(),
        }
    }

    fn pair_levels(&self, pair: &ResourcePair) -> Vec<u32> {
        match *pair {
            ResourcePair::Tile { a, b, .. } => {
                vec![self.asg.binding_level[a], self.asg.binding_level[b]]
            }
            ResourcePair::Link { a, b, .. } => {
                vec![self.asg.routes[a.0].hops[a.1].level, self.asg.routes[b.0].hops[b.1].level]
            }
        }
    }

    /// Residue window indices admissible for a direction; empty when the
    /// durations cannot interleave at all (`w_a + w_b > g`).
    fn phase_domain(&self, pair: &ResourcePair, dir: Direction) -> Vec<i64> {
        let (ja, jb) = pair_jobs(self.idx, &self.asg, pair);
        let (first, second) = match dir {
            Direction::Forward => (ja, jb),
            Direction::Backward => (jb, ja),
        };
        let g = gcd(first.period, second.period) as i64;
        let (w_f, w_s) = (first.duration as i64, second.duration as i64);
        if w_f + w_s > g {
            return Vec::new();
        }
        let ub = second.period as i64 - w_s - w_f;
        if ub < 0 {
            return Vec::new();
        }
        (0..=ub / g).collect()
    }

    /// Applies alternatives until one is consistent; on exhaustion returns
    /// the backtracking target.
    fn advance_frame(&mut self, fi: usize) -> Result<(), Reason> {
        let level = fi as u32 + 1;
        loop {
            if self.frames[fi].next >= self.frames[fi].alts.len() {
                let f = &self.frames[fi];
                // An order point with no residue windows at all is dead for
                // every assignment sharing the pair's co-location decisions:
                // jump straight past everything in between.
                if matches!(f.point, DecisionPoint::Order { .. }) && f.alts.is_empty() {
                    let levels: BTreeSet<u32> =
                        f.struct_reason.iter().copied().filter(|&l| l > 0 && l < level).collect();
                    return Err(Reason::Levels(levels));
                }
                return Err(Reason::Chron);
            }
            let alt = self.frames[fi].alts[self.frames[fi].next];
            self.frames[fi].next += 1;
            match self.apply_alt(fi, alt) {
                Ok(()) => return Ok(()),
                Err(()) => self.undo_alt(fi),
            }
        }
    }

    fn undo_alt(&mut self, fi: usize) {
        let frame = &mut self.frames[fi];
        self.dl.retract_to(frame.dl_mark).expect("frame marks are stack disciplined");
        for op in frame.undo.drain(..).rev() {
            match op {
                StructOp::Bind { task } => {
                    self.asg.bindings[task] = None;
                    self.asg.binding_level[task] = 0;
                }
                StructOp::PushHop { msg } => {
                    self.asg.routes[msg].hops.pop();
                }
                StructOp::CompleteRoute { msg } => {
                    self.asg.routes[msg].complete = false;
                }
                StructOp::PushOrder => {
                    self.asg.orders.pop();
                }
                StructOp::SetPhase { order_idx } => {
                    self.asg.orders[order_idx].k = None;
                    self.asg.orders[order_idx].phase_level = None;
                }
            }
        }
    }

    /// Posts one constraint tagged with its decision level. The minimal
    /// conflict always contains the new constraint, so its deepest tagged
    /// decision is the current one: the caller advances to the next
    /// alternative at this level.
    fn post(&mut self, x: DLVar, y: DLVar, c: i64, level: u32) -> Result<(), ()> {
        match self.dl.assert_constraint(DLConstraint::new(x, y, c, level)) {
            AssertResult::Consistent => Ok(()),
            AssertResult::Conflict(set) => {
                debug_assert_eq!(set.constraints.iter().map(|k| k.tag).max(), Some(level));
                self.counters.dl_conflicts += 1;
                Err(())
            }
        }
    }

    fn apply_alt(&mut self, fi: usize, alt: Alt) -> Result<(), ()> {
        let level = fi as u32 + 1;
        let point = self.frames[fi].point.clone();
        match (point, alt) {
            (DecisionPoint::Bind { task }, Alt::Opt(option)) => {
                self.asg.bindings[task] = Some(option);
                self.asg.binding_level[task] = level;
                self.frames[fi].undo.push(StructOp::Bind { task });
                let info = &self.idx.tasks[task];
                let opt = &info.options[option];
                // Start window: 0 <= s_t <= period - wcet.
                let window = (info.period - opt.wcet) as i64;
                self.post(self.asg.task_vars[task], self.asg.origin, window, level)?;
                // Same-tile messages complete with zero hops immediately.
                let adjacent: Vec<usize> = info.preds.iter().chain(&info.succs).copied().collect();
                for m in adjacent {
                    let msg = &self.idx.msgs[m];
                    let (src, dst) = (msg.src, msg.dst);
                    let (Some(so), Some(doo)) = (self.asg.bindings[src], self.asg.bindings[dst])
                    else {
                        continue;
                    };
                    let src_tile = self.idx.tasks[src].options[so].tile;
                    let dst_tile = self.idx.tasks[dst].options[doo].tile;
                    if src_tile == dst_tile {
                        self.asg.routes[m].complete = true;
                        self.frames[fi].undo.push(StructOp::CompleteRoute { msg: m });
                        let w_src = self.idx.tasks[src].options[so].wcet as i64;
                        self.post(self.asg.task_vars[src], self.asg.task_vars[dst], -w_src, level)?;
                    }
                }
                Ok(())
            }
            (DecisionPoint::Hop { msg }, Alt::Link { to }) => {
                let info = &self.idx.msgs[msg];
                let hop_idx = self.asg.routes[msg].hops.len();
                let var = self.dl.add_var(format!("{}#{}", info.id, hop_idx));
                let delay = (info.size * self.idx.link_delay) as i64;
                let prev = self.asg.routes[msg].hops.last().map(|h| h.var);
                self.asg.routes[msg].hops.push(Hop { to, var, level });
                self.frames[fi].undo.push(StructOp::PushHop { msg });
                // Hop window 0 <= h <= period - delay; the chain into the
                // destination implies an even tighter upper bound, but the
                // explicit window keeps link-pair phase domains finite on
                // the hop's own account.
                self.post(self.asg.origin, var, 0, level)?;
                let period = self.idx.apps[info.app].period as i64;
                self.post(var, self.asg.origin, period - delay, level)?;
                match prev {
                    None => {
                        let src = info.src;
                        let so = self.asg.bindings[src].unwrap();
                        let w_src = self.idx.tasks[src].options[so].wcet as i64;
                        self.post(self.asg.task_vars[src], var, -w_src, level)?;
                    }
                    Some(prev_var) => {
                        self.post(prev_var, var, -delay, level)?;
                    }
                }
                let dst = info.dst;
                let dst_tile = self.idx.tasks[dst].options[self.asg.bindings[dst].unwrap()].tile;
                if to == dst_tile {
                    self.asg.routes[msg].complete = true;
                    self.frames[fi].undo.push(StructOp::CompleteRoute { msg });
                    self.post(var, self.asg.task_vars[dst], -delay, level)?;
                }
                Ok(())
            }
            (DecisionPoint::Order { pair }, Alt::Dir(dir)) => {
                self.asg.orders.push(OrderRec {
                    pair,
                    dir,
                    k: None,
                    order_level: level,
                    phase_level: None,
                });
                self.frames[fi].undo.push(StructOp::PushOrder);
                let (ja, jb) = pair_jobs(self.idx, &self.asg, &pair);
                let (first, second) = match dir {
                    Direction::Forward => (ja, jb),
                    Direction::Backward => (jb, ja),
                };
                // first + w_first <= second
                self.post(first.var, second.var, -(first.duration as i64), level)?;
                Ok(())
            }
            (DecisionPoint::Phase { order_idx }, Alt::K(k)) => {
                let rec = &self.asg.orders[order_idx];
                let (pair, dir) = (rec.pair, rec.dir);
                self.asg.orders[order_idx].k = Some(k);
                self.asg.orders[order_idx].phase_level = Some(level);
                self.frames[fi].undo.push(StructOp::SetPhase { order_idx });
                let (ja, jb) = pair_jobs(self.idx, &self.asg, &pair);
                let (first, second) = match dir {
                    Direction::Forward => (ja, jb),
                    Direction::Backward => (jb, ja),
                };
                let g = gcd(first.period, second.period) as i64;
                let (w_f, w_s) = (first.duration as i64, second.duration as i64);
                // w_f + k*g <= second - first <= g - w_s + k*g
                self.post(first.var, second.var, -(w_f + k * g), level)?;
                self.post(second.var, first.var, g - w_s + k * g, level)?;
                Ok(())
            }
            _ => unreachable!("alternative kind matches decision point"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_spec, Specification};

    fn keep(_: &Assignment) -> Verdict {
        Verdict::Keep
    }

    pub(crate) fn spec_from(text: &str) -> (Specification, SpecIndex) {
        let spec = load_spec(text).unwrap();
        let idx = SpecIndex::build(&spec).unwrap();
        (spec, idx)
    }

    fn single_task() -> &'static str {
        r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":2,"staticEnergy":5,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t0"}], "messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":4,"dynEnergy":3}]
        }"#
    }

    #[test]
    fn single_task_yields_one_solution() {
        let (_spec, idx) = spec_from(single_task());
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(sol) => {
                assert_eq!(sol.bindings, vec![0]);
                assert_eq!(sol.task_starts, vec![0]);
                assert_eq!(sol.objectives.components(), &[2, 8, 4]);
            }
            other => panic!("expected solution, got {other:?}"),
        }
        assert!(matches!(state.solve_next(&mut keep), SolveOutcome::Exhausted));
    }

    #[test]
    fn overloaded_tile_is_exhausted() {
        // periods 4 and 6 share gcd 2; wcet 2 + 1 > 2, so co-mapping on the
        // single tile is infeasible.
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [
                {"id":"a0","period":4,"tasks":[{"id":"t0"}],"messages":[]},
                {"id":"a1","period":6,"tasks":[{"id":"t1"}],"messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":2,"dynEnergy":0},
                         {"task":"t1","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        assert!(matches!(state.solve_next(&mut keep), SolveOutcome::Exhausted));
    }

    #[test]
    fn two_task_chain_earliest_schedule() {
        // t1 -> m -> t2, wcet(t1) = 2, one hop of delay 3: starts 0 / 2 / 5,
        // and app latency 7 with wcet(t2) = 2.
        let text = r#"{
            "platform": {"width":2, "height":1, "linkDelay":3,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"},
                         {"id":"T1","x":1,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t1"},{"id":"t2"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":2,"dynEnergy":0},
                         {"task":"t2","tile":"T1","wcet":2,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(sol) => {
                assert_eq!(sol.schedule["t1"], 0);
                assert_eq!(sol.schedule["m0#0"], 2);
                assert_eq!(sol.schedule["t2"], 5);
                assert_eq!(sol.objectives.components()[2], 7);
            }
            other => panic!("expected solution, got {other:?}"),
        }
        assert!(matches!(state.solve_next(&mut keep), SolveOutcome::Exhausted));
    }

    #[test]
    fn gcd_overlap_examples() {
        // g = 2, residue 0 < 1: violation; brute force sees overlap at t=8.
        assert!(!gcd_overlap_ok(0, 1, 4, 2, 1, 6));
        // residue 1 within [1, 1]: ok.
        assert!(gcd_overlap_ok(0, 1, 4, 1, 1, 6));
        // swapping roles preserves the verdict
        assert!(gcd_overlap_ok(1, 1, 6, 0, 1, 4));
    }

    #[test]
    fn resource_pair_combinatorics() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t0"},{"id":"t1"},{"id":"t2"}],"messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t1","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t2","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(_) => {
                assert_eq!(resource_pairs(&idx, state.assignment()).len(), 3);
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn route_extension_on_mesh() {
        let text = r#"{
            "platform": {"width":2, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"},
                         {"id":"T1","x":1,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t1"},{"id":"t2"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t2","tile":"T1","wcet":1,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        let mut asg = state.assignment().clone();
        asg.bindings[0] = Some(0);
        asg.bindings[1] = Some(0);
        let links = route_extend(&idx, &asg, 0);
        assert_eq!(links, vec![(0, 1)]);
    }

    #[test]
    fn same_tile_message_completes_without_hops() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t1"},{"id":"t2"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t2","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(sol) => {
                assert_eq!(sol.routes[0], vec![0]);
                assert!(sol.schedule["t2"] >= sol.schedule["t1"] + 1);
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn window_forces_zero_start_when_wcet_equals_period() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":4,"tasks":[{"id":"t0"}],"messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":4,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(sol) => assert_eq!(sol.task_starts, vec![0]),
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn empty_application_set_yields_empty_solution() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [],
            "mappings": []
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        match state.solve_next(&mut keep) {
            SolveOutcome::Solution(sol) => {
                assert_eq!(sol.objectives.components(), &[0, 0, 0]);
            }
            other => panic!("expected solution, got {other:?}"),
        }
        assert!(matches!(state.solve_next(&mut keep), SolveOutcome::Exhausted));
    }

    #[test]
    fn co_located_pair_enumerates_both_directions() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":4,
                "tasks":[{"id":"t0"},{"id":"t1"}],"messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t1","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        let (_spec, idx) = spec_from(text);
        let mut state = SearchState::new(&idx, ObjectiveSpec::all(), 1);
        let mut starts = Vec::new();
        loop {
            match state.solve_next(&mut keep) {
                SolveOutcome::Solution(sol) => starts.push(sol.task_starts.clone()),
                SolveOutcome::Exhausted => break,
                SolveOutcome::Interrupted => unreachable!(),
            }
        }
        starts.sort();
        // Both interleavings, each at its earliest phase window.
        assert_eq!(starts, vec![vec![0, 1], vec![1, 0]]);
    }
}
