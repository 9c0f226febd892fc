//! Anytime multi-objective exploration: four strategies over the search
//! engine, wall-clock snapshotting, and greedy diverse subset selection.
//!
//! - S1: sequential branch and bound; each accepted complete solution must
//!   dominate the incumbent, confirmed optima block future solutions, and
//!   the search restarts until no incomparable solution remains.
//! - S2: the same scheme, with the improvement and blocking predicates
//!   applied to partial assignments through objective under-estimates.
//! - S3: a single breadth-style enumeration pass keeping every nondominated
//!   solution in an archive; with estimation on, partial assignments whose
//!   under-estimate is already dominated are pruned.
//! - S4: two-objective lexicographic corner scheme; extreme optima first,
//!   then lexicographic descents in the shrinking rectangle between them.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::metrics::{pairwise_distance, DistanceKind, MetricError};
use crate::model::{LoadError, SpecIndex, Specification};
use crate::objectives::{self, ObjectiveSpec, ObjectiveVector};
use crate::pareto::{make_archive, ArchiveKind, CheckOutcome, ParetoArchive, Point};
use crate::search::{Assignment, Counters, SearchState, SolveOutcome, Solution, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    S1,
    S2,
    S3,
    S4,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s1" => Ok(Strategy::S1),
            "s2" => Ok(Strategy::S2),
            "s3" => Ok(Strategy::S3),
            "s4" => Ok(Strategy::S4),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExplorationConfig {
    pub strategy: Strategy,
    pub objectives: ObjectiveSpec,
    pub archive: ArchiveKind,
    pub estimation: bool,
    /// 0 disables the timeout.
    pub timeout_ms: u64,
    pub seed: u64,
    /// Decisions between theory/dominance checks on partial assignments.
    pub check_every: u32,
    /// 0 disables wall-clock snapshots; archive changes always snapshot.
    pub snapshot_every_ms: u64,
}

impl ExplorationConfig {
    pub fn new(strategy: Strategy, objectives: ObjectiveSpec) -> Self {
        ExplorationConfig {
            strategy,
            objectives,
            archive: ArchiveKind::List,
            estimation: true,
            timeout_ms: 0,
            seed: 0,
            check_every: 1,
            snapshot_every_ms: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid specification: {0}")]
    Spec(#[from] LoadError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub elapsed_ms: u64,
    pub archive: Vec<ObjectiveVector>,
    pub counts: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    Timeout,
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct FrontEntry {
    pub vector: ObjectiveVector,
    pub solution: Solution,
}

#[derive(Debug)]
pub struct ExplorationRun {
    pub config: ExplorationConfig,
    pub front: Vec<FrontEntry>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub counters: Counters,
}

impl ExplorationRun {
    pub fn front_vectors(&self) -> Vec<ObjectiveVector> {
        self.front.iter().map(|e| e.vector.clone()).collect()
    }
}

/// Explores the design space of `spec` under `config`. With no timeout the
/// run is deterministic and terminates with the exact Pareto front.
pub fn explore(spec: &Specification, config: &ExplorationConfig) -> Result<ExplorationRun, ExploreError> {
    let idx = SpecIndex::build(spec)?;
    explore_indexed(&idx, config, None)
}

pub fn explore_indexed(
    idx: &SpecIndex,
    config: &ExplorationConfig,
    stop: Option<Arc<AtomicBool>>,
) -> Result<ExplorationRun, ExploreError> {
    if config.check_every == 0 {
        return Err(ExploreError::Config("check_every must be positive".into()));
    }
    if config.objectives.is_empty() {
        return Err(ExploreError::Config("objective set must not be empty".into()));
    }
    if config.strategy == Strategy::S4 && config.objectives.len() != 2 {
        return Err(ExploreError::Config("s4 requires exactly 2 objectives".into()));
    }
    let mut ctx = RunCtx::new(idx, config, stop);
    match config.strategy {
        Strategy::S1 => run_incumbent_scheme(&mut ctx, false),
        Strategy::S2 => run_incumbent_scheme(&mut ctx, config.estimation),
        Strategy::S3 => run_breadth(&mut ctx),
        Strategy::S4 => run_lexicographic(&mut ctx),
    }
    Ok(ctx.finish())
}

struct RunCtx<'a> {
    idx: &'a SpecIndex,
    cfg: &'a ExplorationConfig,
    start: Instant,
    deadline: Option<Instant>,
    stop: Option<Arc<AtomicBool>>,
    archive: Box<dyn ParetoArchive>,
    solutions: Vec<Solution>,
    snapshots: Vec<Snapshot>,
    last_snapshot: Instant,
    acc: Counters,
    termination: Termination,
}

impl<'a> RunCtx<'a> {
    fn new(idx: &'a SpecIndex, cfg: &'a ExplorationConfig, stop: Option<Arc<AtomicBool>>) -> Self {
        let start = Instant::now();
        RunCtx {
            idx,
            cfg,
            start,
            deadline: (cfg.timeout_ms > 0)
                .then(|| start + Duration::from_millis(cfg.timeout_ms)),
            stop,
            archive: make_archive(cfg.archive),
            solutions: Vec::new(),
            snapshots: Vec::new(),
            last_snapshot: start,
            acc: Counters::default(),
            termination: Termination::Completed,
        }
    }

    fn fresh_engine(&self) -> SearchState<'a> {
        let mut engine =
            SearchState::new(self.idx, self.cfg.objectives.clone(), self.cfg.check_every);
        engine.set_deadline(self.deadline);
        engine.set_stop_flag(self.stop.clone());
        engine
    }

    fn counts(&self, engine: &SearchState) -> Counters {
        add_counters(self.acc, engine.counters())
    }

    /// Marks the run as timed out or externally interrupted.
    fn record_interrupt(&mut self) {
        let timed_out = self.deadline.is_some_and(|d| Instant::now() >= d);
        self.termination = if timed_out { Termination::Timeout } else { Termination::Interrupted };
    }

    fn snapshot(&mut self, counts: Counters, extra: Option<&ObjectiveVector>) {
        let mut vectors = self.archive.vectors();
        if let Some(v) = extra {
            vectors.push(v.clone());
        }
        vectors.sort();
        self.snapshots.push(Snapshot {
            elapsed_ms: self.start.elapsed().as_millis() as u64,
            archive: vectors,
            counts,
        });
        self.last_snapshot = Instant::now();
    }

    fn wall_snapshot_due(&self) -> bool {
        self.cfg.snapshot_every_ms > 0
            && self.last_snapshot.elapsed() >= Duration::from_millis(self.cfg.snapshot_every_ms)
    }

    /// Inserts a solution, snapshotting on archive change; returns whether
    /// the archive accepted it.
    fn insert_solution(&mut self, sol: Solution, counts: Counters, extra: Option<&ObjectiveVector>) -> bool {
        let payload = self.solutions.len() as u64;
        let vector = sol.objectives.clone();
        let report = self
            .archive
            .insert(Point { vector, payload })
            .expect("objective arity is fixed per run");
        if report.inserted {
            self.solutions.push(sol);
            self.snapshot(counts, extra);
        }
        report.inserted
    }

    fn finish(mut self) -> ExplorationRun {
        let counts = self.acc;
        self.snapshot(counts, None);
        let mut front: Vec<FrontEntry> = self
            .archive
            .points()
            .into_iter()
            .map(|p| FrontEntry {
                vector: p.vector,
                solution: self.solutions[p.payload as usize].clone(),
            })
            .collect();
        front.sort_by(|a, b| a.vector.cmp(&b.vector));
        ExplorationRun {
            config: self.cfg.clone(),
            front,
            snapshots: self.snapshots,
            termination: self.termination,
            counters: counts,
        }
    }
}

fn add_counters(a: Counters, b: Counters) -> Counters {
    Counters {
        solutions: a.solutions + b.solutions,
        nodes: a.nodes + b.nodes,
        prunes: a.prunes + b.prunes,
        dl_conflicts: a.dl_conflicts + b.dl_conflicts,
        periodic_violations: a.periodic_violations + b.periodic_violations,
    }
}

// ---------------------------------------------------------------------------
// S1 / S2
// ---------------------------------------------------------------------------

/// Branch-and-bound descents to a Pareto optimum, blocking against confirmed
/// optima, restarted until exhaustion. With `estimate` the improvement and
/// blocking predicates also prune partial assignments.
fn run_incumbent_scheme(ctx: &mut RunCtx, estimate: bool) {
    'outer: loop {
        let mut engine = ctx.fresh_engine();
        let mut incumbent: Option<Solution> = None;
        loop {
            if ctx.wall_snapshot_due() {
                let counts = ctx.counts(&engine);
                ctx.snapshot(counts, incumbent.as_ref().map(|s| &s.objectives));
            }
            let outcome = {
                let archive = &ctx.archive;
                let idx = ctx.idx;
                let objectives = &ctx.cfg.objectives;
                let inc_vec = incumbent.as_ref().map(|s| s.objectives.clone());
                let mut pruner = |a: &Assignment| -> Verdict {
                    if !estimate {
                        return Verdict::Keep;
                    }
                    let lb = objectives::under_estimate(idx, objectives, a);
                    if archive.check(&lb).expect("arity fixed") == CheckOutcome::Dominated {
                        return Verdict::Prune;
                    }
                    if let Some(iv) = &inc_vec {
                        if !lb.leq(iv) {
                            return Verdict::Prune;
                        }
                    }
                    Verdict::Keep
                };
                engine.solve_next(&mut pruner)
            };
            match outcome {
                SolveOutcome::Solution(sol) => {
                    // Blocking: must be incomparable to every confirmed optimum.
                    if ctx.archive.check(&sol.objectives).expect("arity fixed")
                        == CheckOutcome::Dominated
                    {
                        continue;
                    }
                    let improves = match &incumbent {
                        None => true,
                        Some(inc) => crate::pareto::dominates(&sol.objectives, &inc.objectives)
                            .expect("arity fixed"),
                    };
                    if improves {
                        let counts = ctx.counts(&engine);
                        ctx.snapshot(counts, Some(&sol.objectives));
                        incumbent = Some(*sol);
                    }
                }
                SolveOutcome::Exhausted => break,
                SolveOutcome::Interrupted => {
                    ctx.record_interrupt();
                    ctx.acc = ctx.counts(&engine);
                    if let Some(inc) = incumbent {
                        let counts = ctx.acc;
                        ctx.insert_solution(inc, counts, None);
                    }
                    break 'outer;
                }
            }
        }
        ctx.acc = ctx.counts(&engine);
        match incumbent {
            // No solution incomparable to the optima remains: front complete.
            None => break,
            Some(inc) => {
                let counts = ctx.acc;
                ctx.insert_solution(inc, counts, None);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// S3
// ---------------------------------------------------------------------------

fn run_breadth(ctx: &mut RunCtx) {
    let mut engine = ctx.fresh_engine();
    loop {
        if ctx.wall_snapshot_due() {
            let counts = ctx.counts(&engine);
            ctx.snapshot(counts, None);
        }
        let outcome = {
            let archive = &ctx.archive;
            let idx = ctx.idx;
            let objectives = &ctx.cfg.objectives;
            let estimate = ctx.cfg.estimation;
            let mut pruner = |a: &Assignment| -> Verdict {
                if !estimate {
                    return Verdict::Keep;
                }
                let lb = objectives::under_estimate(idx, objectives, a);
                match archive.check(&lb).expect("arity fixed") {
                    CheckOutcome::Dominated => Verdict::Prune,
                    CheckOutcome::NonDominated => Verdict::Keep,
                }
            };
            engine.solve_next(&mut pruner)
        };
        match outcome {
            SolveOutcome::Solution(sol) => {
                let counts = ctx.counts(&engine);
                ctx.insert_solution(*sol, counts, None);
            }
            SolveOutcome::Exhausted => break,
            SolveOutcome::Interrupted => {
                ctx.record_interrupt();
                break;
            }
        }
    }
    ctx.acc = ctx.counts(&engine);
}

// ---------------------------------------------------------------------------
// S4
// ---------------------------------------------------------------------------

/// Lexicographic corner scheme for two objectives: compute both extreme
/// optima, then sweep the rectangle between them with lexicographic descents
/// under shrinking upper bounds until a restricted region is infeasible.
fn run_lexicographic(ctx: &mut RunCtx) {
    let Some(x) = lexmin(ctx, 0, 1, None) else {
        return; // infeasible instance (or interrupted before any solution)
    };
    let x_vec = x.objectives.clone();
    {
        let counts = ctx.acc;
        ctx.insert_solution(x, counts, None);
    }
    if ctx.termination != Termination::Completed {
        return;
    }
    let Some(y) = lexmin(ctx, 1, 0, None) else {
        return;
    };
    let y_vec = y.objectives.clone();
    if y_vec != x_vec {
        let counts = ctx.acc;
        ctx.insert_solution(y, counts, None);
    }
    if ctx.termination != Termination::Completed {
        return;
    }
    // Remaining Pareto points lie strictly between the corners.
    let u0 = y_vec.get(0) - 1;
    let mut u1 = x_vec.get(1) - 1;
    while u0 >= x_vec.get(0) && u1 >= y_vec.get(1) {
        let Some(z) = lexmin(ctx, 0, 1, Some([u0, u1])) else {
            break; // region infeasible: the front is complete
        };
        let z_vec = z.objectives.clone();
        let counts = ctx.acc;
        ctx.insert_solution(z, counts, None);
        if ctx.termination != Termination::Completed {
            return;
        }
        u1 = z_vec.get(1) - 1;
    }
}

/// Full descent to the lexicographic minimum (objective `primary`, then
/// `secondary`) within optional upper bounds; `None` when the region holds
/// no solution or the run was interrupted.
fn lexmin(ctx: &mut RunCtx, primary: usize, secondary: usize, ub: Option<[i64; 2]>) -> Option<Solution> {
    let mut engine = ctx.fresh_engine();
    let mut incumbent: Option<Solution> = None;
    loop {
        if ctx.wall_snapshot_due() {
            let counts = ctx.counts(&engine);
            ctx.snapshot(counts, None);
        }
        let outcome = {
            let idx = ctx.idx;
            let objectives = &ctx.cfg.objectives;
            let estimate = ctx.cfg.estimation;
            let inc_vec = incumbent.as_ref().map(|s| s.objectives.clone());
            let mut pruner = |a: &Assignment| -> Verdict {
                if !estimate {
                    return Verdict::Keep;
                }
                let lb = objectives::under_estimate(idx, objectives, a);
                if let Some(u) = ub {
                    if lb.get(0) > u[0] || lb.get(1) > u[1] {
                        return Verdict::Prune;
                    }
                }
                if let Some(iv) = &inc_vec {
                    if lb.get(primary) > iv.get(primary)
                        || (lb.get(primary) == iv.get(primary)
                            && lb.get(secondary) >= iv.get(secondary))
                    {
                        return Verdict::Prune;
                    }
                }
                Verdict::Keep
            };
            engine.solve_next(&mut pruner)
        };
        match outcome {
            SolveOutcome::Solution(sol) => {
                if let Some(u) = ub {
                    if sol.objectives.get(0) > u[0] || sol.objectives.get(1) > u[1] {
                        continue;
                    }
                }
                let better = match &incumbent {
                    None => true,
                    Some(inc) => {
                        let (a, b) = (&sol.objectives, &inc.objectives);
                        a.get(primary) < b.get(primary)
                            || (a.get(primary) == b.get(primary)
                                && a.get(secondary) < b.get(secondary))
                    }
                };
                if better {
                    incumbent = Some(*sol);
                }
            }
            SolveOutcome::Exhausted => break,
            SolveOutcome::Interrupted => {
                ctx.record_interrupt();
                break;
            }
        }
    }
    ctx.acc = ctx.counts(&engine);
    incumbent
}

// ---------------------------------------------------------------------------
// Diverse subset selection
// ---------------------------------------------------------------------------

/// Greedy max-min diverse subset: seeded with the lexicographically smallest
/// objective vector, then repeatedly adding the solution maximizing the
/// minimal distance to the chosen set; ties break on solution id.
pub fn select_diverse(
    front: &[Solution],
    n: usize,
    kind: DistanceKind,
) -> Result<Vec<Solution>, MetricError> {
    assert!(n >= 1, "n must be at least 1");
    if front.len() <= n {
        return Ok(front.to_vec());
    }
    let seed = front
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.objectives.cmp(&b.objectives).then(a.id.cmp(&b.id))
        })
        .map(|(i, _)| i)
        .expect("front is non-empty");
    let mut chosen = vec![seed];
    let mut min_dist: Vec<f64> = Vec::with_capacity(front.len());
    for s in front {
        min_dist.push(pairwise_distance(s, &front[seed], kind)?);
    }
    while chosen.len() < n {
        let mut best: Option<usize> = None;
        for i in 0..front.len() {
            if chosen.contains(&i) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    min_dist[i] > min_dist[b]
                        || (min_dist[i] == min_dist[b] && front[i].id < front[b].id)
                }
            };
            if better {
                best = Some(i);
            }
        }
        let pick = best.expect("front larger than n");
        chosen.push(pick);
        for i in 0..front.len() {
            let d = pairwise_distance(&front[i], &front[pick], kind)?;
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    Ok(chosen.into_iter().map(|i| front[i].clone()).collect())
}

/// Exact snapshot log CSV, one row per snapshot.
pub fn snapshot_csv(run: &ExplorationRun) -> String {
    let mut out =
        String::from("elapsed_ms,archive_size,solutions,nodes,prunes,dl_conflicts,periodic_violations\n");
    for s in &run.snapshots {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.elapsed_ms,
            s.archive.len(),
            s.counts.solutions,
            s.counts.nodes,
            s.counts.prunes,
            s.counts.dl_conflicts,
            s.counts.periodic_violations
        ));
    }
    out
}

/// Front JSON: array of `{vector, bindings, routes, schedule}`.
pub fn front_json(idx: &SpecIndex, front: &[FrontEntry]) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = front
        .iter()
        .map(|e| {
            let sol = &e.solution;
            let bindings: serde_json::Map<String, serde_json::Value> = sol
                .bindings
                .iter()
                .enumerate()
                .map(|(t, &opt)| {
                    let info = &idx.tasks[t];
                    (
                        info.id.clone(),
                        serde_json::json!({
                            "tile": idx.tiles[info.options[opt].tile].id,
                            "option": opt,
                        }),
                    )
                })
                .collect();
            let routes: serde_json::Map<String, serde_json::Value> = sol
                .routes
                .iter()
                .enumerate()
                .map(|(m, path)| {
                    let tiles: Vec<&str> =
                        path.iter().map(|&t| idx.tiles[t].id.as_str()).collect();
                    (idx.msgs[m].id.clone(), serde_json::json!(tiles))
                })
                .collect();
            serde_json::json!({
                "vector": e.vector,
                "bindings": bindings,
                "routes": routes,
                "schedule": sol.schedule,
            })
        })
        .collect();
    serde_json::Value::Array(entries)
}
