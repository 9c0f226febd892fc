//! Seeded synthetic benchmark generator: series-parallel applications on a
//! mesh platform with per-type tile attributes and per-task mapping options.
//!
//! All randomness comes from SplitMix64 so seeds reproduce across
//! implementations; draws occur in a fixed order (tile types and type
//! attributes, then per application its period, series-parallel shape and
//! message sizes, then per task its compatible type, option tiles, wcets
//! and dynamic energies).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_spec, Application, MappingOption, Message, Platform, Specification, SpecIndex, TaskDecl, Tile, TimeUnit};
use crate::objectives::{Objective, ObjectiveSpec};
use crate::search::{SearchState, SolveOutcome, Verdict};

/// SplitMix64 (Steele, Lea & Flood 2014): `z = (s += 0x9E3779B97F4A7C15)`,
/// then two xor-shift-multiply mixing steps.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, bound)` by rejection of the biased tail.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// Uniform in the inclusive range.
    pub fn next_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        lo + self.next_below(hi - lo + 1)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: u64,
    pub max: u64,
}

impl IntRange {
    pub fn new(min: u64, max: u64) -> Self {
        IntRange { min, max }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GenParams {
    pub seed: u64,
    pub n_tasks_per_app: u64,
    pub n_apps: u64,
    pub p_parallel: f64,
    /// Harmonic set: every period divides the maximum.
    pub period_set: Vec<TimeUnit>,
    pub mesh_w: u32,
    pub mesh_h: u32,
    pub options_per_task: u64,
    pub wcet_range: IntRange,
    pub dyn_range: IntRange,
    pub size_range: IntRange,
    pub area_range: IntRange,
    pub static_range: IntRange,
    pub tile_types: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            n_tasks_per_app: 4,
            n_apps: 1,
            p_parallel: 0.5,
            period_set: vec![8, 16],
            mesh_w: 2,
            mesh_h: 2,
            options_per_task: 2,
            wcet_range: IntRange::new(1, 3),
            dyn_range: IntRange::new(1, 5),
            size_range: IntRange::new(1, 2),
            area_range: IntRange::new(1, 4),
            static_range: IntRange::new(0, 3),
            tile_types: 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("{0}")]
    Invalid(String),
}

fn err(msg: impl Into<String>) -> ParamError {
    ParamError::Invalid(msg.into())
}

impl GenParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_tasks_per_app == 0 {
            return Err(err("tasks per application must be positive"));
        }
        if self.n_apps == 0 {
            return Err(err("application count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_parallel) {
            return Err(err("p_parallel must lie in [0, 1]"));
        }
        if self.mesh_w == 0 || self.mesh_h == 0 {
            return Err(err("mesh dimensions must be positive"));
        }
        if self.options_per_task == 0 {
            return Err(err("options per task must be positive"));
        }
        if self.tile_types == 0 {
            return Err(err("tile type count must be positive"));
        }
        if self.period_set.is_empty() || self.period_set.contains(&0) {
            return Err(err("period set must be non-empty and positive"));
        }
        let max = *self.period_set.iter().max().unwrap();
        if self.period_set.iter().any(|&p| max % p != 0) {
            return Err(err("period set must be harmonic (each divides the maximum)"));
        }
        for (name, r) in [
            ("wcet", self.wcet_range),
            ("size", self.size_range),
            ("area", self.area_range),
        ] {
            if r.min > r.max || r.min == 0 {
                return Err(err(format!("{name} range must be non-empty with min >= 1")));
            }
        }
        for (name, r) in [("dyn", self.dyn_range), ("static", self.static_range)] {
            if r.min > r.max {
                return Err(err(format!("{name} range must be non-empty")));
            }
        }
        let min_period = *self.period_set.iter().min().unwrap();
        if self.wcet_range.min > min_period {
            return Err(err("minimal wcet exceeds the smallest period"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Series-parallel task graphs
// ---------------------------------------------------------------------------

/// Series-parallel shape: leaves are single tasks, series composes
/// sequentially, parallel materializes as a fork-join with fresh tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpTree {
    Leaf,
    Series(Box<SpTree>, Box<SpTree>),
    Parallel(Box<SpTree>, Box<SpTree>),
}

impl SpTree {
    /// Tasks of the materialized DAG: leaf 1, series a+b, parallel a+b+2
    /// (fork and join tasks).
    pub fn task_count(&self) -> u64 {
        match self {
            SpTree::Leaf => 1,
            SpTree::Series(a, b) => a.task_count() + b.task_count(),
            SpTree::Parallel(a, b) => a.task_count() + b.task_count() + 2,
        }
    }

    /// Maximum antichain width of the materialized DAG.
    pub fn width(&self) -> u64 {
        match self {
            SpTree::Leaf => 1,
            SpTree::Series(a, b) => a.width().max(b.width()),
            SpTree::Parallel(a, b) => a.width() + b.width(),
        }
    }
}

/// A DAG over task indices `0..n`, with edges in creation order.
#[derive(Debug, Clone)]
pub struct TaskDag {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Grows a series-parallel tree by expanding uniformly chosen leaves until
/// the materialized DAG has exactly `n_tasks` tasks. A parallel expansion
/// adds three tasks, so near the budget series expansions are forced.
pub fn sp_tree(n_tasks: u64, p_parallel: f64, rng: &mut SplitMix64) -> SpTree {
    assert!(n_tasks >= 1);
    let mut tree = SpTree::Leaf;
    let mut count = 1;
    while count < n_tasks {
        let leaves = count_leaves(&tree);
        let pick = rng.next_below(leaves);
        let parallel_ok = count + 3 <= n_tasks;
        let parallel = parallel_ok && rng.next_f64() < p_parallel;
        let mut cursor = pick as i64;
        expand_leaf(&mut tree, &mut cursor, parallel);
        count += if parallel { 3 } else { 1 };
    }
    tree
}

fn count_leaves(tree: &SpTree) -> u64 {
    match tree {
        SpTree::Leaf => 1,
        SpTree::Series(a, b) | SpTree::Parallel(a, b) => count_leaves(a) + count_leaves(b),
    }
}

/// Replaces the `target`-th leaf (in-order) by a series or parallel pair.
/// The cursor counts down across leaves; it goes negative once expanded.
fn expand_leaf(tree: &mut SpTree, cursor: &mut i64, parallel: bool) {
    if *cursor < 0 {
        return;
    }
    match tree {
        SpTree::Leaf => {
            if *cursor == 0 {
                *tree = if parallel {
                    SpTree::Parallel(Box::new(SpTree::Leaf), Box::new(SpTree::Leaf))
                } else {
                    SpTree::Series(Box::new(SpTree::Leaf), Box::new(SpTree::Leaf))
                };
            }
            *cursor -= 1;
        }
        SpTree::Series(a, b) | SpTree::Parallel(a, b) => {
            expand_leaf(a, cursor, parallel);
            expand_leaf(b, cursor, parallel);
        }
    }
}

/// Materializes the tree: series composes sink -> source, parallel inserts
/// fork and join tasks around both branches. The result has a single source
/// and a single sink.
pub fn materialize(tree: &SpTree) -> TaskDag {
    let mut dag = TaskDag { n: 0, edges: Vec::new() };
    fn build(tree: &SpTree, dag: &mut TaskDag) -> (usize, usize) {
        match tree {
            SpTree::Leaf => {
                let t = dag.n;
                dag.n += 1;
                (t, t)
            }
            SpTree::Series(a, b) => {
                let (src_a, sink_a) = build(a, dag);
                let (src_b, sink_b) = build(b, dag);
                dag.edges.push((sink_a, src_b));
                (src_a, sink_b)
            }
            SpTree::Parallel(a, b) => {
                let fork = dag.n;
                dag.n += 1;
                let (src_a, sink_a) = build(a, dag);
                let (src_b, sink_b) = build(b, dag);
                let join = dag.n;
                dag.n += 1;
                dag.edges.push((fork, src_a));
                dag.edges.push((fork, src_b));
                dag.edges.push((sink_a, join));
                dag.edges.push((sink_b, join));
                (fork, join)
            }
        }
    }
    build(tree, &mut dag);
    dag
}

/// Convenience wrapper producing the materialized DAG directly.
pub fn sp_graph(n_tasks: u64, p_parallel: f64, rng: &mut SplitMix64) -> TaskDag {
    materialize(&sp_tree(n_tasks, p_parallel, rng))
}

// ---------------------------------------------------------------------------
// Specification generation
// ---------------------------------------------------------------------------

/// Deterministic in the seed; the output always passes validation.
pub fn generate(params: &GenParams) -> Result<Specification, ParamError> {
    params.validate()?;
    let mut rng = SplitMix64::new(params.seed);

    // Platform: per-type attributes first, then a type per tile.
    let types: Vec<(u64, u64)> = (0..params.tile_types)
        .map(|_| {
            let area = rng.next_range(params.area_range.min, params.area_range.max);
            let stat = rng.next_range(params.static_range.min, params.static_range.max);
            (area, stat)
        })
        .collect();
    let n_tiles = params.mesh_w as u64 * params.mesh_h as u64;
    let mut tiles = Vec::with_capacity(n_tiles as usize);
    let mut tiles_of_type: Vec<Vec<usize>> = vec![Vec::new(); params.tile_types as usize];
    for i in 0..n_tiles {
        let ty = rng.next_below(params.tile_types) as usize;
        let x = (i % params.mesh_w as u64) as u32;
        let y = (i / params.mesh_w as u64) as u32;
        tiles_of_type[ty].push(i as usize);
        tiles.push(Tile {
            id: format!("T{x}_{y}"),
            x,
            y,
            area: types[ty].0,
            static_energy: types[ty].1,
            type_tag: format!("type{ty}"),
        });
    }
    let eligible: Vec<usize> = (0..params.tile_types as usize)
        .filter(|&ty| tiles_of_type[ty].len() as u64 >= params.options_per_task)
        .collect();
    if eligible.is_empty() {
        return Err(err("no tile type offers enough tiles for the requested options per task"));
    }

    // Applications: period, shape, message sizes.
    let mut applications = Vec::new();
    let mut dags = Vec::new();
    for ai in 0..params.n_apps {
        let period =
            params.period_set[rng.next_below(params.period_set.len() as u64) as usize];
        let dag = sp_graph(params.n_tasks_per_app, params.p_parallel, &mut rng);
        let tasks: Vec<TaskDecl> =
            (0..dag.n).map(|t| TaskDecl { id: format!("a{ai}_t{t}") }).collect();
        let messages: Vec<Message> = dag
            .edges
            .iter()
            .enumerate()
            .map(|(mi, &(src, dst))| Message {
                id: format!("a{ai}_m{mi}"),
                src: format!("a{ai}_t{src}"),
                dst: format!("a{ai}_t{dst}"),
                size: rng.next_range(params.size_range.min, params.size_range.max),
            })
            .collect();
        applications.push(Application { id: format!("a{ai}"), period, tasks, messages });
        dags.push(dag);
    }

    // Mapping options: a compatible type per task, then distinct tiles of
    // that type with drawn wcet and dynamic energy.
    let mut mappings = Vec::new();
    for (ai, app) in applications.iter().enumerate() {
        for t in 0..dags[ai].n {
            let ty = eligible[rng.next_below(eligible.len() as u64) as usize];
            let pool = &tiles_of_type[ty];
            // Partial Fisher-Yates over a copy of the type's tile list.
            let mut pick = pool.clone();
            for opt in 0..params.options_per_task as usize {
                let j = opt + rng.next_below((pick.len() - opt) as u64) as usize;
                pick.swap(opt, j);
                let wcet_hi = params.wcet_range.max.min(app.period);
                let wcet = rng.next_range(params.wcet_range.min, wcet_hi);
                let dyn_energy = rng.next_range(params.dyn_range.min, params.dyn_range.max);
                mappings.push(MappingOption {
                    task: format!("a{ai}_t{t}"),
                    tile: tiles[pick[opt]].id.clone(),
                    wcet,
                    dyn_energy,
                });
            }
        }
    }

    let spec = Specification {
        platform: Platform {
            width: params.mesh_w,
            height: params.mesh_h,
            link_delay: 1,
            tiles,
        },
        applications,
        mappings,
    };
    debug_assert!(validate_spec(&spec).is_empty());
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unknown,
}

/// First-solution probe: latency-only search, stopping at the first feasible
/// solution or the timeout.
pub fn check_feasible(spec: &Specification, timeout_ms: u64) -> Feasibility {
    let Ok(idx) = SpecIndex::build(spec) else {
        return Feasibility::Infeasible;
    };
    let objectives = ObjectiveSpec::new(vec![Objective::Latency]).expect("non-empty");
    let mut engine = SearchState::new(&idx, objectives, 1);
    if timeout_ms > 0 {
        engine.set_deadline(Some(
            std::time::Instant::now() + std::time::Duration::from_millis(timeout_ms),
        ));
    }
    let mut keep = |_: &crate::search::Assignment| Verdict::Keep;
    match engine.solve_next(&mut keep) {
        SolveOutcome::Solution(_) => Feasibility::Feasible,
        SolveOutcome::Exhausted => Feasibility::Infeasible,
        SolveOutcome::Interrupted => Feasibility::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::serialize_spec;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 1234567 (SplitMix64 reference sequence).
        let mut rng = SplitMix64::new(1234567);
        let first = rng.next_u64();
        let mut rng2 = SplitMix64::new(1234567);
        assert_eq!(first, rng2.next_u64());
        assert_ne!(rng.next_u64(), first);
    }

    #[test]
    fn single_task_app_has_no_messages() {
        let params = GenParams { n_tasks_per_app: 1, ..GenParams::default() };
        let spec = generate(&params).unwrap();
        assert_eq!(spec.applications[0].tasks.len(), 1);
        assert!(spec.applications[0].messages.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let params = GenParams { seed: 42, ..GenParams::default() };
        let a = serialize_spec(&generate(&params).unwrap());
        let b = serialize_spec(&generate(&params).unwrap());
        assert_eq!(a, b);
        let c = serialize_spec(&generate(&GenParams { seed: 43, ..params }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn pure_series_yields_chain() {
        let params = GenParams { n_tasks_per_app: 5, p_parallel: 0.0, ..GenParams::default() };
        let spec = generate(&params).unwrap();
        let app = &spec.applications[0];
        assert_eq!(app.tasks.len(), 5);
        assert_eq!(app.messages.len(), 4);
        // A chain: every task has at most one predecessor and successor.
        for t in &app.tasks {
            assert!(app.messages.iter().filter(|m| m.src == t.id).count() <= 1);
            assert!(app.messages.iter().filter(|m| m.dst == t.id).count() <= 1);
        }
    }

    #[test]
    fn pure_parallel_four_tasks_is_fork_join() {
        let mut rng = SplitMix64::new(7);
        let tree = sp_tree(4, 1.0, &mut rng);
        assert_eq!(tree.task_count(), 4);
        assert_eq!(tree.width(), 2);
        let dag = materialize(&tree);
        assert_eq!(dag.n, 4);
        assert_eq!(dag.edges.len(), 4);
        let sources: Vec<usize> =
            (0..dag.n).filter(|&t| dag.edges.iter().all(|&(_, d)| d != t)).collect();
        let sinks: Vec<usize> =
            (0..dag.n).filter(|&t| dag.edges.iter().all(|&(s, _)| s != t)).collect();
        assert_eq!(sources.len(), 1);
        assert_eq!(sinks.len(), 1);
    }

    #[test]
    fn generated_specs_validate_cleanly() {
        for seed in 0..25 {
            let params = GenParams { seed, n_apps: 2, ..GenParams::default() };
            let spec = generate(&params).unwrap();
            assert!(validate_spec(&spec).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn feasibility_probe() {
        let params = GenParams { n_tasks_per_app: 2, ..GenParams::default() };
        let spec = generate(&params).unwrap();
        assert_eq!(check_feasible(&spec, 0), Feasibility::Feasible);

        // Two heavy tasks on a single tile: wa + wb > gcd of periods.
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [
                {"id":"a0","period":4,"tasks":[{"id":"t0"}],"messages":[]},
                {"id":"a1","period":6,"tasks":[{"id":"t1"}],"messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":2,"dynEnergy":0},
                         {"task":"t1","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        let spec = crate::model::load_spec(text).unwrap();
        assert_eq!(check_feasible(&spec, 0), Feasibility::Infeasible);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = GenParams { period_set: vec![4, 6], ..GenParams::default() };
        assert!(generate(&bad).is_err());
        let bad = GenParams { mesh_w: 0, ..GenParams::default() };
        assert!(generate(&bad).is_err());
        let bad = GenParams { p_parallel: 1.5, ..GenParams::default() };
        assert!(generate(&bad).is_err());
    }
}
