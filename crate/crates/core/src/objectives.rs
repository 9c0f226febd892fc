//! Objective evaluation: exact area / energy / latency of complete solutions
//! and componentwise admissible under-estimates of partial assignments.
//!
//! Under-estimates never exceed the exact value of any feasible completion,
//! so pruning against them loses no Pareto-optimal design point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SpecIndex;
use crate::search::Assignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Area,
    Energy,
    Latency,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Area => write!(f, "area"),
            Objective::Energy => write!(f, "energy"),
            Objective::Latency => write!(f, "latency"),
        }
    }
}

/// Ordered set of enabled objectives, fixed for a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub enabled: Vec<Objective>,
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("objective set must not be empty")]
    Empty,
    #[error("duplicate objective '{0}'")]
    Duplicate(Objective),
    #[error("unknown objective '{0}'")]
    Unknown(String),
}

impl ObjectiveSpec {
    pub fn new(enabled: Vec<Objective>) -> Result<Self, ObjectiveError> {
        if enabled.is_empty() {
            return Err(ObjectiveError::Empty);
        }
        for (i, o) in enabled.iter().enumerate() {
            if enabled[..i].contains(o) {
                return Err(ObjectiveError::Duplicate(*o));
            }
        }
        Ok(ObjectiveSpec { enabled })
    }

    pub fn all() -> Self {
        ObjectiveSpec { enabled: vec![Objective::Area, Objective::Energy, Objective::Latency] }
    }

    /// Parses a comma-separated list such as `area,energy,latency`.
    pub fn parse(text: &str) -> Result<Self, ObjectiveError> {
        let mut enabled = Vec::new();
        for part in text.split(',').filter(|p| !p.is_empty()) {
            enabled.push(match part.trim() {
                "area" => Objective::Area,
                "energy" => Objective::Energy,
                "latency" => Objective::Latency,
                other => return Err(ObjectiveError::Unknown(other.to_string())),
            });
        }
        Self::new(enabled)
    }

    pub fn len(&self) -> usize {
        self.enabled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enabled.is_empty()
    }
}

/// Point in the enabled-objective minimization space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<i64>);

impl ObjectiveVector {
    pub fn new(components: Vec<i64>) -> Self {
        ObjectiveVector(components)
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i64 {
        self.0[i]
    }

    /// Componentwise `self <= other`.
    pub fn leq(&self, other: &ObjectiveVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Error)]
#[error("solution is incomplete: {0}")]
pub struct IncompleteSolution(pub String);

/// Raw objective values of a complete assignment; `task_starts` is the
/// earliest schedule from the difference-logic store.
pub fn evaluate(
    idx: &SpecIndex,
    objectives: &ObjectiveSpec,
    assignment: &Assignment,
    task_starts: &[u64],
) -> Result<ObjectiveVector, IncompleteSolution> {
    for (t, b) in assignment.bindings.iter().enumerate() {
        if b.is_none() {
            return Err(IncompleteSolution(format!("task {} unbound", idx.tasks[t].id)));
        }
    }
    for (m, r) in assignment.routes.iter().enumerate() {
        if !r.complete {
            return Err(IncompleteSolution(format!("message {} unrouted", idx.msgs[m].id)));
        }
    }

    let allocated = allocated_tiles(idx, assignment);
    let mut out = Vec::with_capacity(objectives.len());
    for obj in &objectives.enabled {
        let value = match obj {
            Objective::Area => allocated.iter().map(|&t| idx.tiles[t].area).sum::<u64>(),
            Objective::Energy => {
                let static_sum: u64 = allocated.iter().map(|&t| idx.tiles[t].static_energy).sum();
                let dyn_sum: u64 = (0..idx.tasks.len())
                    .map(|t| {
                        let opt = assignment.bindings[t].unwrap();
                        idx.executions(t) * idx.tasks[t].options[opt].dyn_energy
                    })
                    .sum();
                static_sum + dyn_sum
            }
            Objective::Latency => exact_latency(idx, assignment, task_starts),
        };
        out.push(value as i64);
    }
    Ok(ObjectiveVector(out))
}

/// Tiles used by a binding or traversed by a (possibly partial) route.
pub fn allocated_tiles(idx: &SpecIndex, assignment: &Assignment) -> Vec<usize> {
    let mut used = vec![false; idx.tiles.len()];
    for (t, b) in assignment.bindings.iter().enumerate() {
        if let Some(opt) = b {
            used[idx.tasks[t].options[*opt].tile] = true;
        }
    }
    for route in &assignment.routes {
        for hop in &route.hops {
            used[hop.to] = true;
        }
    }
    (0..idx.tiles.len()).filter(|&t| used[t]).collect()
}

fn exact_latency(idx: &SpecIndex, assignment: &Assignment, task_starts: &[u64]) -> u64 {
    let mut worst = 0u64;
    for app in &idx.apps {
        if app.tasks.is_empty() {
            continue;
        }
        let mut earliest = u64::MAX;
        let mut latest = 0u64;
        for &t in &app.tasks {
            let opt = assignment.bindings[t].expect("complete");
            let start = task_starts[t];
            earliest = earliest.min(start);
            latest = latest.max(start + idx.tasks[t].options[opt].wcet);
        }
        worst = worst.max(latest - earliest);
    }
    worst
}

/// Componentwise lower bound on `evaluate` over every feasible completion of
/// a (possibly partial) assignment. Contention and ordering are ignored;
/// unbound tasks take their cheapest option per component, unrouted messages
/// their minimal Manhattan hop count.
pub fn under_estimate(
    idx: &SpecIndex,
    objectives: &ObjectiveSpec,
    assignment: &Assignment,
) -> ObjectiveVector {
    let allocated = allocated_tiles(idx, assignment);
    let mut out = Vec::with_capacity(objectives.len());
    for obj in &objectives.enabled {
        let value = match obj {
            Objective::Area => allocated.iter().map(|&t| idx.tiles[t].area).sum::<u64>(),
            Objective::Energy => {
                let static_sum: u64 = allocated.iter().map(|&t| idx.tiles[t].static_energy).sum();
                let dyn_sum: u64 = (0..idx.tasks.len())
                    .map(|t| {
                        let dyn_e = match assignment.bindings[t] {
                            Some(opt) => idx.tasks[t].options[opt].dyn_energy,
                            None => idx.tasks[t]
                                .options
                                .iter()
                                .map(|o| o.dyn_energy)
                                .min()
                                .unwrap_or(0),
                        };
                        idx.executions(t) * dyn_e
                    })
                    .sum();
                static_sum + dyn_sum
            }
            Objective::Latency => latency_lower_bound(idx, assignment),
        };
        out.push(value as i64);
    }
    ObjectiveVector(out)
}

/// Contention-free critical path per application: actual wcet for bound
/// tasks, cheapest option otherwise; routed prefix plus remaining Manhattan
/// distance for each message.
fn latency_lower_bound(idx: &SpecIndex, assignment: &Assignment) -> u64 {
    let node_w = |t: usize| -> u64 {
        match assignment.bindings[t] {
            Some(opt) => idx.tasks[t].options[opt].wcet,
            None => idx.tasks[t].options.iter().map(|o| o.wcet).min().unwrap_or(0),
        }
    };
    let mut finish = vec![0u64; idx.tasks.len()];
    // topo_order is per-application topological, so one pass suffices.
    for &t in &idx.topo_order {
        let mut start = 0u64;
        for &m in &idx.tasks[t].preds {
            let src = idx.msgs[m].src;
            start = start.max(finish[src] + message_lower_bound(idx, assignment, m));
        }
        finish[t] = start + node_w(t);
    }
    let mut worst = 0u64;
    for app in &idx.apps {
        for &t in &app.tasks {
            worst = worst.max(finish[t]);
        }
    }
    worst
}

/// Lower bound on the total traversal delay of a message.
fn message_lower_bound(idx: &SpecIndex, assignment: &Assignment, m: usize) -> u64 {
    let info = &idx.msgs[m];
    let per_hop = info.size * idx.link_delay;
    let route = &assignment.routes[m];
    if route.complete {
        return route.hops.len() as u64 * per_hop;
    }
    let src_tile = assignment.bindings[info.src].map(|o| idx.tasks[info.src].options[o].tile);
    let dst_tile = assignment.bindings[info.dst].map(|o| idx.tasks[info.dst].options[o].tile);
    let hops = if !route.hops.is_empty() {
        // Route under construction: both endpoints are bound.
        let head = route.hops.last().unwrap().to;
        route.hops.len() as u64 + idx.manhattan(head, dst_tile.expect("routed implies bound"))
    } else {
        match (src_tile, dst_tile) {
            (Some(s), Some(d)) => idx.manhattan(s, d),
            (Some(s), None) => min_manhattan(idx, &[s], &option_tiles(idx, info.dst)),
            (None, Some(d)) => min_manhattan(idx, &option_tiles(idx, info.src), &[d]),
            (None, None) => min_manhattan(
                idx,
                &option_tiles(idx, info.src),
                &option_tiles(idx, info.dst),
            ),
        }
    };
    hops * per_hop
}

fn option_tiles(idx: &SpecIndex, task: usize) -> Vec<usize> {
    idx.tasks[task].options.iter().map(|o| o.tile).collect()
}

fn min_manhattan(idx: &SpecIndex, from: &[usize], to: &[usize]) -> u64 {
    let mut best = u64::MAX;
    for &f in from {
        for &t in to {
            best = best.min(idx.manhattan(f, t));
        }
    }
    if best == u64::MAX {
        0
    } else {
        best
    }
}
