//! Post-hoc verification of emitted fronts: re-validates each solution by
//! constraint substitution and brute-force job expansion over the
//! hyperperiod, and recomputes its objective vector from scratch.
//!
//! The overlap check here deliberately avoids the gcd residue criterion used
//! inside the engine: every periodic job instance is materialized and tested
//! for pairwise overlap, so the two routes check each other.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{SpecIndex, Specification};
use crate::objectives::{Objective, ObjectiveSpec};

#[derive(Debug, Error)]
pub enum CheckError {
    /// Malformed front file or unknown entity references (exit code 3).
    #[error("front schema error: {0}")]
    Schema(String),
    /// A solution failed re-verification (exit code 1).
    #[error("verification failed: {0}")]
    Failed(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrontEntryFile {
    vector: Vec<i64>,
    bindings: BTreeMap<String, BindingFile>,
    routes: BTreeMap<String, Vec<String>>,
    schedule: BTreeMap<String, u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingFile {
    tile: String,
    option: usize,
}

/// Verifies every solution of a front file against the instance; returns the
/// number of verified solutions.
pub fn check_front(
    spec: &Specification,
    objectives: &ObjectiveSpec,
    front_text: &str,
) -> Result<usize, CheckError> {
    let idx = SpecIndex::build(spec).map_err(|e| CheckError::Schema(e.to_string()))?;
    let entries: Vec<FrontEntryFile> =
        serde_json::from_str(front_text).map_err(|e| CheckError::Schema(e.to_string()))?;
    for (i, entry) in entries.iter().enumerate() {
        check_entry(&idx, objectives, entry)
            .map_err(|e| prefix_entry(i, e))?;
    }
    Ok(entries.len())
}

fn prefix_entry(i: usize, e: CheckError) -> CheckError {
    match e {
        CheckError::Schema(m) => CheckError::Schema(format!("solution {i}: {m}")),
        CheckError::Failed(m) => CheckError::Failed(format!("solution {i}: {m}")),
    }
}

struct Resolved {
    /// Per task: option index.
    bindings: Vec<usize>,
    /// Per message: full tile path, source tile first.
    routes: Vec<Vec<usize>>,
    task_starts: Vec<u64>,
    hop_starts: Vec<Vec<u64>>,
}

fn check_entry(
    idx: &SpecIndex,
    objectives: &ObjectiveSpec,
    entry: &FrontEntryFile,
) -> Result<(), CheckError> {
    let r = resolve(idx, entry)?;
    substitute_constraints(idx, &r)?;
    expand_jobs(idx, &r)?;
    let recomputed = recompute_vector(idx, objectives, &r);
    if recomputed != entry.vector {
        return Err(CheckError::Failed(format!(
            "objective vector mismatch: recomputed {recomputed:?}, file has {:?}",
            entry.vector
        )));
    }
    Ok(())
}

fn resolve(idx: &SpecIndex, entry: &FrontEntryFile) -> Result<Resolved, CheckError> {
    let mut bindings = vec![usize::MAX; idx.tasks.len()];
    for (task_id, b) in &entry.bindings {
        let &t = idx
            .task_by_id
            .get(task_id)
            .ok_or_else(|| CheckError::Schema(format!("unknown task '{task_id}'")))?;
        let info = &idx.tasks[t];
        if b.option >= info.options.len() {
            return Err(CheckError::Schema(format!(
                "task '{task_id}' has no option #{}",
                b.option
            )));
        }
        let &tile = idx
            .tile_by_id
            .get(&b.tile)
            .ok_or_else(|| CheckError::Schema(format!("unknown tile '{}'", b.tile)))?;
        if info.options[b.option].tile != tile {
            return Err(CheckError::Failed(format!(
                "binding of '{task_id}' names tile '{}' but option #{} maps to '{}'",
                b.tile,
                b.option,
                idx.tiles[info.options[b.option].tile].id
            )));
        }
        bindings[t] = b.option;
    }
    for (t, &b) in bindings.iter().enumerate() {
        if b == usize::MAX {
            return Err(CheckError::Schema(format!("task '{}' has no binding", idx.tasks[t].id)));
        }
    }

    let mut routes = vec![Vec::new(); idx.msgs.len()];
    for (msg_id, path) in &entry.routes {
        let &m = idx
            .msg_by_id
            .get(msg_id)
            .ok_or_else(|| CheckError::Schema(format!("unknown message '{msg_id}'")))?;
        let mut tiles = Vec::with_capacity(path.len());
        for tid in path {
            let &t = idx
                .tile_by_id
                .get(tid)
                .ok_or_else(|| CheckError::Schema(format!("unknown tile '{tid}'")))?;
            tiles.push(t);
        }
        routes[m] = tiles;
    }
    for (m, route) in routes.iter().enumerate() {
        let info = &idx.msgs[m];
        if route.is_empty() {
            return Err(CheckError::Schema(format!("message '{}' has no route", info.id)));
        }
        let src_tile = idx.tasks[info.src].options[bindings[info.src]].tile;
        let dst_tile = idx.tasks[info.dst].options[bindings[info.dst]].tile;
        if route[0] != src_tile || *route.last().unwrap() != dst_tile {
            return Err(CheckError::Failed(format!(
                "route of '{}' does not connect its bound endpoints",
                info.id
            )));
        }
        let mut seen = HashSet::new();
        for w in route.windows(2) {
            if !idx.neighbors[w[0]].contains(&w[1]) {
                return Err(CheckError::Failed(format!(
                    "route of '{}' uses non-adjacent tiles",
                    info.id
                )));
            }
        }
        if !route.iter().all(|t| seen.insert(*t)) {
            return Err(CheckError::Failed(format!("route of '{}' revisits a tile", info.id)));
        }
    }

    let mut task_starts = vec![0u64; idx.tasks.len()];
    for (t, info) in idx.tasks.iter().enumerate() {
        task_starts[t] = *entry
            .schedule
            .get(&info.id)
            .ok_or_else(|| CheckError::Schema(format!("schedule misses task '{}'", info.id)))?;
    }
    let mut hop_starts = vec![Vec::new(); idx.msgs.len()];
    for (m, route) in routes.iter().enumerate() {
        for h in 0..route.len() - 1 {
            let label = format!("{}#{}", idx.msgs[m].id, h);
            let s = *entry
                .schedule
                .get(&label)
                .ok_or_else(|| CheckError::Schema(format!("schedule misses hop '{label}'")))?;
            hop_starts[m].push(s);
        }
    }
    Ok(Resolved { bindings, routes, task_starts, hop_starts })
}

/// Substitutes the schedule into every window, precedence and hop-chaining
/// constraint implied by the structure.
fn substitute_constraints(idx: &SpecIndex, r: &Resolved) -> Result<(), CheckError> {
    for (t, info) in idx.tasks.iter().enumerate() {
        let wcet = info.options[r.bindings[t]].wcet;
        let s = r.task_starts[t];
        if s + wcet > info.period {
            return Err(CheckError::Failed(format!(
                "task '{}' misses its period window (start {s}, wcet {wcet}, period {})",
                info.id, info.period
            )));
        }
    }
    for (m, info) in idx.msgs.iter().enumerate() {
        let w_src = idx.tasks[info.src].options[r.bindings[info.src]].wcet;
        let s_src = r.task_starts[info.src];
        let s_dst = r.task_starts[info.dst];
        let delay = info.size * idx.link_delay;
        let hops = &r.hop_starts[m];
        if hops.is_empty() {
            if s_src + w_src > s_dst {
                return Err(CheckError::Failed(format!(
                    "precedence violated on same-tile message '{}'",
                    info.id
                )));
            }
            continue;
        }
        if s_src + w_src > hops[0] {
            return Err(CheckError::Failed(format!(
                "message '{}' starts before its source finishes",
                info.id
            )));
        }
        for h in 1..hops.len() {
            if hops[h - 1] + delay > hops[h] {
                return Err(CheckError::Failed(format!(
                    "hop chain of message '{}' overlaps at hop {h}",
                    info.id
                )));
            }
        }
        if hops[hops.len() - 1] + delay > s_dst {
            return Err(CheckError::Failed(format!(
                "destination of message '{}' starts before the last hop arrives",
                info.id
            )));
        }
    }
    Ok(())
}

/// Expands every periodic job over the hyperperiod and checks pairwise
/// overlap per tile and per link.
fn expand_jobs(idx: &SpecIndex, r: &Resolved) -> Result<(), CheckError> {
    let hp = idx.hyperperiod;
    let mut per_tile: HashMap<usize, Vec<(u64, u64, String)>> = HashMap::new();
    for (t, info) in idx.tasks.iter().enumerate() {
        let opt = &info.options[r.bindings[t]];
        per_tile.entry(opt.tile).or_default().push((
            r.task_starts[t],
            opt.wcet,
            info.id.clone(),
        ));
        // also reuses the task entry below via period lookup
    }
    for (tile, jobs) in &per_tile {
        let mut instances = Vec::new();
        for (start, wcet, id) in jobs {
            let period = idx.tasks[idx.task_by_id[id]].period;
            let mut k = 0;
            while k * period + start < hp {
                let s = k * period + start;
                instances.push((s, s + wcet, id.clone()));
                k += 1;
            }
        }
        overlap_scan(&mut instances, &format!("tile '{}'", idx.tiles[*tile].id))?;
    }

    let mut per_link: HashMap<(usize, usize), Vec<(u64, u64, u64, String)>> = HashMap::new();
    for (m, route) in r.routes.iter().enumerate() {
        let info = &idx.msgs[m];
        let delay = info.size * idx.link_delay;
        let period = info_period(idx, m);
        for h in 0..route.len().saturating_sub(1) {
            let link = (route[h].min(route[h + 1]), route[h].max(route[h + 1]));
            per_link.entry(link).or_default().push((
                r.hop_starts[m][h],
                delay,
                period,
                format!("{}#{}", info.id, h),
            ));
        }
    }
    for (link, jobs) in &per_link {
        let mut instances = Vec::new();
        for (start, dur, period, id) in jobs {
            let mut k = 0;
            while k * period + start < hp {
                let s = k * period + start;
                instances.push((s, s + dur, id.clone()));
                k += 1;
            }
        }
        let name = format!(
            "link '{}'-'{}'",
            idx.tiles[link.0].id, idx.tiles[link.1].id
        );
        overlap_scan(&mut instances, &name)?;
    }
    Ok(())
}

fn info_period(idx: &SpecIndex, m: usize) -> u64 {
    idx.apps[idx.msgs[m].app].period
}

fn overlap_scan(instances: &mut [(u64, u64, String)], resource: &str) -> Result<(), CheckError> {
    instances.sort();
    for w in instances.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(CheckError::Failed(format!(
                "{resource}: '{}' [{}, {}) overlaps '{}' [{}, {})",
                w[0].2, w[0].0, w[0].1, w[1].2, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

/// Independent recomputation of the objective vector from structure and
/// schedule.
fn recompute_vector(idx: &SpecIndex, objectives: &ObjectiveSpec, r: &Resolved) -> Vec<i64> {
    let mut allocated = vec![false; idx.tiles.len()];
    for (t, &b) in r.bindings.iter().enumerate() {
        allocated[idx.tasks[t].options[b].tile] = true;
    }
    for route in &r.routes {
        for &tile in route {
            allocated[tile] = true;
        }
    }
    objectives
        .enabled
        .iter()
        .map(|obj| match obj {
            Objective::Area => (0..idx.tiles.len())
                .filter(|&t| allocated[t])
                .map(|t| idx.tiles[t].area)
                .sum::<u64>() as i64,
            Objective::Energy => {
                let stat: u64 = (0..idx.tiles.len())
                    .filter(|&t| allocated[t])
                    .map(|t| idx.tiles[t].static_energy)
                    .sum();
                let dynamic: u64 = (0..idx.tasks.len())
                    .map(|t| {
                        idx.executions(t) * idx.tasks[t].options[r.bindings[t]].dyn_energy
                    })
                    .sum();
                (stat + dynamic) as i64
            }
            Objective::Latency => {
                let mut worst = 0u64;
                for app in &idx.apps {
                    if app.tasks.is_empty() {
                        continue;
                    }
                    let mut lo = u64::MAX;
                    let mut hi = 0u64;
                    for &t in &app.tasks {
                        let wcet = idx.tasks[t].options[r.bindings[t]].wcet;
                        lo = lo.min(r.task_starts[t]);
                        hi = hi.max(r.task_starts[t] + wcet);
                    }
                    worst = worst.max(hi - lo);
                }
                worst as i64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::{explore, front_json, ExplorationConfig, Strategy};
    use crate::model::load_spec;

    fn chain_spec() -> Specification {
        load_spec(
            r#"{
            "platform": {"width":2, "height":1, "linkDelay":3,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"},
                         {"id":"T1","x":1,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t1"},{"id":"t2"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":2,"dynEnergy":0},
                         {"task":"t2","tile":"T1","wcet":2,"dynEnergy":0}]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn emitted_front_verifies() {
        let spec = chain_spec();
        let cfg = ExplorationConfig::new(Strategy::S3, ObjectiveSpec::all());
        let run = explore(&spec, &cfg).unwrap();
        let idx = SpecIndex::build(&spec).unwrap();
        let text = serde_json::to_string(&front_json(&idx, &run.front)).unwrap();
        assert_eq!(check_front(&spec, &ObjectiveSpec::all(), &text).unwrap(), run.front.len());
    }

    #[test]
    fn tampered_start_time_is_caught() {
        let spec = chain_spec();
        let cfg = ExplorationConfig::new(Strategy::S3, ObjectiveSpec::all());
        let run = explore(&spec, &cfg).unwrap();
        let idx = SpecIndex::build(&spec).unwrap();
        let mut value = front_json(&idx, &run.front);
        // Pull t2 before the message arrives.
        value[0]["schedule"]["t2"] = serde_json::json!(1);
        let text = serde_json::to_string(&value).unwrap();
        match check_front(&spec, &ObjectiveSpec::all(), &text) {
            Err(CheckError::Failed(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_task_is_a_schema_error() {
        let spec = chain_spec();
        let text = r#"[{"vector":[1,1,1],
            "bindings":{"ghost":{"tile":"T0","option":0}},
            "routes":{}, "schedule":{}}]"#;
        match check_front(&spec, &ObjectiveSpec::all(), text) {
            Err(CheckError::Schema(_)) => {}
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
