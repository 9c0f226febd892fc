//! Problem instance data model: periodic task-graph applications, a 2D mesh
//! NoC platform and task-to-tile mapping options, plus validation and the
//! exact-keyed JSON serialization.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abstract time ticks. All times in the model are non-negative integers so
/// that difference-logic reasoning and the schedule oracles stay exact.
pub type TimeUnit = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tile {
    pub id: String,
    pub x: u32,
    pub y: u32,
    pub area: u64,
    #[serde(rename = "staticEnergy")]
    pub static_energy: u64,
    #[serde(rename = "type")]
    pub type_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Platform {
    pub width: u32,
    pub height: u32,
    /// Traversal cost of one link hop per payload unit.
    #[serde(rename = "linkDelay")]
    pub link_delay: TimeUnit,
    pub tiles: Vec<Tile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDecl {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Application {
    pub id: String,
    pub period: TimeUnit,
    pub tasks: Vec<TaskDecl>,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingOption {
    pub task: String,
    pub tile: String,
    pub wcet: TimeUnit,
    #[serde(rename = "dynEnergy")]
    pub dyn_energy: u64,
}

/// A complete system synthesis problem instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Specification {
    pub platform: Platform,
    pub applications: Vec<Application>,
    pub mappings: Vec<MappingOption>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(ValidationReport),
}

#[derive(Debug, Error)]
#[error("unknown tile '{0}'")]
pub struct UnknownTile(pub String);

#[derive(Debug, Error)]
#[error("hyperperiod overflows the integer range")]
pub struct OverflowError;

/// One violated invariant, naming the rule and the offending entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: String,
    pub entity: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &str, entity: impl Into<String>) {
        self.violations.push(Violation { rule: rule.to_string(), entity: entity.into() });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{} ({})", v.rule, v.entity)?;
        }
        Ok(())
    }
}

/// Parses and fully validates an instance from its JSON text.
pub fn load_spec(bytes: &str) -> Result<Specification, LoadError> {
    let spec: Specification = serde_json::from_str(bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof => {
            LoadError::Syntax(e.to_string())
        }
        _ => LoadError::Schema(e.to_string()),
    })?;
    let report = validate_spec(&spec);
    if report.is_empty() {
        Ok(spec)
    } else {
        Err(LoadError::Validation(report))
    }
}

pub fn serialize_spec(spec: &Specification) -> String {
    serde_json::to_string_pretty(spec).expect("specification serializes")
}

/// Checks every model invariant and reports all violations; the report is
/// empty iff the specification is valid.
pub fn validate_spec(spec: &Specification) -> ValidationReport {
    let mut report = ValidationReport::default();
    let p = &spec.platform;

    if p.width == 0 || p.height == 0 {
        report.push("mesh dimensions must be positive", "platform");
    }
    if p.link_delay == 0 {
        report.push("link delay must be positive", "platform");
    }
    if p.tiles.len() as u64 != p.width as u64 * p.height as u64 {
        report.push("tile count must equal width x height", "platform");
    }
    let mut coords = HashSet::new();
    let mut tile_ids = HashSet::new();
    for t in &p.tiles {
        if !tile_ids.insert(t.id.as_str()) {
            report.push("duplicate tile id", &t.id);
        }
        if t.x >= p.width || t.y >= p.height {
            report.push("tile coordinates out of mesh bounds", &t.id);
        }
        if !coords.insert((t.x, t.y)) {
            report.push("duplicate tile coordinates", &t.id);
        }
    }

    let mut task_app: HashMap<&str, &str> = HashMap::new();
    let mut task_period: HashMap<&str, TimeUnit> = HashMap::new();
    let mut app_ids = HashSet::new();
    for app in &spec.applications {
        if !app_ids.insert(app.id.as_str()) {
            report.push("duplicate application id", &app.id);
        }
        if app.period == 0 {
            report.push("application period must be positive", &app.id);
        }
        for t in &app.tasks {
            if task_app.insert(t.id.as_str(), app.id.as_str()).is_some() {
                report.push("duplicate task id", &t.id);
            }
            task_period.insert(t.id.as_str(), app.period);
        }
    }
    let mut msg_ids = HashSet::new();
    for app in &spec.applications {
        let local: HashSet<&str> = app.tasks.iter().map(|t| t.id.as_str()).collect();
        let mut succs: HashMap<&str, Vec<&str>> = HashMap::new();
        for m in &app.messages {
            if !msg_ids.insert(m.id.as_str()) {
                report.push("duplicate message id", &m.id);
            }
            if m.size == 0 {
                report.push("message size must be positive", &m.id);
            }
            if m.src == m.dst {
                report.push("message source equals destination", &m.id);
            }
            for end in [&m.src, &m.dst] {
                if !task_app.contains_key(end.as_str()) {
                    report.push("unknown task", format!("{} in {}", end, m.id));
                } else if !local.contains(end.as_str()) {
                    report.push("message endpoint outside application", format!("{} in {}", end, m.id));
                }
            }
            if local.contains(m.src.as_str()) && local.contains(m.dst.as_str()) {
                succs.entry(m.src.as_str()).or_default().push(m.dst.as_str());
            }
        }
        if has_cycle(&local, &succs) {
            report.push("cyclic task graph", &app.id);
        }
    }

    let tile_set: HashSet<&str> = p.tiles.iter().map(|t| t.id.as_str()).collect();
    let mut mapped: HashSet<&str> = HashSet::new();
    for (i, m) in spec.mappings.iter().enumerate() {
        let entity = format!("mapping #{} ({} -> {})", i, m.task, m.tile);
        match task_period.get(m.task.as_str()) {
            None => report.push("unknown task", &entity),
            Some(&period) => {
                if m.wcet == 0 {
                    report.push("wcet must be positive", &entity);
                }
                if m.wcet > period {
                    report.push("wcet exceeds period", &entity);
                }
            }
        }
        if !tile_set.contains(m.tile.as_str()) {
            report.push("unknown tile", &entity);
        }
        mapped.insert(m.task.as_str());
    }
    for app in &spec.applications {
        for t in &app.tasks {
            if !mapped.contains(t.id.as_str()) {
                report.push("unmappable task", &t.id);
            }
        }
    }

    report
}

fn has_cycle(nodes: &HashSet<&str>, succs: &HashMap<&str, Vec<&str>>) -> bool {
    // Kahn's algorithm; a leftover node means a cycle.
    let mut indeg: HashMap<&str, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for tos in succs.values() {
        for &to in tos {
            *indeg.entry(to).or_insert(0) += 1;
        }
    }
    let mut queue: Vec<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut seen = 0usize;
    while let Some(n) = queue.pop() {
        seen += 1;
        if let Some(tos) = succs.get(n) {
            for &to in tos {
                let d = indeg.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(to);
                }
            }
        }
    }
    seen != nodes.len()
}

/// Least common multiple of all application periods.
pub fn hyperperiod(spec: &Specification) -> Result<TimeUnit, OverflowError> {
    let mut acc: u64 = 1;
    for app in &spec.applications {
        acc = lcm(acc, app.period).ok_or(OverflowError)?;
    }
    Ok(acc)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd(a, b)).checked_mul(b)
}

/// Mesh-adjacent tiles of `tile` (2 to 4 of them, fewer on borders).
pub fn neighbors(platform: &Platform, tile: &str) -> Result<BTreeSet<String>, UnknownTile> {
    let t = platform
        .tiles
        .iter()
        .find(|t| t.id == tile)
        .ok_or_else(|| UnknownTile(tile.to_string()))?;
    let mut out = BTreeSet::new();
    for other in &platform.tiles {
        let dx = other.x.abs_diff(t.x);
        let dy = other.y.abs_diff(t.y);
        if dx + dy == 1 {
            out.insert(other.id.clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Compiled index
// ---------------------------------------------------------------------------

/// Stable fingerprint of a specification (FNV-1a over the canonical JSON),
/// used to reject cross-instance solution comparisons.
pub fn spec_fingerprint(spec: &Specification) -> u64 {
    let text = serde_json::to_string(spec).expect("specification serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct OptionInfo {
    pub tile: usize,
    pub wcet: TimeUnit,
    pub dyn_energy: u64,
}

#[derive(Debug, Clone)]
pub struct TaskInfo {
    pub id: String,
    pub app: usize,
    pub period: TimeUnit,
    pub options: Vec<OptionInfo>,
    /// Messages into / out of this task, by message index.
    pub preds: Vec<usize>,
    pub succs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MsgInfo {
    pub id: String,
    pub app: usize,
    pub src: usize,
    pub dst: usize,
    pub size: u64,
}

#[derive(Debug, Clone)]
pub struct AppInfo {
    pub id: String,
    pub period: TimeUnit,
    pub tasks: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TileInfo {
    pub id: String,
    pub x: u32,
    pub y: u32,
    pub area: u64,
    pub static_energy: u64,
}

/// Dense-index view of a validated specification, shared read-only by the
/// search engine, the objective evaluators and the verifier.
#[derive(Debug, Clone)]
pub struct SpecIndex {
    pub fingerprint: u64,
    pub width: u32,
    pub height: u32,
    pub link_delay: TimeUnit,
    pub tiles: Vec<TileInfo>,
    pub neighbors: Vec<Vec<usize>>,
    pub apps: Vec<AppInfo>,
    pub tasks: Vec<TaskInfo>,
    pub msgs: Vec<MsgInfo>,
    pub task_by_id: HashMap<String, usize>,
    pub tile_by_id: HashMap<String, usize>,
    pub msg_by_id: HashMap<String, usize>,
    /// Binding order: applications in file order, topological within each.
    pub topo_order: Vec<usize>,
    pub hyperperiod: TimeUnit,
}

impl SpecIndex {
    /// Compiles a specification; fails if validation or the hyperperiod
    /// computation fails.
    pub fn build(spec: &Specification) -> Result<SpecIndex, LoadError> {
        let report = validate_spec(spec);
        if !report.is_empty() {
            return Err(LoadError::Validation(report));
        }
        let hp = hyperperiod(spec).map_err(|e| LoadError::Schema(e.to_string()))?;

        let tiles: Vec<TileInfo> = spec
            .platform
            .tiles
            .iter()
            .map(|t| TileInfo {
                id: t.id.clone(),
                x: t.x,
                y: t.y,
                area: t.area,
                static_energy: t.static_energy,
            })
            .collect();
        let tile_by_id: HashMap<String, usize> =
            tiles.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect();
        let mut neighbors = vec![Vec::new(); tiles.len()];
        for (i, a) in tiles.iter().enumerate() {
            for (j, b) in tiles.iter().enumerate() {
                if a.x.abs_diff(b.x) + a.y.abs_diff(b.y) == 1 {
                    neighbors[i].push(j);
                }
            }
            neighbors[i].sort_unstable();
        }

        let mut tasks = Vec::new();
        let mut task_by_id = HashMap::new();
        let mut apps = Vec::new();
        for (ai, app) in spec.applications.iter().enumerate() {
            let mut ids = Vec::new();
            for t in &app.tasks {
                let idx = tasks.len();
                task_by_id.insert(t.id.clone(), idx);
                ids.push(idx);
                tasks.push(TaskInfo {
                    id: t.id.clone(),
                    app: ai,
                    period: app.period,
                    options: Vec::new(),
                    preds: Vec::new(),
                    succs: Vec::new(),
                });
            }
            apps.push(AppInfo { id: app.id.clone(), period: app.period, tasks: ids });
        }

        let mut msgs = Vec::new();
        let mut msg_by_id = HashMap::new();
        for (ai, app) in spec.applications.iter().enumerate() {
            for m in &app.messages {
                let idx = msgs.len();
                let src = task_by_id[&m.src];
                let dst = task_by_id[&m.dst];
                msg_by_id.insert(m.id.clone(), idx);
                tasks[src].succs.push(idx);
                tasks[dst].preds.push(idx);
                msgs.push(MsgInfo { id: m.id.clone(), app: ai, src, dst, size: m.size });
            }
        }

        for m in &spec.mappings {
            let task = task_by_id[&m.task];
            let tile = tile_by_id[&m.tile];
            tasks[task].options.push(OptionInfo { tile, wcet: m.wcet, dyn_energy: m.dyn_energy });
        }

        // Topological order per application, ties broken by task index.
        let mut topo_order = Vec::with_capacity(tasks.len());
        for app in &apps {
            let mut indeg: HashMap<usize, usize> =
                app.tasks.iter().map(|&t| (t, tasks[t].preds.len())).collect();
            let mut ready: BTreeSet<usize> =
                indeg.iter().filter(|(_, &d)| d == 0).map(|(&t, _)| t).collect();
            while let Some(&t) = ready.iter().next() {
                ready.remove(&t);
                topo_order.push(t);
                for &m in &tasks[t].succs {
                    let d = indeg.get_mut(&msgs[m].dst).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(msgs[m].dst);
                    }
                }
            }
        }

        Ok(SpecIndex {
            fingerprint: spec_fingerprint(spec),
            width: spec.platform.width,
            height: spec.platform.height,
            link_delay: spec.platform.link_delay,
            tiles,
            neighbors,
            apps,
            tasks,
            msgs,
            task_by_id,
            tile_by_id,
            msg_by_id,
            topo_order,
            hyperperiod: hp,
        })
    }

    pub fn manhattan(&self, a: usize, b: usize) -> u64 {
        let (ta, tb) = (&self.tiles[a], &self.tiles[b]);
        (ta.x.abs_diff(tb.x) + ta.y.abs_diff(tb.y)) as u64
    }

    /// Executions of a task per hyperperiod.
    pub fn executions(&self, task: usize) -> u64 {
        self.hyperperiod / self.tasks[task].period
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_instance() -> String {
        r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":2,"staticEnergy":5,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t0"}], "messages":[]}],
            "mappings": [{"task":"t0","tile":"T0","wcet":4,"dynEnergy":3}]
        }"#
        .to_string()
    }

    #[test]
    fn loads_minimal_instance() {
        let spec = load_spec(&minimal_instance()).unwrap();
        assert_eq!(spec.platform.tiles.len(), 1);
        assert_eq!(spec.applications[0].tasks.len(), 1);
    }

    #[test]
    fn rejects_malformed_json() {
        match load_spec("{ not json").unwrap_err() {
            LoadError::Syntax(_) => {}
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_schema_deviations() {
        let extra_key = minimal_instance().replace("\"width\":1", "\"width\":1,\"depth\":2");
        match load_spec(&extra_key).unwrap_err() {
            LoadError::Schema(_) => {}
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_message_endpoint() {
        let text = minimal_instance().replace(
            "\"messages\":[]",
            "\"messages\":[{\"id\":\"m0\",\"src\":\"ghost\",\"dst\":\"t0\",\"size\":1}]",
        );
        match load_spec(&text).unwrap_err() {
            LoadError::Validation(report) => {
                assert!(report.violations.iter().any(|v| v.rule == "unknown task"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_cyclic_task_graph() {
        let text = r#"{
            "platform": {"width":1, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t1"},{"id":"t2"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1},
                            {"id":"m1","src":"t2","dst":"t1","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t2","tile":"T0","wcet":1,"dynEnergy":0}]
        }"#;
        match load_spec(text).unwrap_err() {
            LoadError::Validation(report) => {
                assert!(report.violations.iter().any(|v| v.rule == "cyclic task graph"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_reports_wcet_and_unmappable() {
        let mut spec = load_spec(&minimal_instance()).unwrap();
        spec.mappings[0].wcet = 9; // period is 8
        let report = validate_spec(&spec);
        assert!(report.violations.iter().any(|v| v.rule == "wcet exceeds period"));

        spec.mappings.clear();
        let report = validate_spec(&spec);
        assert!(report.violations.iter().any(|v| v.rule == "unmappable task"));
    }

    #[test]
    fn valid_instance_has_empty_report() {
        let spec = load_spec(&minimal_instance()).unwrap();
        assert!(validate_spec(&spec).is_empty());
    }

    #[test]
    fn hyperperiod_is_lcm() {
        let mut spec = load_spec(&minimal_instance()).unwrap();
        spec.applications[0].period = 4;
        assert_eq!(hyperperiod(&spec).unwrap(), 4);

        let mut two = spec.clone();
        let mut b = spec.applications[0].clone();
        b.id = "a1".into();
        b.period = 6;
        b.tasks[0].id = "t1".into();
        two.applications.push(b);
        assert_eq!(hyperperiod(&two).unwrap(), 12);

        two.applications[0].period = 3;
        two.applications[1].period = 5;
        let mut c = two.applications[0].clone();
        c.id = "a2".into();
        c.period = 10;
        c.tasks[0].id = "t2".into();
        two.applications.push(c);
        assert_eq!(hyperperiod(&two).unwrap(), 30);
    }

    fn mesh(w: u32, h: u32) -> Platform {
        let mut tiles = Vec::new();
        for y in 0..h {
            for x in 0..w {
                tiles.push(Tile {
                    id: format!("T{x}_{y}"),
                    x,
                    y,
                    area: 1,
                    static_energy: 0,
                    type_tag: "cpu".into(),
                });
            }
        }
        Platform { width: w, height: h, link_delay: 1, tiles }
    }

    #[test]
    fn neighbor_counts_on_mesh() {
        let p = mesh(3, 3);
        assert_eq!(neighbors(&p, "T1_1").unwrap().len(), 4);
        assert_eq!(neighbors(&p, "T0_0").unwrap().len(), 2);
        let single = mesh(1, 1);
        assert!(neighbors(&single, "T0_0").unwrap().is_empty());
        assert!(neighbors(&p, "nope").is_err());
    }

    #[test]
    fn neighbors_are_symmetric() {
        let p = mesh(3, 2);
        for a in &p.tiles {
            for b in neighbors(&p, &a.id).unwrap() {
                assert!(neighbors(&p, &b).unwrap().contains(&a.id));
            }
        }
    }

    #[test]
    fn serialization_round_trips() {
        let spec = load_spec(&minimal_instance()).unwrap();
        let text = serialize_spec(&spec);
        let again = load_spec(&text).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn index_builds_topological_order() {
        let text = r#"{
            "platform": {"width":2, "height":1, "linkDelay":1,
                "tiles":[{"id":"T0","x":0,"y":0,"area":1,"staticEnergy":0,"type":"cpu"},
                         {"id":"T1","x":1,"y":0,"area":1,"staticEnergy":0,"type":"cpu"}]},
            "applications": [{"id":"a0","period":8,
                "tasks":[{"id":"t2"},{"id":"t1"}],
                "messages":[{"id":"m0","src":"t1","dst":"t2","size":1}]}],
            "mappings": [{"task":"t1","tile":"T0","wcet":1,"dynEnergy":0},
                         {"task":"t2","tile":"T1","wcet":1,"dynEnergy":0}]
        }"#;
        let spec = load_spec(text).unwrap();
        let idx = SpecIndex::build(&spec).unwrap();
        let t1 = idx.task_by_id["t1"];
        let t2 = idx.task_by_id["t2"];
        let pos = |t| idx.topo_order.iter().position(|&x| x == t).unwrap();
        assert!(pos(t1) < pos(t2));
        assert_eq!(idx.hyperperiod, 8);
        assert_eq!(idx.manhattan(0, 1), 1);
    }
}
