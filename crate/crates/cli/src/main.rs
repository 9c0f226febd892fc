//! `dse` — generate benchmark instances, explore their design space, score
//! fronts and re-verify emitted solutions.
//!
//! Exit codes: 0 success, 1 infeasible or failed verification, 2 usage or
//! configuration error, 3 I/O or schema error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dse_core::explore::{explore_indexed, front_json, snapshot_csv, ExplorationConfig, Strategy, Termination};
use dse_core::generator::{generate, GenParams};
use dse_core::metrics::{entropy_report, epsilon_indicator, GridSpec};
use dse_core::model::{load_spec, serialize_spec, SpecIndex};
use dse_core::objectives::{ObjectiveSpec, ObjectiveVector};
use dse_core::pareto::ArchiveKind;
use dse_core::verify::{check_front, CheckError};

#[derive(Parser)]
#[command(name = "dse", version, about = "Anytime multi-objective design space exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark instance.
    Generate(GenerateArgs),
    /// Explore an instance and emit its Pareto front.
    Explore(ExploreArgs),
    /// Score a front against a reference front.
    Metrics(MetricsArgs),
    /// Re-verify a front file against its instance.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Full parameter set as a JSON file; flags below override its fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tasks per application.
    #[arg(long)]
    tasks: Option<u64>,
    /// Number of applications.
    #[arg(long)]
    apps: Option<u64>,
    #[arg(long = "p-parallel")]
    p_parallel: Option<f64>,
    /// Mesh dimensions, e.g. 4x4.
    #[arg(long)]
    mesh: Option<String>,
    /// Mapping options per task.
    #[arg(long)]
    options: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    instance: PathBuf,
    /// One strategy or a comma separated list (s1|s2|s3|s4).
    #[arg(long, default_value = "s3")]
    strategy: String,
    #[arg(long, default_value = "area,energy,latency")]
    objectives: String,
    #[arg(long, default_value = "list")]
    archive: String,
    #[arg(long, default_value = "on")]
    estimation: String,
    #[arg(long = "timeout-ms", default_value_t = 0)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "check-every", default_value_t = 1)]
    check_every: u32,
    #[arg(long = "snapshot-every-ms", default_value_t = 0)]
    snapshot_every_ms: u64,
    #[arg(long = "snapshot-log")]
    snapshot_log: Option<PathBuf>,
    #[arg(long = "front-out")]
    front_out: Option<PathBuf>,
    /// Worker threads for running several strategies in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    front: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Per-objective reference box as JSON, e.g. [[0,10],[0,20]].
    #[arg(long = "grid-bounds")]
    grid_bounds: String,
    #[arg(long, default_value_t = 4)]
    cells: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    front: PathBuf,
    #[arg(long, default_value = "area,energy,latency")]
    objectives: String,
}

enum CliError {
    Infeasible(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Infeasible(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Explore(args) => cmd_explore(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut params = match &args.params {
        Some(path) => serde_json::from_str::<GenParams>(&read_file(path)?)
            .map_err(|e| CliError::Io(format!("bad params file: {e}")))?,
        None => GenParams::default(),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if let Some(tasks) = args.tasks {
        params.n_tasks_per_app = tasks;
    }
    if let Some(apps) = args.apps {
        params.n_apps = apps;
    }
    if let Some(p) = args.p_parallel {
        params.p_parallel = p;
    }
    if let Some(mesh) = &args.mesh {
        let (w, h) = mesh
            .split_once(['x', 'X'])
            .ok_or_else(|| CliError::Usage(format!("bad mesh spec '{mesh}', expected WxH")))?;
        params.mesh_w = w.parse().map_err(|_| CliError::Usage(format!("bad mesh width '{w}'")))?;
        params.mesh_h =
            h.parse().map_err(|_| CliError::Usage(format!("bad mesh height '{h}'")))?;
    }
    if let Some(options) = args.options {
        params.options_per_task = options;
    }
    let spec = generate(&params).map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(&args.out, &serialize_spec(&spec))
}

fn parse_strategies(text: &str) -> Result<Vec<Strategy>, CliError> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<Strategy>().map_err(CliError::Usage))
        .collect()
}

fn cmd_explore(args: ExploreArgs) -> Result<(), CliError> {
    let strategies = parse_strategies(&args.strategy)?;
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategy given".into()));
    }
    let objectives = ObjectiveSpec::parse(&args.objectives)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let archive = match args.archive.as_str() {
        "list" => ArchiveKind::List,
        "quadtree" => ArchiveKind::QuadTree,
        other => return Err(CliError::Usage(format!("unknown archive kind '{other}'"))),
    };
    let estimation = match args.estimation.as_str() {
        "on" => true,
        "off" => false,
        other => return Err(CliError::Usage(format!("estimation must be on|off, got '{other}'"))),
    };
    if args.check_every == 0 {
        return Err(CliError::Usage("--check-every must be positive".into()));
    }
    let spec = load_spec(&read_file(&args.instance)?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let idx = SpecIndex::build(&spec).map_err(|e| CliError::Io(e.to_string()))?;

    let mut configs = Vec::new();
    for &strategy in &strategies {
        let mut cfg = ExplorationConfig::new(strategy, objectives.clone());
        cfg.archive = archive;
        cfg.estimation = estimation;
        cfg.timeout_ms = args.timeout_ms;
        cfg.seed = args.seed;
        cfg.check_every = args.check_every;
        cfg.snapshot_every_ms = args.snapshot_every_ms;
        // S4 arity is validated by explore itself; surface it as usage error.
        if strategy == Strategy::S4 && objectives.len() != 2 {
            return Err(CliError::Usage("s4 requires exactly 2 objectives".into()));
        }
        configs.push(cfg);
    }

    // Each worker explores one configuration with private state.
    let jobs = args.jobs.max(1).min(configs.len());
    let results: Vec<_> = if jobs == 1 {
        configs.iter().map(|cfg| explore_indexed(&idx, cfg, None)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|cfg| scope.spawn(|| explore_indexed(&idx, cfg, None)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker does not panic")).collect()
        })
    };

    let mut any_solution = false;
    let mut any_timeout = false;
    for (cfg, result) in configs.iter().zip(results) {
        let run = result.map_err(|e| CliError::Usage(e.to_string()))?;
        let tag = match cfg.strategy {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
            Strategy::S3 => "s3",
            Strategy::S4 => "s4",
        };
        let suffix = |path: &Path| -> PathBuf {
            if configs.len() == 1 {
                path.to_path_buf()
            } else {
                let mut name = path.file_stem().unwrap_or_default().to_os_string();
                name.push(format!(".{tag}"));
                if let Some(ext) = path.extension() {
                    name.push(".");
                    name.push(ext);
                }
                path.with_file_name(name)
            }
        };
        if let Some(front_path) = &args.front_out {
            let value = front_json(&idx, &run.front);
            write_file(&suffix(front_path), &serde_json::to_string_pretty(&value).unwrap())?;
        }
        if let Some(log_path) = &args.snapshot_log {
            write_file(&suffix(log_path), &snapshot_csv(&run))?;
        }
        let termination = match run.termination {
            Termination::Completed => "completed",
            Termination::Timeout => "timeout",
            Termination::Interrupted => "interrupted",
        };
        println!(
            "{tag}: {} solutions on the front, termination {termination}, {} nodes, {} prunes",
            run.front.len(),
            run.counters.nodes,
            run.counters.prunes
        );
        any_solution |= !run.front.is_empty();
        any_timeout |= run.termination == Termination::Timeout;
    }
    if any_solution || any_timeout {
        Ok(()) // timeout without solutions still exits 0, marked in output
    } else {
        Err(CliError::Infeasible("instance is infeasible".into()))
    }
}

fn read_front_vectors(path: &Path) -> Result<Vec<ObjectiveVector>, CliError> {
    let text = read_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("bad front file {}: {e}", path.display())))?;
    let entries = value
        .as_array()
        .ok_or_else(|| CliError::Io(format!("{}: front must be a JSON array", path.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let vector = match entry {
            serde_json::Value::Array(_) => entry.clone(),
            serde_json::Value::Object(map) => map
                .get("vector")
                .cloned()
                .ok_or_else(|| CliError::Io(format!("{}: entry misses 'vector'", path.display())))?,
            _ => return Err(CliError::Io(format!("{}: bad front entry", path.display()))),
        };
        let comps: Vec<i64> = serde_json::from_value(vector)
            .map_err(|e| CliError::Io(format!("{}: bad vector: {e}", path.display())))?;
        out.push(ObjectiveVector::new(comps));
    }
    Ok(out)
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let front = read_front_vectors(&args.front)?;
    let reference = read_front_vectors(&args.reference)?;
    let bounds: Vec<(f64, f64)> = serde_json::from_str(&args.grid_bounds)
        .map_err(|e| CliError::Usage(format!("bad --grid-bounds: {e}")))?;
    let grid = GridSpec::new(bounds, args.cells).map_err(|e| CliError::Usage(e.to_string()))?;
    let epsilon =
        epsilon_indicator(&front, &reference).map_err(|e| CliError::Usage(e.to_string()))?;
    let (entropy, clamped) =
        entropy_report(&front, &grid).map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "{}",
        serde_json::json!({ "epsilon": epsilon, "entropy": entropy, "clampedCount": clamped })
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), CliError> {
    let spec = load_spec(&read_file(&args.instance)?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let objectives = ObjectiveSpec::parse(&args.objectives)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let front_text = read_file(&args.front)?;
    match check_front(&spec, &objectives, &front_text) {
        Ok(n) => {
            println!("verified {n} solutions");
            Ok(())
        }
        Err(CheckError::Schema(m)) => Err(CliError::Io(m)),
        Err(CheckError::Failed(m)) => Err(CliError::Infeasible(m)),
    }
}
