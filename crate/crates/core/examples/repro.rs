use dse_core::explore::{explore, ExplorationConfig, Strategy};
use dse_core::generator::{generate, GenParams};
use dse_core::objectives::ObjectiveSpec;

fn main() {
    let mut checked = 0;
    for seed in 0..40 {
        for (tasks, apps) in [(2u64, 1u64), (3, 1), (2, 2), (4, 1), (3, 2), (4, 2)] {
            let params = GenParams { seed, n_tasks_per_app: tasks, n_apps: apps, ..GenParams::default() };
            let spec = generate(&params).unwrap();
            let mut fronts: Vec<Vec<_>> = Vec::new();
            for strat in [Strategy::S1, Strategy::S2, Strategy::S3] {
                for est in [false, true] {
                    let mut cfg = ExplorationConfig::new(strat, ObjectiveSpec::all());
                    cfg.estimation = est;
                    cfg.timeout_ms = 20000;
                    let run = explore(&spec, &cfg).unwrap();
                    assert_eq!(run.termination, dse_core::explore::Termination::Completed,
                        "timeout: seed={seed} tasks={tasks} apps={apps} {strat:?} est={est}");
                    fronts.push(run.front_vectors());
                }
            }
            for f in &fronts[1..] {
                assert_eq!(f, &fronts[0], "front mismatch seed={seed} tasks={tasks} apps={apps}");
            }
            checked += 1;
        }
    }
    println!("agreement on {checked} instances");
}
