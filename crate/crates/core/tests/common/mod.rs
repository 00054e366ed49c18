#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use edgesim::datagen::GenConfig;
use edgesim::engine::{EngineConfig, Environment};
use edgesim::scheduling::SchedulerRegistry;
use edgesim::{ApplicationSpec, AppId, DeviceId, DeviceSpec, TaskId, TaskSpec, Tier};
use rand::Rng;

/// 30 IoT, 10 MEC and a Cloud; `num_apps` applications.
pub fn mid_scale(num_apps: usize, seed: u64) -> GenConfig {
    GenConfig { num_apps, num_iot: 30, num_mec: 10, cloud: true, seed, ..GenConfig::default() }
}

/// Default 151-device fleet with a token workload; for churn-only studies.
pub fn churn_fleet(seed: u64) -> GenConfig {
    GenConfig { num_apps: 3, tasks_per_app: (5, 10), seed, ..GenConfig::default() }
}

pub fn environment(gen: GenConfig, cfg: EngineConfig, scheduler: &str, agents: usize) -> Environment {
    let pool = SchedulerRegistry::default().build_pool(scheduler, agents, cfg.seed).unwrap();
    Environment::init(gen, cfg, pool).unwrap()
}

pub fn environment_with(
    apps: Vec<ApplicationSpec>,
    devices: Vec<DeviceSpec>,
    cfg: EngineConfig,
    scheduler: &str,
    agents: usize,
) -> Environment {
    let pool = SchedulerRegistry::default().build_pool(scheduler, agents, cfg.seed).unwrap();
    Environment::with_workload(apps, devices, GenConfig::default(), cfg, pool).unwrap()
}

pub fn task(id: u32, app: u32, load: u64, safety: u8, preds: &[u32]) -> TaskSpec {
    TaskSpec {
        id: TaskId(id),
        app: AppId(app),
        compute_load: load,
        input_size_mb: 1,
        output_size_mb: 1,
        safety_level: safety,
        predecessors: preds.iter().map(|&p| TaskId(p)).collect(),
    }
}

/// Random DAG application whose edges only point from lower to higher
/// index, so index order is a topological order.
pub fn random_app<R: Rng>(rng: &mut R, app: u32, first_id: u32, n: usize, density: f64) -> ApplicationSpec {
    let tasks = (0..n)
        .map(|j| {
            let preds: Vec<u32> =
                (0..j).filter(|_| rng.random_bool(density)).map(|i| first_id + i as u32).collect();
            task(first_id + j as u32, app, rng.random_range(1..=20), rng.random_range(0..=3), &preds)
        })
        .collect();
    ApplicationSpec { id: AppId(app), deadline_cycles: 1_000, tasks }
}

/// Battery-powered device with uniform cores.
pub fn battery_device(id: u32, tier: Tier, cores: usize, speed: u64, qcap: usize, battery: f64, safety: u8) -> DeviceSpec {
    let (active, idle) = match tier {
        Tier::Iot => (2.0, 0.2),
        _ => (8.0, 0.8),
    };
    DeviceSpec::new(DeviceId(id), tier, cores, speed, Some(qcap), Some(battery), active, idle, safety)
}

/// Out-degree of every task, counted by scanning predecessor lists.
pub fn out_degrees(apps: &[ApplicationSpec]) -> HashMap<TaskId, u32> {
    let mut deg: HashMap<TaskId, u32> = HashMap::new();
    for t in apps.iter().flat_map(|a| &a.tasks) {
        deg.entry(t.id).or_insert(0);
        for p in &t.predecessors {
            *deg.entry(*p).or_insert(0) += 1;
        }
    }
    deg
}

/// Longest chain of execution cycles through each application, assuming
/// every task runs on the fastest core in the fleet.
pub fn critical_path_cycles(app: &ApplicationSpec, fastest: u64) -> u64 {
    let by_id: BTreeMap<TaskId, &TaskSpec> = app.tasks.iter().map(|t| (t.id, t)).collect();
    let mut memo: HashMap<TaskId, u64> = HashMap::new();
    fn finish(
        id: TaskId,
        by_id: &BTreeMap<TaskId, &TaskSpec>,
        fastest: u64,
        memo: &mut HashMap<TaskId, u64>,
    ) -> u64 {
        if let Some(&v) = memo.get(&id) {
            return v;
        }
        let t = by_id[&id];
        let before = t.predecessors.iter().map(|p| finish(*p, by_id, fastest, memo)).max().unwrap_or(0);
        let v = before + t.compute_load.div_ceil(fastest);
        memo.insert(id, v);
        v
    }
    app.tasks.iter().map(|t| finish(t.id, &by_id, fastest, &mut memo)).max().unwrap_or(0)
}

/// Exhaustive minimum over assignments of independent tasks to cores of
/// the largest per-core execution sum. A core may take a task only if its
/// device is charged, is safe enough, and has queue room. `None` when no
/// assignment is feasible.
pub fn optimal_makespan(tasks: &[TaskSpec], devices: &[DeviceSpec]) -> Option<u64> {
    let cores: Vec<(usize, usize)> = devices
        .iter()
        .enumerate()
        .flat_map(|(d, dev)| (0..dev.cores.len()).map(move |c| (d, c)))
        .collect();
    if cores.is_empty() {
        return None;
    }
    let mut best = None;
    let mut choice = vec![0usize; tasks.len()];
    loop {
        let mut load = vec![0u64; cores.len()];
        let mut count = vec![0usize; cores.len()];
        let mut ok = true;
        for (t, &k) in tasks.iter().zip(&choice) {
            let (d, c) = cores[k];
            let dev = &devices[d];
            let core = &dev.cores[c];
            if dev.battery_wh.is_some_and(|b| b <= 0.0) || t.safety_level > dev.safety_capability {
                ok = false;
                break;
            }
            count[k] += 1;
            if core.queue_capacity.is_some_and(|cap| count[k] > cap) {
                ok = false;
                break;
            }
            load[k] += t.compute_load.div_ceil(core.speed);
        }
        if ok {
            let span = load.into_iter().max().unwrap_or(0);
            best = Some(best.map_or(span, |b: u64| b.min(span)));
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best;
            }
            choice[i] += 1;
            if choice[i] < cores.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
