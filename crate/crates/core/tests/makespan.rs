mod common;

use std::collections::HashMap;

use edgesim::datagen::{generate_workload, GenConfig};
use edgesim::engine::EngineConfig;
use proptest::prelude::*;

use common::{critical_path_cycles, environment};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn makespan_is_at_least_the_critical_path(
        seed in any::<u64>(),
        num_apps in 1usize..15,
        density in 0.0f64..0.7,
        sched in prop_oneof![Just("random"), Just("greedy_eft"), Just("min_energy")],
    ) {
        let gen = GenConfig {
            num_apps,
            tasks_per_app: (2, 25),
            dependency_density: density,
            num_iot: 5,
            num_mec: 2,
            seed,
            ..GenConfig::default()
        };
        let (apps, devices) = generate_workload(&gen).unwrap();
        let fastest = devices.iter().map(|d| d.core_speed()).max().unwrap();
        let bound: HashMap<_, _> = apps.iter().map(|a| (a.id, critical_path_cycles(a, fastest))).collect();
        let mut cfg = EngineConfig { total_cycles: 20_000, seed, ..EngineConfig::default() };
        cfg.churn.event_probability = 0.01;
        let mut env = environment(gen, cfg, sched, 3);
        env.run(false).unwrap();
        prop_assert_eq!(env.metrics().apps.len(), num_apps);
        for rec in &env.metrics().apps {
            prop_assert!(rec.makespan_cycles >= bound[&rec.app], "app {} makespan {} < bound {}", rec.app, rec.makespan_cycles, bound[&rec.app]);
            prop_assert_eq!(rec.makespan_cycles, rec.completion_cycle - rec.arrival_cycle);
            prop_assert_eq!(rec.deadline_met, rec.makespan_cycles <= apps[rec.app.0 as usize].deadline_cycles);
        }
    }
}

#[test]
fn chain_on_a_single_core_takes_the_sum_of_its_stages() {
    use edgesim::{ApplicationSpec, AppId, Tier};
    let tasks = vec![
        common::task(0, 0, 4, 0, &[]),
        common::task(1, 0, 6, 0, &[0]),
        common::task(2, 0, 3, 0, &[1]),
    ];
    let app = ApplicationSpec { id: AppId(0), deadline_cycles: 5, tasks };
    let dev = common::battery_device(0, Tier::Iot, 1, 2, 5, 10.0, 3);
    let mut cfg = EngineConfig { total_cycles: 100, ..EngineConfig::default() };
    cfg.churn.enabled = false;
    let mut env = common::environment_with(vec![app], vec![dev], cfg, "greedy_eft", 1);
    let summary = env.run(false).unwrap();
    // 2 + 3 + 2 cycles of execution, each stage committed the cycle after
    // its predecessor completes.
    assert_eq!(env.metrics().apps[0].makespan_cycles, 7);
    assert!(!env.metrics().apps[0].deadline_met);
    assert_eq!(env.metrics().deadline_misses, 1);
    assert_eq!(summary.apps_finished, 1);
}
