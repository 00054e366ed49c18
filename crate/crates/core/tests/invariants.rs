mod common;

use edgesim::datagen::GenConfig;
use edgesim::engine::EngineConfig;
use proptest::prelude::*;

use common::environment;

fn small_gen() -> impl Strategy<Value = GenConfig> {
    (1usize..12, 1usize..6, 0usize..3, any::<bool>(), 0.0f64..0.6, any::<u64>()).prop_map(
        |(num_apps, num_iot, num_mec, cloud, density, seed)| GenConfig {
            num_apps,
            tasks_per_app: (1, 12),
            dependency_density: density,
            num_iot,
            num_mec,
            cloud,
            iot_battery_wh_range: (0.01, 0.2),
            seed,
            ..GenConfig::default()
        },
    )
}

fn scheduler() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("random"), Just("greedy_eft"), Just("min_energy")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ledgers_queues_and_counters_hold_every_cycle(
        gen in small_gen(),
        sched in scheduler(),
        agents in 1usize..5,
        p in 0.0f64..0.2,
    ) {
        let mut cfg = EngineConfig { total_cycles: 600, seed: gen.seed, strict_invariants: true, ..EngineConfig::default() };
        cfg.churn.event_probability = p;
        let mut env = environment(gen, cfg, sched, agents);
        let (mut delivered, mut finished, mut apps_done) = (0u64, 0usize, 0usize);
        while !env.at_horizon() && !env.workload_done() {
            let before = env.state().cycle();
            let report = env.step().unwrap();
            let s = env.state();
            prop_assert_eq!(report.cycle, before);
            prop_assert_eq!(s.cycle(), before + 1);
            prop_assert!(s.delivered_total() >= delivered);
            prop_assert!(s.finished_tasks().len() >= finished);
            prop_assert!(s.finished_apps().len() >= apps_done);
            prop_assert_eq!(
                s.remaining_tasks().len() + s.running_tasks().len() + s.finished_tasks().len(),
                s.delivered_total() as usize
            );
            for dev in s.devices().values() {
                for core in &dev.cores {
                    if let Some(cap) = core.queue_capacity {
                        prop_assert!(core.queue().len() <= cap);
                    }
                }
                if let Some(b) = dev.battery_wh {
                    prop_assert!(b >= 0.0);
                }
            }
            delivered = s.delivered_total();
            finished = s.finished_tasks().len();
            apps_done = s.finished_apps().len();
        }
    }

    #[test]
    fn battery_meters_reconcile(gen in small_gen(), sched in scheduler()) {
        let mut cfg = EngineConfig { total_cycles: 400, seed: gen.seed, ..EngineConfig::default() };
        cfg.churn = edgesim::churn::ChurnConfig::disabled();
        let mut env = environment(gen, cfg, sched, 2);
        env.run(true).unwrap();
        for (id, meter) in &env.metrics().meters {
            let dev = env.state().device(*id).unwrap();
            if let (Some(start), Some(now)) = (meter.initial_battery_wh, dev.battery_wh) {
                prop_assert!((meter.energy_wh - (start - now)).abs() <= 1e-9);
            }
            prop_assert!(meter.energy_wh >= 0.0);
        }
    }

    #[test]
    fn cloud_fleet_without_churn_finishes_everything(gen in small_gen(), sched in scheduler()) {
        let gen = GenConfig { cloud: true, ..gen };
        let num_apps = gen.num_apps;
        let mut cfg = EngineConfig { total_cycles: 20_000, seed: gen.seed, ..EngineConfig::default() };
        cfg.churn = edgesim::churn::ChurnConfig::disabled();
        let mut env = environment(gen, cfg, sched, 3);
        let summary = env.run(false).unwrap();
        prop_assert_eq!(summary.apps_finished, num_apps);
        prop_assert!(env.state().remaining_tasks().is_empty());
        prop_assert!(env.state().running_tasks().is_empty());
    }
}
