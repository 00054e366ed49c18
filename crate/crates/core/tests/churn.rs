mod common;

use edgesim::churn::{ChurnAction, ChurnConfig, ScriptedChurn};
use edgesim::engine::{EngineConfig, EventKind, EventSink};
use edgesim::Tier;
use proptest::prelude::*;

use common::{churn_fleet, environment};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replayed_fleet_size_matches_every_cycle(seed in any::<u64>(), p in 0.0f64..0.3) {
        let mut cfg = EngineConfig { total_cycles: 1_500, seed, ..EngineConfig::default() };
        cfg.churn.event_probability = p;
        let mut env = environment(churn_fleet(seed), cfg, "greedy_eft", 2);
        let initial = env.state().devices().len() as i64;
        env.set_event_sink(EventSink::memory());
        env.run(true).unwrap();
        let events = env.take_events();
        let mut fleet = initial;
        let mut by_cycle = std::collections::BTreeMap::new();
        for e in &events {
            match e.kind {
                EventKind::DeviceAdd => fleet += 1,
                EventKind::DeviceRemove => fleet -= 1,
                _ => continue,
            }
            by_cycle.insert(e.cycle, fleet);
        }
        let mut expect = initial;
        for rec in &env.metrics().cycles {
            if let Some(&f) = by_cycle.get(&rec.cycle) {
                expect = f;
            }
            prop_assert_eq!(rec.fleet_size as i64, expect);
        }
        prop_assert_eq!(env.state().devices().len() as i64, fleet);
    }

    #[test]
    fn same_direction_runs_respect_the_cap(seed in any::<u64>(), p in 0.05f64..0.8, cap in 1u32..5) {
        let mut cfg = EngineConfig { total_cycles: 800, seed, ..EngineConfig::default() };
        cfg.churn.event_probability = p;
        cfg.churn.max_consecutive = cap;
        let mut env = environment(churn_fleet(seed), cfg, "greedy_eft", 1);
        env.run_cycles(800).unwrap();
        prop_assert!(env.churn_history().longest_run() <= cap as usize);
    }

    #[test]
    fn churn_draws_do_not_depend_on_the_workload(seed in any::<u64>(), apps in 1usize..6) {
        let run = |num_apps: usize| {
            let mut cfg = EngineConfig { total_cycles: 1_000, seed, ..EngineConfig::default() };
            cfg.churn.event_probability = 0.05;
            let gen = edgesim::datagen::GenConfig { num_apps, ..churn_fleet(seed) };
            let mut env = environment(gen, cfg, "greedy_eft", 2);
            env.run_cycles(1_000).unwrap();
            env.churn_history().events.iter().map(|e| (e.cycle, e.action)).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(apps), run(apps + 3));
    }
}

#[test]
fn event_count_tracks_probability() {
    let (p, cycles, seeds) = (0.05, 2_000u64, 12u64);
    let total: u64 = (1..=seeds)
        .map(|seed| {
            let mut cfg = EngineConfig { total_cycles: cycles, seed, ..EngineConfig::default() };
            cfg.churn.event_probability = p;
            let mut env = environment(churn_fleet(seed), cfg, "greedy_eft", 1);
            env.run_cycles(cycles).unwrap();
            let h = env.churn_history();
            h.total_added + h.total_removed
        })
        .sum();
    let mean = total as f64 / seeds as f64;
    let expect = p * cycles as f64;
    let sd_of_mean = (expect * (1.0 - p) / seeds as f64).sqrt();
    assert!((mean - expect).abs() <= 4.0 * sd_of_mean, "mean {mean} vs {expect}");
}

#[test]
fn scripted_directives_fire_on_their_cycle() {
    let mut cfg = EngineConfig { total_cycles: 200, seed: 3, ..EngineConfig::default() };
    cfg.churn = ChurnConfig {
        manual_script: vec![
            ScriptedChurn { cycle: 10, action: ChurnAction::Add, tier: Some(Tier::Mec) },
            ScriptedChurn { cycle: 20, action: ChurnAction::Remove, tier: Some(Tier::Iot) },
            ScriptedChurn { cycle: 30, action: ChurnAction::Add, tier: Some(Tier::Iot) },
        ],
        ..ChurnConfig::disabled()
    };
    let mut env = environment(churn_fleet(3), cfg, "greedy_eft", 1);
    let before = env.state().devices().len();
    env.run(true).unwrap();
    let got: Vec<_> = env.churn_history().events.iter().map(|e| (e.cycle, e.action, e.tier)).collect();
    assert_eq!(
        got,
        vec![(10, ChurnAction::Add, Tier::Mec), (20, ChurnAction::Remove, Tier::Iot), (30, ChurnAction::Add, Tier::Iot)]
    );
    assert_eq!(env.state().devices().len(), before + 1);
    let added = env.churn_history().events[0].device;
    assert!(added.0 as usize >= before);
}

#[test]
fn removal_requeues_work_without_losing_tasks() {
    let mut cfg = EngineConfig { total_cycles: 3_000, seed: 5, strict_invariants: true, ..EngineConfig::default() };
    cfg.churn.event_probability = 0.2;
    let gen = edgesim::datagen::GenConfig { num_apps: 30, num_iot: 6, num_mec: 2, ..churn_fleet(5) };
    let mut env = environment(gen, cfg, "random", 3);
    env.set_event_sink(EventSink::memory());
    let summary = env.run(false).unwrap();
    let requeued = env.take_events().iter().filter(|e| e.kind == EventKind::Requeue).count();
    assert!(requeued > 0);
    assert_eq!(summary.apps_finished, 30);
}
