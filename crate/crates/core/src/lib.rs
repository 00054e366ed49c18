//! Cycle-based simulator for multi-agent task scheduling across IoT, MEC and
//! Cloud devices.
//!
//! A run generates (or loads) a workload of DAG-shaped applications and a
//! heterogeneous device fleet, then steps an [`engine::Environment`] cycle by
//! cycle. Schedulers implement [`scheduling::Scheduler`] and see the state
//! read-only; the engine validates and commits their proposals.
//!
//! ```
//! use edgesim::datagen::GenConfig;
//! use edgesim::engine::{EngineConfig, Environment};
//! use edgesim::scheduling::SchedulerRegistry;
//!
//! let gen = GenConfig { num_apps: 20, num_iot: 4, num_mec: 2, ..GenConfig::default() };
//! let cfg = EngineConfig { total_cycles: 2_000, ..EngineConfig::default() };
//! let pool = SchedulerRegistry::default().build_pool("greedy_eft", 4, cfg.seed).unwrap();
//! let mut env = Environment::init(gen, cfg, pool).unwrap();
//! let summary = env.run(false).unwrap();
//! assert_eq!(summary.apps_finished, 20);
//! ```

pub mod churn;
pub mod dataflow;
pub mod datagen;
pub mod engine;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scheduling;
pub mod state;

pub use engine::{CycleReport, EngineConfig, EngineError, Environment, RunSummary};
pub use model::{ApplicationSpec, AppId, Assignment, DeviceId, DeviceSpec, TaskId, TaskSpec, Tier};
pub use state::{SimState, Snapshot};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/workload.md")]
    mod workload {}
    #[doc = include_str!("../../../book/src/delivery.md")]
    mod delivery {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/schedulers.md")]
    mod schedulers {}
    #[doc = include_str!("../../../book/src/churn.md")]
    mod churn {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
