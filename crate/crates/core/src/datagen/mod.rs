//! Workload and fleet generation.
//!
//! Applications are random DAGs over a shuffled task order: an edge may only
//! point forward in that order, so every generated graph is acyclic without
//! repair. Attributes are drawn uniformly from the configured ranges.

mod csv_io;
mod report;

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, stream_rng};
use crate::model::{
    ApplicationSpec, AppId, DeviceId, DeviceSpec, TaskId, TaskSpec, Tier, MAX_SAFETY_LEVEL,
    SIZE_RANGE_MB,
};

pub use self::csv_io::{
    export_csv, load_csv, CsvError, FileManifest, ManifestEntry, APPLICATIONS_FILE, DEVICES_FILE,
    TASKS_FILE,
};
pub use self::report::{distribution_report, AttributeStats, DistributionReport, ReportError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid generator config: {0}")]
pub struct ConfigError(pub String);

/// Everything the generator needs. Defaults describe the full-scale
/// setup: 10,000 applications of 20-60 tasks, 100 IoT devices, 50 MEC
/// devices and one Cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub num_apps: usize,
    pub tasks_per_app: (u32, u32),
    pub dependency_density: f64,
    pub compute_load_range: (u64, u64),
    pub size_range_mb: (u32, u32),
    pub task_safety_range: (u8, u8),
    pub deadline_range_cycles: (u64, u64),

    pub num_iot: usize,
    pub num_mec: usize,
    pub cloud: bool,

    pub iot_core_choices: Vec<usize>,
    pub iot_core_speed: u64,
    pub iot_queue_capacity: usize,
    pub iot_battery_wh_range: (f64, f64),
    pub iot_active_power_w: f64,
    pub iot_idle_power_w: f64,
    pub iot_safety_range: (u8, u8),

    pub mec_core_choices: Vec<usize>,
    pub mec_core_speed: u64,
    pub mec_queue_capacity: usize,
    pub mec_battery_wh_range: (f64, f64),
    pub mec_active_power_w: f64,
    pub mec_idle_power_w: f64,
    pub mec_safety_range: (u8, u8),

    pub cloud_initial_cores: usize,
    pub cloud_core_cap: usize,
    pub cloud_core_speed: u64,
    pub cloud_active_power_w: f64,
    pub cloud_idle_power_w: f64,

    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_apps: 10_000,
            tasks_per_app: (20, 60),
            dependency_density: 0.3,
            compute_load_range: (10, 200),
            size_range_mb: SIZE_RANGE_MB,
            task_safety_range: (0, MAX_SAFETY_LEVEL),
            deadline_range_cycles: (200, 2_000),

            num_iot: 100,
            num_mec: 50,
            cloud: true,

            iot_core_choices: vec![4, 8, 16],
            iot_core_speed: 2,
            iot_queue_capacity: 5,
            iot_battery_wh_range: (36.0, 41.0),
            iot_active_power_w: 2.0,
            iot_idle_power_w: 0.2,
            iot_safety_range: (0, MAX_SAFETY_LEVEL),

            mec_core_choices: vec![16, 32, 64],
            mec_core_speed: 8,
            mec_queue_capacity: 20,
            mec_battery_wh_range: (100.0, 200.0),
            mec_active_power_w: 8.0,
            mec_idle_power_w: 0.8,
            mec_safety_range: (1, MAX_SAFETY_LEVEL),

            cloud_initial_cores: 16,
            cloud_core_cap: crate::model::DEFAULT_CLOUD_CORE_CAP,
            cloud_core_speed: 16,
            cloud_active_power_w: 32.0,
            cloud_idle_power_w: 0.0,

            seed: 1,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, (lo, hi): (T, T)) -> Result<(), ConfigError> {
    if lo > hi {
        return Err(ConfigError(format!("{name} is empty: [{lo:?}, {hi:?}]")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_range("tasks_per_app", self.tasks_per_app)?;
        if self.tasks_per_app.0 == 0 {
            return Err(ConfigError("tasks_per_app must start at 1 or more".into()));
        }
        if !(0.0..=1.0).contains(&self.dependency_density) {
            return Err(ConfigError(format!(
                "dependency_density {} outside [0, 1]",
                self.dependency_density
            )));
        }
        check_range("compute_load_range", self.compute_load_range)?;
        if self.compute_load_range.0 == 0 {
            return Err(ConfigError("compute_load_range must start at 1 or more".into()));
        }
        check_range("size_range_mb", self.size_range_mb)?;
        if self.size_range_mb.0 < SIZE_RANGE_MB.0 || self.size_range_mb.1 > SIZE_RANGE_MB.1 {
            return Err(ConfigError(format!(
                "size_range_mb must lie within [{}, {}]",
                SIZE_RANGE_MB.0, SIZE_RANGE_MB.1
            )));
        }
        check_range("deadline_range_cycles", self.deadline_range_cycles)?;
        if self.deadline_range_cycles.0 == 0 {
            return Err(ConfigError("deadline_range_cycles must start at 1 or more".into()));
        }
        for (name, range) in [
            ("task_safety_range", self.task_safety_range),
            ("iot_safety_range", self.iot_safety_range),
            ("mec_safety_range", self.mec_safety_range),
        ] {
            check_range(name, range)?;
            if range.1 > MAX_SAFETY_LEVEL {
                return Err(ConfigError(format!("{name} exceeds {MAX_SAFETY_LEVEL}")));
            }
        }
        for (name, range) in [
            ("iot_battery_wh_range", self.iot_battery_wh_range),
            ("mec_battery_wh_range", self.mec_battery_wh_range),
        ] {
            check_range(name, range)?;
            if !(range.0 > 0.0 && range.1.is_finite()) {
                return Err(ConfigError(format!("{name} must be positive and finite")));
            }
        }
        for (name, choices) in [
            ("iot_core_choices", &self.iot_core_choices),
            ("mec_core_choices", &self.mec_core_choices),
        ] {
            if choices.is_empty() || choices.contains(&0) {
                return Err(ConfigError(format!("{name} must be non-empty and positive")));
            }
        }
        for (name, v) in [
            ("iot_core_speed", self.iot_core_speed),
            ("mec_core_speed", self.mec_core_speed),
            ("cloud_core_speed", self.cloud_core_speed),
            ("iot_queue_capacity", self.iot_queue_capacity as u64),
            ("mec_queue_capacity", self.mec_queue_capacity as u64),
            ("cloud_initial_cores", self.cloud_initial_cores as u64),
        ] {
            if v == 0 {
                return Err(ConfigError(format!("{name} must be positive")));
            }
        }
        if self.cloud_core_cap < self.cloud_initial_cores {
            return Err(ConfigError("cloud_core_cap is below cloud_initial_cores".into()));
        }
        for (name, w) in [
            ("iot_active_power_w", self.iot_active_power_w),
            ("iot_idle_power_w", self.iot_idle_power_w),
            ("mec_active_power_w", self.mec_active_power_w),
            ("mec_idle_power_w", self.mec_idle_power_w),
            ("cloud_active_power_w", self.cloud_active_power_w),
            ("cloud_idle_power_w", self.cloud_idle_power_w),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(ConfigError(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Device template for a battery-powered tier.
    pub fn profile(&self, tier: Tier) -> DeviceProfile {
        match tier {
            Tier::Iot => DeviceProfile {
                tier,
                core_choices: self.iot_core_choices.clone(),
                core_speed: self.iot_core_speed,
                queue_capacity: Some(self.iot_queue_capacity),
                battery_wh_range: Some(self.iot_battery_wh_range),
                active_power_w: self.iot_active_power_w,
                idle_power_w: self.iot_idle_power_w,
                safety_range: self.iot_safety_range,
                core_cap: None,
            },
            Tier::Mec => DeviceProfile {
                tier,
                core_choices: self.mec_core_choices.clone(),
                core_speed: self.mec_core_speed,
                queue_capacity: Some(self.mec_queue_capacity),
                battery_wh_range: Some(self.mec_battery_wh_range),
                active_power_w: self.mec_active_power_w,
                idle_power_w: self.mec_idle_power_w,
                safety_range: self.mec_safety_range,
                core_cap: None,
            },
            Tier::Cloud => DeviceProfile {
                tier,
                core_choices: vec![self.cloud_initial_cores],
                core_speed: self.cloud_core_speed,
                queue_capacity: None,
                battery_wh_range: None,
                active_power_w: self.cloud_active_power_w,
                idle_power_w: self.cloud_idle_power_w,
                safety_range: (MAX_SAFETY_LEVEL, MAX_SAFETY_LEVEL),
                core_cap: Some(self.cloud_core_cap),
            },
        }
    }
}

/// Template used to stamp out devices of one tier.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub tier: Tier,
    pub core_choices: Vec<usize>,
    pub core_speed: u64,
    pub queue_capacity: Option<usize>,
    pub battery_wh_range: Option<(f64, f64)>,
    pub active_power_w: f64,
    pub idle_power_w: f64,
    pub safety_range: (u8, u8),
    pub core_cap: Option<usize>,
}

impl DeviceProfile {
    pub fn generate<R: Rng + ?Sized>(&self, id: DeviceId, rng: &mut R) -> DeviceSpec {
        let cores = *self.core_choices.choose(rng).expect("validated non-empty");
        let battery = self
            .battery_wh_range
            .map(|(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo });
        let safety = rng.random_range(self.safety_range.0..=self.safety_range.1);
        let mut dev = DeviceSpec::new(
            id,
            self.tier,
            cores,
            self.core_speed,
            self.queue_capacity,
            battery,
            self.active_power_w,
            self.idle_power_w,
            safety,
        );
        dev.elastic_core_cap = self.core_cap;
        dev
    }
}

/// Random DAG over `num_tasks` nodes, as sorted `(pred, succ)` index pairs.
///
/// Nodes are shuffled; each forward pair in the shuffled order becomes an
/// edge with probability `density`. When `density > 0`, a node that got no
/// predecessor (other than the first in order) is given one earlier node,
/// chosen uniformly.
pub fn generate_dag<R: Rng + ?Sized>(num_tasks: usize, density: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let density = density.clamp(0.0, 1.0);
    let mut order: Vec<usize> = (0..num_tasks).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    if density > 0.0 {
        for j in 1..num_tasks {
            let mut has_pred = false;
            for i in 0..j {
                if rng.random_bool(density) {
                    edges.insert((order[i], order[j]));
                    has_pred = true;
                }
            }
            if !has_pred {
                let i = rng.random_range(0..j);
                edges.insert((order[i], order[j]));
            }
        }
    }
    edges.into_iter().collect()
}

/// Expected edge count of [`generate_dag`]: forward pairs plus the
/// connectivity floor, `d * C(n,2) + sum_{j=1}^{n-1} (1-d)^j`.
pub fn expected_edge_count(num_tasks: usize, density: f64) -> f64 {
    if num_tasks < 2 || density <= 0.0 {
        return 0.0;
    }
    let n = num_tasks as f64;
    let floor: f64 = (1..num_tasks).map(|j| (1.0 - density).powi(j as i32)).sum();
    density * n * (n - 1.0) / 2.0 + floor
}

pub fn generate_applications<R: Rng + ?Sized>(
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<ApplicationSpec>, ConfigError> {
    cfg.validate()?;
    let mut next_task = 0u32;
    let mut apps = Vec::with_capacity(cfg.num_apps);
    for a in 0..cfg.num_apps {
        let app = AppId(a as u32);
        let n = rng.random_range(cfg.tasks_per_app.0..=cfg.tasks_per_app.1) as usize;
        let mut preds: Vec<Vec<TaskId>> = vec![Vec::new(); n];
        let base = next_task;
        for (p, s) in generate_dag(n, cfg.dependency_density, rng) {
            preds[s].push(TaskId(base + p as u32));
        }
        let tasks = preds
            .into_iter()
            .enumerate()
            .map(|(i, mut predecessors)| {
                predecessors.sort();
                TaskSpec {
                    id: TaskId(base + i as u32),
                    app,
                    compute_load: rng.random_range(cfg.compute_load_range.0..=cfg.compute_load_range.1),
                    input_size_mb: rng.random_range(cfg.size_range_mb.0..=cfg.size_range_mb.1),
                    output_size_mb: rng.random_range(cfg.size_range_mb.0..=cfg.size_range_mb.1),
                    safety_level: rng.random_range(cfg.task_safety_range.0..=cfg.task_safety_range.1),
                    predecessors,
                }
            })
            .collect();
        next_task += n as u32;
        let deadline_cycles =
            rng.random_range(cfg.deadline_range_cycles.0..=cfg.deadline_range_cycles.1);
        apps.push(ApplicationSpec { id: app, deadline_cycles, tasks });
    }
    Ok(apps)
}

/// IoT devices first, then MEC, then the Cloud, with ids assigned in that order.
pub fn generate_devices<R: Rng + ?Sized>(
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<DeviceSpec>, ConfigError> {
    cfg.validate()?;
    let mut devices = Vec::with_capacity(cfg.num_iot + cfg.num_mec + 1);
    let mut next = 0u32;
    for (tier, count) in [(Tier::Iot, cfg.num_iot), (Tier::Mec, cfg.num_mec)] {
        let profile = cfg.profile(tier);
        for _ in 0..count {
            devices.push(profile.generate(DeviceId(next), rng));
            next += 1;
        }
    }
    if cfg.cloud {
        devices.push(cfg.profile(Tier::Cloud).generate(DeviceId(next), rng));
    }
    Ok(devices)
}

/// Applications and fleet for `cfg.seed`, each drawn from its own stream so
/// changing the fleet leaves the workload untouched.
pub fn generate_workload(cfg: &GenConfig) -> Result<(Vec<ApplicationSpec>, Vec<DeviceSpec>), ConfigError> {
    let apps = generate_applications(cfg, &mut stream_rng(cfg.seed, stream::WORKLOAD))?;
    let devices = generate_devices(cfg, &mut stream_rng(cfg.seed, stream::DEVICES))?;
    Ok((apps, devices))
}
