//! Domain types shared by every subsystem: tasks, applications, devices and
//! the assignment records schedulers emit.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.trim().parse().map($name)
            }
        }
    };
}

id_newtype!(
    /// Globally unique task identifier.
    TaskId
);
id_newtype!(
    /// Application (job) identifier.
    AppId
);
id_newtype!(
    /// Device identifier; never reused, including for devices added by churn.
    DeviceId
);

/// Inclusive bounds on task input/output sizes, in megabytes.
pub const SIZE_RANGE_MB: (u32, u32) = (1, 1024);
/// Highest safety level a task may require or a device may provide.
pub const MAX_SAFETY_LEVEL: u8 = 3;

/// One node of an application DAG.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub app: AppId,
    /// Abstract compute units, at least 1.
    pub compute_load: u64,
    pub input_size_mb: u32,
    pub output_size_mb: u32,
    /// Required safety level in `0..=3`; a device may host the task only if
    /// its capability is at least this level.
    pub safety_level: u8,
    /// Tasks of the same application that must finish first.
    pub predecessors: Vec<TaskId>,
}

impl TaskSpec {
    /// Cycles needed on a core of the given speed: `ceil(load / speed)`.
    pub fn execution_cycles(&self, speed: u64) -> u64 {
        execution_cycles(self.compute_load, speed)
    }
}

/// `ceil(load / speed)`, the execution time model shared by the engine and
/// every scheduler.
pub fn execution_cycles(load: u64, speed: u64) -> u64 {
    debug_assert!(speed > 0);
    load.div_ceil(speed.max(1))
}

/// A DAG of tasks plus a deadline; the unit of delivery and completion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub id: AppId,
    /// Relative to the cycle the first task of the application is delivered.
    pub deadline_cycles: u64,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "IoT")]
    Iot,
    #[serde(rename = "MEC")]
    Mec,
    Cloud,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Iot => "IoT",
            Tier::Mec => "MEC",
            Tier::Cloud => "Cloud",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown device tier `{0}` (expected IoT, MEC or Cloud)")]
pub struct ParseTierError(pub String);

impl FromStr for Tier {
    type Err = ParseTierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iot" => Ok(Tier::Iot),
            "mec" => Ok(Tier::Mec),
            "cloud" => Ok(Tier::Cloud),
            _ => Err(ParseTierError(s.to_string())),
        }
    }
}

/// The task a core is currently executing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunningSlot {
    pub task: TaskId,
    /// Always at least 1 while the slot is occupied.
    pub remaining_cycles: u64,
}

/// A processing core with its own FIFO queue.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoreState {
    /// Compute units retired per cycle.
    pub speed: u64,
    /// `None` means unbounded (Cloud cores).
    pub queue_capacity: Option<usize>,
    pub(crate) queue: VecDeque<TaskId>,
    pub(crate) running: Option<RunningSlot>,
    /// Remaining cycles of the running task plus the execution cycles of
    /// everything queued behind it.
    pub(crate) backlog_cycles: u64,
}

impl CoreState {
    pub fn new(speed: u64, queue_capacity: Option<usize>) -> Self {
        Self {
            speed,
            queue_capacity,
            queue: VecDeque::new(),
            running: None,
            backlog_cycles: 0,
        }
    }

    pub fn queue(&self) -> &VecDeque<TaskId> {
        &self.queue
    }

    pub fn running(&self) -> Option<RunningSlot> {
        self.running
    }

    /// Cycles until this core would drain everything assigned to it.
    pub fn backlog_cycles(&self) -> u64 {
        self.backlog_cycles
    }

    pub fn queue_is_full(&self) -> bool {
        self.queue_capacity
            .is_some_and(|cap| self.queue.len() >= cap)
    }

    /// Free queue slots, `usize::MAX` when unbounded.
    pub fn free_slots(&self) -> usize {
        match self.queue_capacity {
            Some(cap) => cap.saturating_sub(self.queue.len()),
            None => usize::MAX,
        }
    }

    /// No running task and nothing queued.
    pub fn is_idle(&self) -> bool {
        self.running.is_none() && self.queue.is_empty()
    }
}

/// A heterogeneous processing node.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub tier: Tier,
    pub cores: Vec<CoreState>,
    /// Present iff the tier is not Cloud.
    pub battery_wh: Option<f64>,
    /// Watts drawn per busy core.
    pub active_power_w: f64,
    /// Watts drawn per idle core.
    pub idle_power_w: f64,
    pub safety_capability: u8,
    /// Upper bound on the core pool for elastic (Cloud) devices.
    pub elastic_core_cap: Option<usize>,
    /// Tasks queued or running on this device.
    pub(crate) occupied: usize,
}

/// Default hard cap on the elastic Cloud core pool.
pub const DEFAULT_CLOUD_CORE_CAP: usize = 10_000;

impl DeviceSpec {
    /// Builds a device whose cores all share one speed and queue capacity.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: DeviceId,
        tier: Tier,
        num_cores: usize,
        core_speed: u64,
        queue_capacity: Option<usize>,
        battery_wh: Option<f64>,
        active_power_w: f64,
        idle_power_w: f64,
        safety_capability: u8,
    ) -> Self {
        let elastic_core_cap = (tier == Tier::Cloud).then_some(DEFAULT_CLOUD_CORE_CAP);
        Self {
            id,
            tier,
            cores: (0..num_cores)
                .map(|_| CoreState::new(core_speed, queue_capacity))
                .collect(),
            battery_wh,
            active_power_w,
            idle_power_w,
            safety_capability,
            elastic_core_cap,
            occupied: 0,
        }
    }

    /// Whether the device can accept work: Cloud always, others while charged.
    pub fn is_schedulable(&self) -> bool {
        self.battery_wh.is_none_or(|b| b > 0.0)
    }

    pub fn is_elastic(&self) -> bool {
        self.elastic_core_cap.is_some()
    }

    /// Number of tasks queued or running on the device.
    pub fn occupied(&self) -> usize {
        self.occupied
    }

    pub fn busy_cores(&self) -> usize {
        self.cores.iter().filter(|c| c.running.is_some()).count()
    }

    /// Speed of the first core; devices built by [`DeviceSpec::new`] are uniform.
    pub fn core_speed(&self) -> u64 {
        self.cores.first().map_or(1, |c| c.speed)
    }

    pub fn queue_capacity(&self) -> Option<usize> {
        self.cores.first().and_then(|c| c.queue_capacity)
    }

    /// Structural problems with the device, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cores.is_empty() {
            out.push(format!("device {} has no cores", self.id));
        }
        if self.cores.iter().any(|c| c.speed == 0) {
            out.push(format!("device {} has a zero-speed core", self.id));
        }
        if self.cores.iter().any(|c| c.queue_capacity == Some(0)) {
            out.push(format!("device {} has a zero-capacity queue", self.id));
        }
        match (self.tier, self.battery_wh) {
            (Tier::Cloud, Some(_)) => out.push(format!("cloud device {} has a battery", self.id)),
            (Tier::Iot | Tier::Mec, None) => {
                out.push(format!("{} device {} has no battery", self.tier, self.id))
            }
            (_, Some(b)) if !(b >= 0.0 && b.is_finite()) => {
                out.push(format!("device {} has invalid battery level {b}", self.id))
            }
            _ => {}
        }
        if self.safety_capability > MAX_SAFETY_LEVEL {
            out.push(format!(
                "device {} safety capability {} exceeds {MAX_SAFETY_LEVEL}",
                self.id, self.safety_capability
            ));
        }
        if !(self.active_power_w >= 0.0 && self.idle_power_w >= 0.0) {
            out.push(format!("device {} has negative power draw", self.id));
        }
        out
    }
}

/// A scheduler's proposal binding a task to a core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub task: TaskId,
    pub device: DeviceId,
    pub core: usize,
    pub agent: usize,
}

/// Why the engine refused an assignment. Rejected tasks stay in the
/// remaining ledger and are offered again in later cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    QueueFull,
    BatteryDepleted,
    SafetyViolation,
    UnknownDevice,
    Unready,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::QueueFull => "queue_full",
            RejectReason::BatteryDepleted => "battery_depleted",
            RejectReason::SafetyViolation => "safety_violation",
            RejectReason::UnknownDevice => "unknown_device",
            RejectReason::Unready => "unready",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Device-side admission rule shared by the engine's commit step and the
/// bundled schedulers: battery, safety, then queue room.
pub fn admission_check(
    task: &TaskSpec,
    device: &DeviceSpec,
    core: usize,
) -> Result<(), RejectReason> {
    let core = device.cores.get(core).ok_or(RejectReason::UnknownDevice)?;
    if !device.is_schedulable() {
        return Err(RejectReason::BatteryDepleted);
    }
    if task.safety_level > device.safety_capability {
        return Err(RejectReason::SafetyViolation);
    }
    if core.queue_is_full() {
        return Err(RejectReason::QueueFull);
    }
    Ok(())
}
