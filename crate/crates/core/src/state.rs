//! The live system state: task ledgers, application progress and the device
//! fleet. The engine is its only writer; schedulers see it through
//! [`Snapshot`]s.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::sync::Arc;

use crate::model::{AppId, DeviceId, DeviceSpec, TaskId, TaskSpec};

/// A delivered task that has been committed to a core (queued or executing).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunningEntry {
    pub task: TaskSpec,
    pub device: DeviceId,
    pub core: usize,
}

/// Static facts about an application the state needs on first delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppMeta {
    pub total_tasks: usize,
    pub deadline_cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AppProgress {
    pub total_tasks: usize,
    pub delivered: usize,
    pub finished: usize,
    pub first_delivery_cycle: u64,
    pub deadline_cycles: u64,
    pub deadline_missed: bool,
}

/// Archive record of a completed application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FinishedApp {
    pub app: AppId,
    pub first_delivery_cycle: u64,
    pub completion_cycle: u64,
    pub deadline_cycles: u64,
}

impl FinishedApp {
    pub fn makespan(&self) -> u64 {
        self.completion_cycle - self.first_delivery_cycle
    }

    pub fn deadline_met(&self) -> bool {
        self.makespan() <= self.deadline_cycles
    }
}

/// Single source of truth for a simulation.
///
/// Every delivered task sits in exactly one of the three ledgers:
/// `remaining` (delivered, not committed), `running` (queued on or executing
/// on a core) and `finished`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub(crate) cycle: u64,
    pub(crate) cycle_duration_s: f64,
    pub(crate) remaining: BTreeMap<TaskId, TaskSpec>,
    pub(crate) running: BTreeMap<TaskId, RunningEntry>,
    pub(crate) finished: BTreeSet<TaskId>,
    pub(crate) active_apps: BTreeMap<AppId, AppProgress>,
    pub(crate) finished_apps: Vec<FinishedApp>,
    pub(crate) devices: BTreeMap<DeviceId, DeviceSpec>,
    pub(crate) delivered_total: u64,
    pub(crate) next_device_id: u32,
}

impl SimState {
    pub fn new(devices: impl IntoIterator<Item = DeviceSpec>, cycle_duration_s: f64) -> Self {
        let devices: BTreeMap<DeviceId, DeviceSpec> = devices.into_iter().map(|d| (d.id, d)).collect();
        let next_device_id = devices.keys().next_back().map_or(0, |id| id.0 + 1);
        Self {
            cycle: 0,
            cycle_duration_s,
            remaining: BTreeMap::new(),
            running: BTreeMap::new(),
            finished: BTreeSet::new(),
            active_apps: BTreeMap::new(),
            finished_apps: Vec::new(),
            devices,
            delivered_total: 0,
            next_device_id,
        }
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn cycle_duration_s(&self) -> f64 {
        self.cycle_duration_s
    }

    pub fn remaining_tasks(&self) -> &BTreeMap<TaskId, TaskSpec> {
        &self.remaining
    }

    pub fn running_tasks(&self) -> &BTreeMap<TaskId, RunningEntry> {
        &self.running
    }

    pub fn finished_tasks(&self) -> &BTreeSet<TaskId> {
        &self.finished
    }

    pub fn active_apps(&self) -> &BTreeMap<AppId, AppProgress> {
        &self.active_apps
    }

    pub fn finished_apps(&self) -> &[FinishedApp] {
        &self.finished_apps
    }

    pub fn devices(&self) -> &BTreeMap<DeviceId, DeviceSpec> {
        &self.devices
    }

    pub fn device(&self, id: DeviceId) -> Option<&DeviceSpec> {
        self.devices.get(&id)
    }

    pub fn delivered_total(&self) -> u64 {
        self.delivered_total
    }

    /// Spec of a delivered, unfinished task.
    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        self.remaining
            .get(&id)
            .or_else(|| self.running.get(&id).map(|e| &e.task))
    }

    /// Whether every predecessor of `task` is in the finished ledger.
    pub fn is_ready(&self, task: &TaskSpec) -> bool {
        task.predecessors.iter().all(|p| self.finished.contains(p))
    }

    /// Total energy left across battery-powered devices.
    pub fn total_battery_wh(&self) -> f64 {
        self.devices.values().filter_map(|d| d.battery_wh).sum()
    }

    pub fn queued_tasks(&self) -> usize {
        self.devices
            .values()
            .flat_map(|d| &d.cores)
            .map(|c| c.queue.len())
            .sum()
    }

    /// Live-object count: ledger sizes, queue occupancy and open applications.
    pub fn live_objects(&self) -> usize {
        self.remaining.len()
            + self.running.len()
            + self.finished.len()
            + self.queued_tasks()
            + self.active_apps.len()
    }

    /// Adds a delivered task to the remaining ledger.
    pub fn deliver(&mut self, task: TaskSpec, meta: AppMeta) {
        let cycle = self.cycle;
        let progress = self.active_apps.entry(task.app).or_insert(AppProgress {
            total_tasks: meta.total_tasks,
            delivered: 0,
            finished: 0,
            first_delivery_cycle: cycle,
            deadline_cycles: meta.deadline_cycles,
            deadline_missed: false,
        });
        progress.delivered += 1;
        self.delivered_total += 1;
        self.remaining.insert(task.id, task);
    }

    /// Moves a remaining task straight to the finished ledger without
    /// executing it. Intended for replaying traces and building test states.
    pub fn mark_finished(&mut self, task: TaskId) -> bool {
        let Some(spec) = self.remaining.remove(&task) else {
            return false;
        };
        self.finish(spec.app, task);
        true
    }

    pub(crate) fn finish(&mut self, app: AppId, task: TaskId) {
        self.finished.insert(task);
        if let Some(p) = self.active_apps.get_mut(&app) {
            p.finished += 1;
        }
    }

    pub(crate) fn alloc_device_id(&mut self) -> DeviceId {
        let id = DeviceId(self.next_device_id);
        self.next_device_id += 1;
        id
    }

    pub(crate) fn add_device(&mut self, mut device: DeviceSpec) -> DeviceId {
        if device.id.0 >= self.next_device_id {
            self.next_device_id = device.id.0 + 1;
        }
        device.occupied = 0;
        for core in &mut device.cores {
            core.queue.clear();
            core.running = None;
            core.backlog_cycles = 0;
        }
        let id = device.id;
        self.devices.insert(id, device);
        id
    }

    /// Remaining → running, placing the task at the back of the core's queue.
    /// Admission must already have been checked.
    pub(crate) fn enqueue(&mut self, task: TaskId, device: DeviceId, core: usize) {
        let spec = self.remaining.remove(&task).expect("enqueue of a non-remaining task");
        let dev = self.devices.get_mut(&device).expect("enqueue onto unknown device");
        let slot = &mut dev.cores[core];
        slot.queue.push_back(task);
        slot.backlog_cycles += spec.execution_cycles(slot.speed);
        dev.occupied += 1;
        self.running.insert(task, RunningEntry { task: spec, device, core });
    }

    /// Returns every queued and executing task of `device` to the remaining
    /// ledger. Work in progress is lost. Returned ids are ascending.
    pub(crate) fn evict_device_tasks(&mut self, device: DeviceId) -> Vec<TaskId> {
        let Some(dev) = self.devices.get_mut(&device) else {
            return Vec::new();
        };
        let mut evicted = Vec::with_capacity(dev.occupied);
        for core in &mut dev.cores {
            evicted.extend(core.running.take().map(|r| r.task));
            evicted.extend(core.queue.drain(..));
            core.backlog_cycles = 0;
        }
        dev.occupied = 0;
        evicted.sort();
        for id in &evicted {
            let entry = self.running.remove(id).expect("evicted task was in the running ledger");
            self.remaining.insert(*id, entry.task);
        }
        evicted
    }

    /// Immutable view for schedulers.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot(Arc::new(self.clone()))
    }

    /// Stable content hash. `f64` fields hash by bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.cycle.hash(&mut h);
        self.cycle_duration_s.to_bits().hash(&mut h);
        self.remaining.hash(&mut h);
        self.running.hash(&mut h);
        self.finished.hash(&mut h);
        self.active_apps.hash(&mut h);
        self.finished_apps.hash(&mut h);
        self.delivered_total.hash(&mut h);
        self.next_device_id.hash(&mut h);
        for dev in self.devices.values() {
            dev.id.hash(&mut h);
            dev.tier.hash(&mut h);
            dev.cores.hash(&mut h);
            dev.battery_wh.map(f64::to_bits).hash(&mut h);
            dev.active_power_w.to_bits().hash(&mut h);
            dev.idle_power_w.to_bits().hash(&mut h);
            dev.safety_capability.hash(&mut h);
            dev.elastic_core_cap.hash(&mut h);
            dev.occupied.hash(&mut h);
        }
        h.finish()
    }

    /// Cheap conservation check, run every cycle.
    pub fn check_conservation(&self) -> Result<(), String> {
        let held = (self.remaining.len() + self.running.len() + self.finished.len()) as u64;
        if held != self.delivered_total {
            return Err(format!(
                "conservation: delivered {} != remaining {} + running {} + finished {}",
                self.delivered_total,
                self.remaining.len(),
                self.running.len(),
                self.finished.len()
            ));
        }
        Ok(())
    }

    /// Full structural check of every state invariant. Linear in the state size.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.check_conservation()?;
        for id in self.remaining.keys() {
            if self.running.contains_key(id) || self.finished.contains(id) {
                return Err(format!("task {id} is in more than one ledger"));
            }
        }
        for id in self.running.keys() {
            if self.finished.contains(id) {
                return Err(format!("task {id} is both running and finished"));
            }
        }

        let mut placed = 0usize;
        for dev in self.devices.values() {
            let mut occupied = 0;
            for (ci, core) in dev.cores.iter().enumerate() {
                if let Some(cap) = core.queue_capacity {
                    if core.queue.len() > cap {
                        return Err(format!("device {} core {ci} queue exceeds capacity", dev.id));
                    }
                }
                let mut backlog = 0;
                if let Some(slot) = core.running {
                    if slot.remaining_cycles == 0 {
                        return Err(format!("device {} core {ci} runs a finished task", dev.id));
                    }
                    backlog += slot.remaining_cycles;
                }
                for id in core.running.iter().map(|r| &r.task).chain(core.queue.iter()) {
                    match self.running.get(id) {
                        Some(e) if e.device == dev.id && e.core == ci => {
                            if core.running.is_none_or(|r| r.task != *id) {
                                backlog += e.task.execution_cycles(core.speed);
                            }
                        }
                        _ => {
                            return Err(format!(
                                "task {id} on device {} core {ci} disagrees with the running ledger",
                                dev.id
                            ))
                        }
                    }
                    occupied += 1;
                }
                if backlog != core.backlog_cycles {
                    return Err(format!(
                        "device {} core {ci} backlog {} != recomputed {backlog}",
                        dev.id, core.backlog_cycles
                    ));
                }
            }
            if occupied != dev.occupied {
                return Err(format!("device {} occupancy counter is stale", dev.id));
            }
            placed += occupied;
        }
        if placed != self.running.len() {
            return Err(format!(
                "{} running-ledger tasks but {placed} placed on cores",
                self.running.len()
            ));
        }

        for (app, p) in &self.active_apps {
            if p.finished > p.delivered || p.delivered > p.total_tasks {
                return Err(format!("application {app} progress counters are inconsistent"));
            }
        }
        Ok(())
    }
}

/// Deep, immutable copy of a [`SimState`].
#[derive(Debug, Clone)]
pub struct Snapshot(Arc<SimState>);

impl Snapshot {
    /// Shares an engine-owned state. The engine mutates through
    /// `Arc::make_mut`, so a snapshot that outlives the cycle keeps its copy.
    pub(crate) fn shared(state: &Arc<SimState>) -> Self {
        Snapshot(Arc::clone(state))
    }

    pub fn object_count(&self) -> usize {
        self.0.devices.values().map(|d| 1 + d.cores.len()).sum::<usize>()
            + self.0.remaining.len()
            + self.0.running.len()
            + self.0.finished.len()
    }
}

impl Deref for Snapshot {
    type Target = SimState;

    fn deref(&self) -> &SimState {
        &self.0
    }
}

impl PartialEq for Snapshot {
    fn eq(&self, other: &Self) -> bool {
        *self.0 == *other.0
    }
}
