//! Run metrics: per-cycle counters, per-application makespans, per-device
//! energy meters, periodic live-object samples and the churn timeline.

mod io;
mod plot;

use std::collections::BTreeMap;

use crate::churn::{ChurnAction, ChurnRecord};
use crate::engine::CycleReport;
use crate::model::{AppId, DeviceId, DeviceSpec, Tier};
use crate::state::{FinishedApp, SimState};

pub use io::{export_metrics, load_metrics, DeviceRecord, MetricsIoError, MetricsTables, APPS_CSV, CHURN_CSV, CYCLES_CSV, DEVICES_CSV, MONITOR_CSV};
pub use plot::{plot_data, PlotKind, UnknownPlotKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub delivered: usize,
    pub scheduled: usize,
    pub rejected: usize,
    pub completed: usize,
    pub apps_completed: usize,
    pub fleet_size: usize,
    pub total_battery_wh: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppRecord {
    pub app: AppId,
    pub arrival_cycle: u64,
    pub completion_cycle: u64,
    pub makespan_cycles: u64,
    pub deadline_met: bool,
}

impl From<&FinishedApp> for AppRecord {
    fn from(f: &FinishedApp) -> Self {
        Self {
            app: f.app,
            arrival_cycle: f.first_delivery_cycle,
            completion_cycle: f.completion_cycle,
            makespan_cycles: f.makespan(),
            deadline_met: f.deadline_met(),
        }
    }
}

/// Energy drawn by one device over its time in the fleet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceMeter {
    pub tier: Tier,
    pub energy_wh: f64,
    pub joined_cycle: u64,
    pub left_cycle: Option<u64>,
    pub initial_battery_wh: Option<f64>,
}

/// Live-object proxy sampled at the monitor interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorSample {
    pub cycle: u64,
    pub live_objects: usize,
    pub remaining: usize,
    pub running: usize,
    pub finished: usize,
    pub queued: usize,
    pub active_apps: usize,
}

impl MonitorSample {
    pub fn of(cycle: u64, state: &SimState) -> Self {
        Self {
            cycle,
            live_objects: state.live_objects(),
            remaining: state.remaining_tasks().len(),
            running: state.running_tasks().len(),
            finished: state.finished_tasks().len(),
            queued: state.queued_tasks(),
            active_apps: state.active_apps().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("cycle {got} recorded after cycle {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("application {0} has not finished")]
    Unfinished(AppId),
    #[error("no meter for device {0}")]
    UnknownDevice(DeviceId),
}

/// Append-only metric store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsStore {
    pub cycles: Vec<CycleRecord>,
    pub apps: Vec<AppRecord>,
    app_index: BTreeMap<AppId, usize>,
    pub meters: BTreeMap<DeviceId, DeviceMeter>,
    pub monitor: Vec<MonitorSample>,
    pub churn: Vec<ChurnRecord>,
    pub deadline_misses: u64,
}

impl MetricsStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store pre-populated with meters for the current fleet.
    pub fn for_state(state: &SimState) -> Self {
        let mut m = Self::new();
        for dev in state.devices().values() {
            m.register_device(dev, state.cycle());
        }
        m
    }

    pub fn record_cycle(&mut self, report: &CycleReport, state: &SimState) -> Result<(), MetricsError> {
        if let Some(last) = self.cycles.last() {
            if report.cycle <= last.cycle {
                return Err(MetricsError::OutOfOrder { last: last.cycle, got: report.cycle });
            }
        }
        self.cycles.push(CycleRecord {
            cycle: report.cycle,
            delivered: report.tasks_delivered,
            scheduled: report.tasks_scheduled,
            rejected: report.tasks_rejected,
            completed: report.tasks_completed,
            apps_completed: report.apps_completed,
            fleet_size: state.devices().len(),
            total_battery_wh: state.total_battery_wh(),
            wall_time_s: report.wall_time_s,
        });
        Ok(())
    }

    pub fn record_app(&mut self, app: &FinishedApp) {
        self.app_index.insert(app.app, self.apps.len());
        self.apps.push(app.into());
    }

    pub fn register_device(&mut self, dev: &DeviceSpec, cycle: u64) {
        self.meters.insert(
            dev.id,
            DeviceMeter {
                tier: dev.tier,
                energy_wh: 0.0,
                joined_cycle: cycle,
                left_cycle: None,
                initial_battery_wh: dev.battery_wh,
            },
        );
    }

    pub fn retire_device(&mut self, id: DeviceId, cycle: u64) {
        if let Some(m) = self.meters.get_mut(&id) {
            m.left_cycle = Some(cycle);
        }
    }

    pub fn add_energy(&mut self, id: DeviceId, wh: f64) {
        if let Some(m) = self.meters.get_mut(&id) {
            m.energy_wh += wh;
        }
    }

    pub fn record_churn(&mut self, record: ChurnRecord) {
        self.churn.push(record);
    }

    pub fn record_monitor(&mut self, sample: MonitorSample) {
        self.monitor.push(sample);
    }

    pub fn makespan(&self, app: AppId) -> Result<u64, MetricsError> {
        self.app_index
            .get(&app)
            .map(|&i| self.apps[i].makespan_cycles)
            .ok_or(MetricsError::Unfinished(app))
    }

    pub fn mean_makespan(&self) -> Option<f64> {
        (!self.apps.is_empty())
            .then(|| self.apps.iter().map(|a| a.makespan_cycles as f64).sum::<f64>() / self.apps.len() as f64)
    }

    /// Energy of one device, or of every device ever metered for `None`.
    pub fn energy_total(&self, device: Option<DeviceId>) -> Result<f64, MetricsError> {
        match device {
            Some(id) => self.meters.get(&id).map(|m| m.energy_wh).ok_or(MetricsError::UnknownDevice(id)),
            None => Ok(self.meters.values().map(|m| m.energy_wh).sum()),
        }
    }

    /// Cycle after the last recorded one.
    pub fn end_cycle(&self) -> u64 {
        self.cycles.last().map_or(0, |c| c.cycle + 1)
    }

    pub fn lifetime_cycles(&self, id: DeviceId) -> Option<u64> {
        let m = self.meters.get(&id)?;
        Some(m.left_cycle.unwrap_or(self.end_cycle()).saturating_sub(m.joined_cycle))
    }

    pub fn churn_totals(&self) -> (u64, u64) {
        let added = self.churn.iter().filter(|c| c.action == ChurnAction::Add).count() as u64;
        (added, self.churn.len() as u64 - added)
    }
}
