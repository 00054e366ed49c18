use crate::model::{admission_check, AppId, Assignment, CoreState, DeviceId, RejectReason, RunningSlot, TaskId};
use crate::state::{FinishedApp, SimState};

/// Validates one proposal against the live state and, if it passes, moves
/// the task from remaining to running at the back of the core's queue.
pub fn commit_assignment(state: &mut SimState, a: &Assignment) -> Result<(), RejectReason> {
    let task = state.remaining.get(&a.task).ok_or(RejectReason::Unready)?;
    if !state.is_ready(task) {
        return Err(RejectReason::Unready);
    }
    let device = state.devices.get(&a.device).ok_or(RejectReason::UnknownDevice)?;
    admission_check(task, device, a.core)?;
    state.enqueue(a.task, a.device, a.core);
    Ok(())
}

/// A task taken off, or finished on, a core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreEvent {
    pub task: TaskId,
    pub device: DeviceId,
    pub core: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvanceOutcome {
    pub started: Vec<CoreEvent>,
    pub completed: Vec<CoreEvent>,
    /// Energy drawn this cycle, per device in id order.
    pub energy_wh: Vec<(DeviceId, f64)>,
    /// Devices whose battery hit zero this cycle.
    pub depleted: Vec<DeviceId>,
    /// Tasks returned to the remaining ledger by depleted devices.
    pub requeued: Vec<(DeviceId, TaskId)>,
}

impl AdvanceOutcome {
    pub fn total_energy_wh(&self) -> f64 {
        self.energy_wh.iter().map(|(_, e)| e).sum()
    }
}

/// One cycle of execution on every core: idle cores start their queue head,
/// every running task loses one cycle, and tasks reaching zero finish.
/// Each device then draws `(busy * active + idle * idle_power) * dt / 3600`
/// Wh; a battery that runs dry makes the device unschedulable and hands its
/// work back to the remaining ledger.
pub fn advance_execution(state: &mut SimState) -> AdvanceOutcome {
    let mut out = AdvanceOutcome::default();
    let dt_h = state.cycle_duration_s / 3600.0;
    let SimState { devices, running, .. } = &mut *state;
    for dev in devices.values_mut() {
        let mut busy = 0usize;
        if dev.occupied > 0 {
            for (ci, core) in dev.cores.iter_mut().enumerate() {
                if core.running.is_none() {
                    if let Some(task) = core.queue.pop_front() {
                        let spec = &running[&task].task;
                        core.running = Some(RunningSlot { task, remaining_cycles: spec.execution_cycles(core.speed) });
                        out.started.push(CoreEvent { task, device: dev.id, core: ci });
                    }
                }
                if let Some(slot) = core.running.as_mut() {
                    busy += 1;
                    slot.remaining_cycles -= 1;
                    core.backlog_cycles -= 1;
                    if slot.remaining_cycles == 0 {
                        out.completed.push(CoreEvent { task: slot.task, device: dev.id, core: ci });
                        core.running = None;
                        dev.occupied -= 1;
                    }
                }
            }
        }
        let idle = dev.cores.len() - busy;
        let draw = (busy as f64 * dev.active_power_w + idle as f64 * dev.idle_power_w) * dt_h;
        let used = match dev.battery_wh.as_mut() {
            Some(b) => {
                let before = *b;
                let after = (before - draw).max(0.0);
                *b = after;
                if before > 0.0 && after <= 0.0 {
                    out.depleted.push(dev.id);
                }
                before - after
            }
            None => draw,
        };
        out.energy_wh.push((dev.id, used));
    }
    for ev in &out.completed {
        let entry = state.running.remove(&ev.task).expect("completed task was running");
        state.finish(entry.task.app, ev.task);
    }
    for &id in &out.depleted {
        for task in state.evict_device_tasks(id) {
            out.requeued.push((id, task));
        }
    }
    out
}

/// Marks applications whose makespan has just exceeded their deadline.
/// Each application is reported at most once.
pub fn check_deadlines(state: &mut SimState) -> Vec<AppId> {
    let now = state.cycle + 1;
    let mut missed = Vec::new();
    for (&app, p) in state.active_apps.iter_mut() {
        if !p.deadline_missed && now - p.first_delivery_cycle > p.deadline_cycles {
            p.deadline_missed = true;
            missed.push(app);
        }
    }
    missed
}

/// Archives every fully delivered, fully finished application. Completion
/// is stamped at the end of the current cycle.
pub fn finalize_applications(state: &mut SimState) -> Vec<FinishedApp> {
    let completion_cycle = state.cycle + 1;
    let done: Vec<AppId> = state
        .active_apps
        .iter()
        .filter(|(_, p)| p.delivered == p.total_tasks && p.finished == p.total_tasks)
        .map(|(&a, _)| a)
        .collect();
    let mut out = Vec::with_capacity(done.len());
    for app in done {
        let p = state.active_apps.remove(&app).expect("listed above");
        let record = FinishedApp {
            app,
            first_delivery_cycle: p.first_delivery_cycle,
            completion_cycle,
            deadline_cycles: p.deadline_cycles,
        };
        state.finished_apps.push(record);
        out.push(record);
    }
    out
}

/// Grows each elastic device until it has at least `demand` idle cores or
/// reaches its cap. New cores copy the first core's speed and queue bound.
pub fn provision_elastic(state: &mut SimState, demand: usize) {
    if demand == 0 {
        return;
    }
    for dev in state.devices.values_mut() {
        let Some(cap) = dev.elastic_core_cap else { continue };
        if !dev.is_schedulable() {
            continue;
        }
        let idle = if dev.occupied == 0 { dev.cores.len() } else { dev.cores.iter().filter(|c| c.is_idle()).count() };
        let want = demand.saturating_sub(idle).min(cap.saturating_sub(dev.cores.len()));
        if want > 0 {
            let (speed, qcap) = dev.cores.first().map_or((1, None), |c| (c.speed, c.queue_capacity));
            dev.cores.extend((0..want).map(|_| CoreState::new(speed, qcap)));
        }
    }
}
