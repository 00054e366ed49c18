use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;

use super::{Scheduler, SchedulerError};
use crate::model::{Assignment, CoreState, DeviceId, DeviceSpec, TaskSpec};
use crate::rng::SimRng;
use crate::state::SimState;

/// What this agent has already proposed in the current call, per core.
/// Other agents' proposals are invisible; the engine resolves conflicts.
#[derive(Default)]
struct OwnLoad {
    per_device: HashMap<DeviceId, Vec<(usize, u64)>>,
}

impl OwnLoad {
    fn add(&mut self, device: &DeviceSpec, core: usize, cycles: u64) {
        let v = self.per_device.entry(device.id).or_insert_with(|| vec![(0, 0); device.cores.len()]);
        v[core].0 += 1;
        v[core].1 += cycles;
    }

    /// Cores of `device` that would admit `task` once this agent's earlier
    /// proposals land, with the agent's extra backlog on each.
    fn admissible<'a>(
        &'a self,
        task: &'a TaskSpec,
        device: &'a DeviceSpec,
    ) -> impl Iterator<Item = (usize, &'a CoreState, u64)> + 'a {
        let usable = device.is_schedulable() && task.safety_level <= device.safety_capability;
        let own = self.per_device.get(&device.id);
        device.cores.iter().enumerate().filter(move |_| usable).filter_map(move |(ci, core)| {
            let (n, extra) = own.map_or((0, 0), |v| v[ci]);
            (core.free_slots() > n).then_some((ci, core, extra))
        })
    }
}

/// Uniform choice among admissible cores.
pub struct RandomScheduler {
    agent: usize,
    rng: SimRng,
}

impl RandomScheduler {
    pub fn new(agent: usize, seed: u64) -> Self {
        Self { agent, rng: SimRng::seed_from_u64(seed) }
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> &str {
        "random"
    }

    fn propose(&mut self, state: &SimState, tasks: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError> {
        let mut own = OwnLoad::default();
        let mut out = Vec::with_capacity(tasks.len());
        let mut options = Vec::new();
        for &task in tasks {
            options.clear();
            for dev in state.devices().values() {
                options.extend(own.admissible(task, dev).map(|(ci, core, _)| (dev, ci, core.speed)));
            }
            if let Some(&(dev, core, speed)) = options.choose(&mut self.rng) {
                own.add(dev, core, task.execution_cycles(speed));
                out.push(Assignment { task: task.id, device: dev.id, core, agent: self.agent });
            }
        }
        Ok(out)
    }
}

/// Earliest estimated finish time: current backlog plus own proposals plus
/// the task's execution cycles. Ties go to the lowest device id, then core.
pub struct GreedyEftScheduler {
    agent: usize,
}

impl GreedyEftScheduler {
    pub fn new(agent: usize) -> Self {
        Self { agent }
    }
}

impl Scheduler for GreedyEftScheduler {
    fn name(&self) -> &str {
        "greedy_eft"
    }

    fn propose(&mut self, state: &SimState, tasks: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError> {
        let mut own = OwnLoad::default();
        let mut out = Vec::with_capacity(tasks.len());
        for &task in tasks {
            let mut best: Option<(u64, &DeviceSpec, usize, u64)> = None;
            for dev in state.devices().values() {
                for (ci, core, extra) in own.admissible(task, dev) {
                    let exec = task.execution_cycles(core.speed);
                    let finish = core.backlog_cycles() + extra + exec;
                    if best.is_none_or(|b| finish < b.0) {
                        best = Some((finish, dev, ci, exec));
                    }
                }
            }
            if let Some((_, dev, core, exec)) = best {
                own.add(dev, core, exec);
                out.push(Assignment { task: task.id, device: dev.id, core, agent: self.agent });
            }
        }
        Ok(out)
    }
}

/// Lowest active energy for the task alone, ties broken by estimated finish
/// time, then device id and core.
pub struct MinEnergyScheduler {
    agent: usize,
}

impl MinEnergyScheduler {
    pub fn new(agent: usize) -> Self {
        Self { agent }
    }
}

impl Scheduler for MinEnergyScheduler {
    fn name(&self) -> &str {
        "min_energy"
    }

    fn propose(&mut self, state: &SimState, tasks: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError> {
        let mut own = OwnLoad::default();
        let mut out = Vec::with_capacity(tasks.len());
        for &task in tasks {
            let mut best: Option<(f64, u64, &DeviceSpec, usize, u64)> = None;
            for dev in state.devices().values() {
                for (ci, core, extra) in own.admissible(task, dev) {
                    let exec = task.execution_cycles(core.speed);
                    let energy = dev.active_power_w * exec as f64 * state.cycle_duration_s();
                    let finish = core.backlog_cycles() + extra + exec;
                    let better = match best {
                        None => true,
                        Some((e, f, ..)) => energy < e || (energy == e && finish < f),
                    };
                    if better {
                        best = Some((energy, finish, dev, ci, exec));
                    }
                }
            }
            if let Some((_, _, dev, core, exec)) = best {
                own.add(dev, core, exec);
                out.push(Assignment { task: task.id, device: dev.id, core, agent: self.agent });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{admission_check, AppId, TaskId, Tier};
    use crate::state::AppMeta;

    fn task(id: u32, load: u64, safety: u8) -> TaskSpec {
        TaskSpec {
            id: TaskId(id),
            app: AppId(0),
            compute_load: load,
            input_size_mb: 1,
            output_size_mb: 1,
            safety_level: safety,
            predecessors: vec![],
        }
    }

    fn fleet() -> SimState {
        let slow = DeviceSpec::new(DeviceId(0), Tier::Iot, 1, 1, Some(1), Some(10.0), 1.0, 0.1, 0);
        let fast = DeviceSpec::new(DeviceId(1), Tier::Mec, 1, 4, Some(2), Some(10.0), 8.0, 0.1, 3);
        let mut s = SimState::new([slow, fast], 0.001);
        let meta = AppMeta { total_tasks: 4, deadline_cycles: 100 };
        for t in [task(0, 8, 0), task(1, 8, 0), task(2, 8, 3), task(3, 8, 0)] {
            s.deliver(t, meta);
        }
        s
    }

    #[test]
    fn greedy_prefers_fast_core_until_its_backlog_grows() {
        let s = fleet();
        let tasks: Vec<TaskSpec> = s.remaining_tasks().values().cloned().collect();
        let refs: Vec<&TaskSpec> = tasks.iter().collect();
        let out = GreedyEftScheduler::new(3).propose(&s, &refs).unwrap();
        let placed: Vec<(u32, u32)> = out.iter().map(|a| (a.task.0, a.device.0)).collect();
        // fast: 2 cycles each, queue of 2; slow: 8 cycles, queue of 1
        assert_eq!(placed, vec![(0, 1), (1, 1), (3, 0)]);
        assert!(out.iter().all(|a| a.agent == 3));
    }

    #[test]
    fn min_energy_uses_the_cheap_device_first() {
        let s = fleet();
        let tasks: Vec<TaskSpec> = s.remaining_tasks().values().cloned().collect();
        let refs: Vec<&TaskSpec> = tasks.iter().collect();
        let out = MinEnergyScheduler::new(0).propose(&s, &refs).unwrap();
        let placed: Vec<(u32, u32)> = out.iter().map(|a| (a.task.0, a.device.0)).collect();
        // slow costs 8 J-units, fast costs 16
        assert_eq!(placed, vec![(0, 0), (1, 1), (2, 1)]);
    }

    #[test]
    fn random_only_proposes_admissible_cores() {
        let s = fleet();
        let tasks: Vec<TaskSpec> = s.remaining_tasks().values().cloned().collect();
        let refs: Vec<&TaskSpec> = tasks.iter().collect();
        for seed in 0..20 {
            let out = RandomScheduler::new(0, seed).propose(&s, &refs).unwrap();
            assert_eq!(out.len(), 3);
            for a in &out {
                let t = s.task(a.task).unwrap();
                assert!(admission_check(t, s.device(a.device).unwrap(), a.core).is_ok());
            }
            let safe = out.iter().find(|a| a.task == TaskId(2));
            assert!(safe.is_none_or(|a| a.device == DeviceId(1)));
        }
    }
}
