use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{topological_order, CycleError};
use crate::model::{ApplicationSpec, AppId, TaskSpec};

/// Cadence and size limits of task delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub interval_cycles: u64,
    pub max_tasks: usize,
    pub max_apps: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { interval_cycles: 15, max_tasks: 1_000, max_apps: 40 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.interval_cycles == 0 || self.max_tasks == 0 || self.max_apps == 0 {
            return Err("window interval_cycles, max_tasks and max_apps must all be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PendingApp {
    app: AppId,
    /// Undelivered tasks, in topological order.
    tasks: VecDeque<TaskSpec>,
}

/// Backlog of applications not yet fully delivered.
#[derive(Debug, Clone, Default)]
pub struct WorkloadCursor {
    backlog: VecDeque<PendingApp>,
    pending_tasks: usize,
}

impl WorkloadCursor {
    /// Queues applications in the given order. Each application's tasks are
    /// delivered in topological order, so a truncated partial delivery is
    /// always closed under predecessors.
    pub fn new(apps: impl IntoIterator<Item = ApplicationSpec>) -> Result<Self, CycleError> {
        let mut backlog = VecDeque::new();
        let mut pending_tasks = 0;
        for app in apps {
            let order = topological_order(&app)?;
            let mut by_id: std::collections::HashMap<_, _> =
                app.tasks.into_iter().map(|t| (t.id, t)).collect();
            let tasks: VecDeque<TaskSpec> =
                order.iter().map(|id| by_id.remove(id).expect("ordered id exists")).collect();
            pending_tasks += tasks.len();
            if !tasks.is_empty() {
                backlog.push_back(PendingApp { app: app.id, tasks });
            }
        }
        Ok(Self { backlog, pending_tasks })
    }

    pub fn is_exhausted(&self) -> bool {
        self.backlog.is_empty()
    }

    pub fn pending_tasks(&self) -> usize {
        self.pending_tasks
    }

    pub fn pending_apps(&self) -> usize {
        self.backlog.len()
    }

    /// Application at the head of the backlog.
    pub fn head(&self) -> Option<AppId> {
        self.backlog.front().map(|p| p.app)
    }
}

/// Tasks delivered at `cycle`: nothing off-interval, otherwise whole
/// applications from the head of the backlog until either cap is reached.
/// The batch is truncated first, then shuffled.
pub fn next_window<R: Rng + ?Sized>(
    cursor: &mut WorkloadCursor,
    cfg: &WindowConfig,
    cycle: u64,
    rng: &mut R,
) -> Vec<TaskSpec> {
    if cfg.interval_cycles == 0 || !cycle.is_multiple_of(cfg.interval_cycles) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut apps = 0;
    while apps < cfg.max_apps && out.len() < cfg.max_tasks {
        let Some(front) = cursor.backlog.front_mut() else {
            break;
        };
        let take = front.tasks.len().min(cfg.max_tasks - out.len());
        out.extend(front.tasks.drain(..take));
        apps += 1;
        if front.tasks.is_empty() {
            cursor.backlog.pop_front();
        }
    }
    cursor.pending_tasks -= out.len();
    out.shuffle(rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskId;
    use crate::rng::stream_rng;
    use std::collections::BTreeSet;

    fn apps(count: u32, per_app: u32) -> Vec<ApplicationSpec> {
        (0..count)
            .map(|a| ApplicationSpec {
                id: AppId(a),
                deadline_cycles: 100,
                tasks: (0..per_app)
                    .map(|i| TaskSpec {
                        id: TaskId(a * per_app + i),
                        app: AppId(a),
                        compute_load: 1,
                        input_size_mb: 1,
                        output_size_mb: 1,
                        safety_level: 0,
                        predecessors: vec![],
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn off_interval_cycle_delivers_nothing() {
        let mut cursor = WorkloadCursor::new(apps(3, 30)).unwrap();
        let w = next_window(&mut cursor, &WindowConfig::default(), 7, &mut stream_rng(1, 3));
        assert!(w.is_empty());
        assert_eq!(cursor.pending_tasks(), 90);
    }

    #[test]
    fn small_backlog_is_delivered_whole_and_shuffled() {
        let mut cursor = WorkloadCursor::new(apps(3, 30)).unwrap();
        let w = next_window(&mut cursor, &WindowConfig::default(), 15, &mut stream_rng(1, 3));
        let ids: Vec<TaskId> = w.iter().map(|t| t.id).collect();
        let set: BTreeSet<TaskId> = ids.iter().copied().collect();
        assert_eq!(set, (0..90).map(TaskId).collect());
        let sorted: Vec<TaskId> = (0..90).map(TaskId).collect();
        assert_ne!(ids, sorted);
        assert!(cursor.is_exhausted());
    }

    #[test]
    fn caps_bound_a_large_backlog() {
        let mut cursor = WorkloadCursor::new(apps(50, 30)).unwrap();
        let cfg = WindowConfig::default();
        let w = next_window(&mut cursor, &cfg, 0, &mut stream_rng(1, 3));
        assert_eq!(w.len(), 1_000);
        let apps: BTreeSet<AppId> = w.iter().map(|t| t.app).collect();
        assert!(apps.len() <= 40);
        // 33 whole apps plus 10 tasks of the 34th; the remainder heads the backlog
        assert_eq!(apps.len(), 34);
        assert_eq!(cursor.head(), Some(AppId(33)));
        let next = next_window(&mut cursor, &cfg, 15, &mut stream_rng(1, 3));
        assert_eq!(next.len(), 500);
        assert!(next.iter().all(|t| !w.iter().any(|u| u.id == t.id)));
    }

    #[test]
    fn app_cap_binds_before_task_cap() {
        let mut cursor = WorkloadCursor::new(apps(10, 2)).unwrap();
        let cfg = WindowConfig { interval_cycles: 1, max_tasks: 100, max_apps: 3 };
        let w = next_window(&mut cursor, &cfg, 4, &mut stream_rng(1, 3));
        assert_eq!(w.len(), 6);
        assert_eq!(cursor.pending_apps(), 7);
    }
}
