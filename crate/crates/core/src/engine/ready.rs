use std::collections::{BTreeSet, HashMap};

use crate::model::{ApplicationSpec, TaskId, TaskSpec};
use crate::state::SimState;

/// Incremental view of which remaining tasks are ready, so a cycle does not
/// rescan tasks still blocked on predecessors.
#[derive(Debug, Clone, Default)]
pub(crate) struct ReadyTracker {
    successors: HashMap<TaskId, Vec<TaskId>>,
    /// Delivered, uncommitted tasks and their count of unfinished predecessors.
    waiting: HashMap<TaskId, usize>,
    ready: BTreeSet<TaskId>,
}

impl ReadyTracker {
    pub(crate) fn new(apps: &[ApplicationSpec]) -> Self {
        let mut successors: HashMap<TaskId, Vec<TaskId>> = HashMap::new();
        for t in apps.iter().flat_map(|a| &a.tasks) {
            for p in &t.predecessors {
                successors.entry(*p).or_default().push(t.id);
            }
        }
        Self { successors, ..Self::default() }
    }

    pub(crate) fn delivered(&mut self, task: &TaskSpec, state: &SimState) {
        let blocked = task.predecessors.iter().filter(|p| !state.finished_tasks().contains(p)).count();
        if blocked == 0 {
            self.ready.insert(task.id);
        } else {
            self.waiting.insert(task.id, blocked);
        }
    }

    pub(crate) fn committed(&mut self, task: TaskId) {
        self.ready.remove(&task);
    }

    pub(crate) fn finished(&mut self, task: TaskId) {
        for s in self.successors.get(&task).into_iter().flatten() {
            if let Some(n) = self.waiting.get_mut(s) {
                *n -= 1;
                if *n == 0 {
                    self.waiting.remove(s);
                    self.ready.insert(*s);
                }
            }
        }
    }

    /// A committed task handed back to the remaining ledger.
    pub(crate) fn requeued(&mut self, task: TaskId) {
        self.ready.insert(task);
    }

    pub(crate) fn ready(&self) -> &BTreeSet<TaskId> {
        &self.ready
    }

    /// Compares against a full scan of the remaining ledger.
    pub(crate) fn verify(&self, state: &SimState) -> Result<(), String> {
        let scanned: BTreeSet<TaskId> =
            state.remaining_tasks().values().filter(|t| state.is_ready(t)).map(|t| t.id).collect();
        if scanned != self.ready {
            return Err(format!(
                "ready tracker holds {} tasks but {} remaining tasks are ready",
                self.ready.len(),
                scanned.len()
            ));
        }
        Ok(())
    }
}
