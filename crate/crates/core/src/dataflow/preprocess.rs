use std::cmp::Reverse;

use crate::graph::AppGraphIndex;
use crate::model::{TaskId, TaskSpec};
use crate::state::SimState;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("task {0} is not in the remaining ledger")]
    NotRemaining(TaskId),
    #[error("task {0} is not in the application graph index")]
    NotIndexed(TaskId),
}

/// Candidates whose predecessors have all finished, in input order.
pub fn filter_ready<'a>(
    state: &SimState,
    candidates: &[&'a TaskSpec],
) -> Result<Vec<&'a TaskSpec>, PreprocessError> {
    let mut ready = Vec::with_capacity(candidates.len());
    for &task in candidates {
        if !state.remaining_tasks().contains_key(&task.id) {
            return Err(PreprocessError::NotRemaining(task.id));
        }
        if state.is_ready(task) {
            ready.push(task);
        }
    }
    Ok(ready)
}

/// Orders ready tasks by descending priority key, then ascending id.
pub fn prioritize<'a>(
    ready: &[&'a TaskSpec],
    index: &AppGraphIndex,
) -> Result<Vec<&'a TaskSpec>, PreprocessError> {
    let mut keyed = ready
        .iter()
        .map(|&t| {
            index
                .priority(t.id)
                .map(|p| (Reverse(p), t.id, t))
                .ok_or(PreprocessError::NotIndexed(t.id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    keyed.sort_by_key(|&(p, id, _)| (p, id));
    Ok(keyed.into_iter().map(|(_, _, t)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PriorityRule;
    use crate::model::{ApplicationSpec, AppId};
    use crate::state::AppMeta;

    fn task(id: u32, preds: &[u32]) -> TaskSpec {
        TaskSpec {
            id: TaskId(id),
            app: AppId(0),
            compute_load: 1,
            input_size_mb: 1,
            output_size_mb: 1,
            safety_level: 0,
            predecessors: preds.iter().map(|&p| TaskId(p)).collect(),
        }
    }

    fn delivered(tasks: &[TaskSpec]) -> SimState {
        let mut s = SimState::new([], 0.001);
        let meta = AppMeta { total_tasks: tasks.len(), deadline_cycles: 10 };
        for t in tasks {
            s.deliver(t.clone(), meta);
        }
        s
    }

    #[test]
    fn diamond_with_root_finished() {
        let tasks = [task(0, &[]), task(1, &[0]), task(2, &[0]), task(3, &[1, 2])];
        let mut s = delivered(&tasks);
        s.mark_finished(TaskId(0));
        let cands: Vec<&TaskSpec> = tasks[1..].iter().collect();
        let ready = filter_ready(&s, &cands).unwrap();
        assert_eq!(ready.iter().map(|t| t.id).collect::<Vec<_>>(), vec![TaskId(1), TaskId(2)]);
    }

    #[test]
    fn roots_are_ready_and_blocked_tasks_are_not() {
        let tasks = [task(0, &[]), task(1, &[]), task(2, &[0, 1])];
        let s = delivered(&tasks);
        let all: Vec<&TaskSpec> = tasks.iter().collect();
        assert_eq!(filter_ready(&s, &all[..2]).unwrap().len(), 2);
        assert!(filter_ready(&s, &all[2..]).unwrap().is_empty());
    }

    #[test]
    fn unknown_candidate_is_an_error() {
        let s = delivered(&[task(0, &[])]);
        let stray = task(5, &[]);
        assert_eq!(filter_ready(&s, &[&stray]), Err(PreprocessError::NotRemaining(TaskId(5))));
    }

    #[test]
    fn star_root_outranks_isolated_task() {
        let tasks = vec![task(0, &[]), task(1, &[0]), task(2, &[0]), task(3, &[0]), task(4, &[])];
        let app = ApplicationSpec { id: AppId(0), deadline_cycles: 9, tasks: tasks.clone() };
        let index = AppGraphIndex::build([&app], PriorityRule::DirectSuccessors);
        let ordered = prioritize(&[&tasks[4], &tasks[0]], &index).unwrap();
        assert_eq!(ordered.iter().map(|t| t.id).collect::<Vec<_>>(), vec![TaskId(0), TaskId(4)]);
        let ties = prioritize(&[&tasks[3], &tasks[1], &tasks[2]], &index).unwrap();
        assert_eq!(
            ties.iter().map(|t| t.id).collect::<Vec<_>>(),
            vec![TaskId(1), TaskId(2), TaskId(3)]
        );
        assert_eq!(prioritize(&[&tasks[0]], &index).unwrap().len(), 1);
        let stray = task(9, &[]);
        assert_eq!(prioritize(&[&stray], &index), Err(PreprocessError::NotIndexed(TaskId(9))));
    }
}
