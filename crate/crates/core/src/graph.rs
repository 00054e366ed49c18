//! Structural checks and orderings over application DAGs.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

use crate::model::{ApplicationSpec, AppId, TaskId, MAX_SAFETY_LEVEL, SIZE_RANGE_MB};

/// A failed application invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoTasks(AppId),
    ZeroDeadline(AppId),
    DuplicateTask(TaskId),
    ForeignTask { task: TaskId, owner: AppId },
    ZeroLoad(TaskId),
    SizeOutOfRange { task: TaskId, size_mb: u32 },
    SafetyOutOfRange { task: TaskId, level: u8 },
    SelfDependency(TaskId),
    DanglingPredecessor { task: TaskId, missing: TaskId },
    /// Tasks that lie on (or between) dependency cycles.
    Cycle(BTreeSet<TaskId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTasks(app) => write!(f, "application {app} has no tasks"),
            Violation::ZeroDeadline(app) => write!(f, "application {app} has a zero deadline"),
            Violation::DuplicateTask(t) => write!(f, "task id {t} appears more than once"),
            Violation::ForeignTask { task, owner } => {
                write!(f, "task {task} claims application {owner}")
            }
            Violation::ZeroLoad(t) => write!(f, "task {t} has zero compute load"),
            Violation::SizeOutOfRange { task, size_mb } => write!(
                f,
                "task {task} size {size_mb} MB outside [{}, {}]",
                SIZE_RANGE_MB.0, SIZE_RANGE_MB.1
            ),
            Violation::SafetyOutOfRange { task, level } => {
                write!(f, "task {task} safety level {level} exceeds {MAX_SAFETY_LEVEL}")
            }
            Violation::SelfDependency(t) => write!(f, "task {t} depends on itself"),
            Violation::DanglingPredecessor { task, missing } => {
                write!(f, "task {task} depends on unknown task {missing}")
            }
            Violation::Cycle(ids) => {
                let ids: Vec<String> = ids.iter().map(ToString::to_string).collect();
                write!(f, "dependency cycle among tasks {{{}}}", ids.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("application {app} is not acyclic; tasks {tasks:?} are on a cycle")]
pub struct CycleError {
    pub app: AppId,
    pub tasks: Vec<TaskId>,
}

/// Every invariant an [`ApplicationSpec`] breaks, in a stable order.
pub fn validate_application(app: &ApplicationSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if app.tasks.is_empty() {
        out.push(Violation::NoTasks(app.id));
    }
    if app.deadline_cycles == 0 {
        out.push(Violation::ZeroDeadline(app.id));
    }

    let mut ids = HashSet::with_capacity(app.tasks.len());
    for task in &app.tasks {
        if !ids.insert(task.id) {
            out.push(Violation::DuplicateTask(task.id));
        }
    }
    for task in &app.tasks {
        if task.app != app.id {
            out.push(Violation::ForeignTask { task: task.id, owner: task.app });
        }
        if task.compute_load == 0 {
            out.push(Violation::ZeroLoad(task.id));
        }
        for size_mb in [task.input_size_mb, task.output_size_mb] {
            if !(SIZE_RANGE_MB.0..=SIZE_RANGE_MB.1).contains(&size_mb) {
                out.push(Violation::SizeOutOfRange { task: task.id, size_mb });
            }
        }
        if task.safety_level > MAX_SAFETY_LEVEL {
            out.push(Violation::SafetyOutOfRange { task: task.id, level: task.safety_level });
        }
        for &pred in &task.predecessors {
            if pred == task.id {
                out.push(Violation::SelfDependency(task.id));
            } else if !ids.contains(&pred) {
                out.push(Violation::DanglingPredecessor { task: task.id, missing: pred });
            }
        }
    }

    let cyclic = cyclic_core(app);
    if !cyclic.is_empty() {
        out.push(Violation::Cycle(cyclic));
    }
    out
}

/// Tasks left after peeling sources (forward) and sinks (backward) off the
/// graph. Empty iff the dependency relation is acyclic. Self-loops and
/// dangling edges are reported separately and ignored here.
fn cyclic_core(app: &ApplicationSpec) -> BTreeSet<TaskId> {
    let ids: HashSet<TaskId> = app.tasks.iter().map(|t| t.id).collect();
    let mut alive: HashSet<TaskId> = ids.clone();
    let edges: Vec<(TaskId, TaskId)> = app
        .tasks
        .iter()
        .flat_map(|t| {
            t.predecessors
                .iter()
                .filter(|&&p| p != t.id && ids.contains(&p))
                .map(move |&p| (p, t.id))
        })
        .collect();

    loop {
        let mut indeg: HashMap<TaskId, usize> = HashMap::new();
        let mut outdeg: HashMap<TaskId, usize> = HashMap::new();
        for &(p, s) in &edges {
            if alive.contains(&p) && alive.contains(&s) {
                *outdeg.entry(p).or_default() += 1;
                *indeg.entry(s).or_default() += 1;
            }
        }
        let before = alive.len();
        alive.retain(|t| indeg.contains_key(t) && outdeg.contains_key(t));
        if alive.len() == before {
            return alive.into_iter().collect();
        }
    }
}

/// Kahn's algorithm with the smallest ready id always emitted first.
pub fn topological_order(app: &ApplicationSpec) -> Result<Vec<TaskId>, CycleError> {
    let ids: HashSet<TaskId> = app.tasks.iter().map(|t| t.id).collect();
    let mut indeg: HashMap<TaskId, usize> = app.tasks.iter().map(|t| (t.id, 0)).collect();
    let mut succ: HashMap<TaskId, Vec<TaskId>> = HashMap::new();
    for task in &app.tasks {
        let preds: BTreeSet<TaskId> = task
            .predecessors
            .iter()
            .copied()
            .filter(|p| ids.contains(p))
            .collect();
        for pred in preds {
            succ.entry(pred).or_default().push(task.id);
            *indeg.get_mut(&task.id).expect("task registered") += 1;
        }
    }

    let mut ready: BinaryHeap<Reverse<TaskId>> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&t, _)| Reverse(t))
        .collect();
    let mut order = Vec::with_capacity(app.tasks.len());
    while let Some(Reverse(t)) = ready.pop() {
        order.push(t);
        for &s in succ.get(&t).map(Vec::as_slice).unwrap_or_default() {
            let d = indeg.get_mut(&s).expect("task registered");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(s));
            }
        }
    }

    if order.len() != indeg.len() {
        let placed: HashSet<TaskId> = order.iter().copied().collect();
        let mut tasks: Vec<TaskId> = indeg.keys().filter(|t| !placed.contains(t)).copied().collect();
        tasks.sort();
        return Err(CycleError { app: app.id, tasks });
    }
    Ok(order)
}

/// What the preprocessor ranks ready tasks by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityRule {
    /// Direct successors (out-degree in the application DAG).
    #[default]
    DirectSuccessors,
    /// All transitive descendants.
    TransitiveDescendants,
}

/// Per-task priority keys for every task of a workload.
#[derive(Debug, Clone, Default)]
pub struct AppGraphIndex {
    priority: HashMap<TaskId, u32>,
}

impl AppGraphIndex {
    pub fn build<'a>(apps: impl IntoIterator<Item = &'a ApplicationSpec>, rule: PriorityRule) -> Self {
        let mut priority = HashMap::new();
        for app in apps {
            match rule {
                PriorityRule::DirectSuccessors => {
                    for t in &app.tasks {
                        priority.entry(t.id).or_insert(0);
                        for &p in &t.predecessors {
                            *priority.entry(p).or_insert(0) += 1;
                        }
                    }
                }
                PriorityRule::TransitiveDescendants => {
                    priority.extend(descendant_counts(app));
                }
            }
        }
        Self { priority }
    }

    /// Priority key of a task, `None` if the task is not indexed.
    pub fn priority(&self, task: TaskId) -> Option<u32> {
        self.priority.get(&task).copied()
    }

    pub fn len(&self) -> usize {
        self.priority.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priority.is_empty()
    }
}

fn descendant_counts(app: &ApplicationSpec) -> Vec<(TaskId, u32)> {
    let n = app.tasks.len();
    let pos: HashMap<TaskId, usize> = app.tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let mut succ = vec![Vec::new(); n];
    for (i, t) in app.tasks.iter().enumerate() {
        for p in &t.predecessors {
            if let Some(&j) = pos.get(p) {
                succ[j].push(i);
            }
        }
    }
    let order = match topological_order(app) {
        Ok(order) => order,
        // cyclic input: fall back to direct successors
        Err(_) => {
            return app
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| (t.id, succ[i].len() as u32))
                .collect()
        }
    };
    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    for t in order.iter().rev() {
        let i = pos[t];
        let mut acc = vec![0u64; words];
        for &s in &succ[i] {
            acc[s / 64] |= 1 << (s % 64);
            for (a, r) in acc.iter_mut().zip(&reach[s]) {
                *a |= r;
            }
        }
        reach[i] = acc;
    }
    app.tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id, reach[i].iter().map(|w| w.count_ones()).sum()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskSpec;

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

    fn app(tasks: Vec<TaskSpec>) -> ApplicationSpec {
        ApplicationSpec { id: AppId(0), deadline_cycles: 100, tasks }
    }

    #[test]
    fn chain_is_valid() {
        let a = app(vec![task(0, &[]), task(1, &[0]), task(2, &[1])]);
        assert!(validate_application(&a).is_empty());
    }

    #[test]
    fn two_cycle_is_named() {
        let a = app(vec![task(0, &[1]), task(1, &[0])]);
        let v = validate_application(&a);
        assert_eq!(v, vec![Violation::Cycle([TaskId(0), TaskId(1)].into())]);
    }

    #[test]
    fn cycle_report_excludes_downstream_tasks() {
        // 0 <-> 1, and 2 depends on 1 without being part of the cycle
        let a = app(vec![task(0, &[1]), task(1, &[0]), task(2, &[1])]);
        assert_eq!(
            validate_application(&a),
            vec![Violation::Cycle([TaskId(0), TaskId(1)].into())]
        );
        let err = topological_order(&a).unwrap_err();
        assert_eq!(err.tasks, vec![TaskId(0), TaskId(1), TaskId(2)]);
    }

    #[test]
    fn structural_violations_are_reported() {
        let mut bad = task(0, &[0, 9]);
        bad.compute_load = 0;
        bad.input_size_mb = 0;
        bad.output_size_mb = 2048;
        bad.safety_level = 4;
        let a = ApplicationSpec { id: AppId(0), deadline_cycles: 0, tasks: vec![bad, task(0, &[])] };
        let v = validate_application(&a);
        assert!(v.contains(&Violation::ZeroDeadline(AppId(0))));
        assert!(v.contains(&Violation::DuplicateTask(TaskId(0))));
        assert!(v.contains(&Violation::ZeroLoad(TaskId(0))));
        assert!(v.contains(&Violation::SizeOutOfRange { task: TaskId(0), size_mb: 0 }));
        assert!(v.contains(&Violation::SizeOutOfRange { task: TaskId(0), size_mb: 2048 }));
        assert!(v.contains(&Violation::SafetyOutOfRange { task: TaskId(0), level: 4 }));
        assert!(v.contains(&Violation::SelfDependency(TaskId(0))));
        assert!(v.contains(&Violation::DanglingPredecessor { task: TaskId(0), missing: TaskId(9) }));
        assert!(validate_application(&app(vec![])).contains(&Violation::NoTasks(AppId(0))));
    }

    #[test]
    fn topological_order_examples() {
        assert_eq!(topological_order(&app(vec![task(7, &[])])).unwrap(), vec![TaskId(7)]);
        // diamond A=0 -> B=1, C=2 -> D=3
        let diamond = app(vec![task(3, &[1, 2]), task(2, &[0]), task(1, &[0]), task(0, &[])]);
        assert_eq!(
            topological_order(&diamond).unwrap(),
            vec![TaskId(0), TaskId(1), TaskId(2), TaskId(3)]
        );
        // chain of 60 in reverse id order: 59 -> 58 -> ... -> 0
        let chain: Vec<TaskSpec> =
            (0..60).map(|i| if i == 59 { task(i, &[]) } else { task(i, &[i + 1]) }).collect();
        let expected: Vec<TaskId> = (0..60).rev().map(TaskId).collect();
        assert_eq!(topological_order(&app(chain)).unwrap(), expected);
    }

    #[test]
    fn successor_index_counts() {
        // star 0 -> {1,2,3}, 3 -> 4
        let a = app(vec![task(0, &[]), task(1, &[0]), task(2, &[0]), task(3, &[0]), task(4, &[3])]);
        let direct = AppGraphIndex::build([&a], PriorityRule::DirectSuccessors);
        assert_eq!(direct.priority(TaskId(0)), Some(3));
        assert_eq!(direct.priority(TaskId(3)), Some(1));
        assert_eq!(direct.priority(TaskId(4)), Some(0));
        let transitive = AppGraphIndex::build([&a], PriorityRule::TransitiveDescendants);
        assert_eq!(transitive.priority(TaskId(0)), Some(4));
        assert_eq!(transitive.priority(TaskId(3)), Some(1));
        assert_eq!(transitive.priority(TaskId(9)), None);
    }
}
