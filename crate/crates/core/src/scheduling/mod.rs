//! Pluggable schedulers and the multi-agent runner.
//!
//! Each cycle the ready tasks are split between agents by application, every
//! agent proposes assignments against the same immutable state view, and the
//! proposals are merged by agent id before the engine commits them one by
//! one. Agents may run on worker threads; the merge order does not depend on
//! which finishes first.

mod baselines;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{AppId, Assignment, RejectReason, TaskSpec};
use crate::state::SimState;

pub use baselines::{GreedyEftScheduler, MinEnergyScheduler, RandomScheduler};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scheduler error: {0}")]
pub struct SchedulerError(pub String);

/// Result of committing one proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub assignment: Assignment,
    pub result: Result<(), RejectReason>,
}

/// What an agent hears back after the engine has committed a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub cycle: u64,
    /// Outcomes of this agent's own proposals, in proposal order.
    pub outcomes: Vec<Outcome>,
    pub reward: f64,
}

/// A scheduling policy. `propose` sees the state read-only and may only
/// reference tasks it was handed; `feedback` is called sequentially after
/// the commit stage, which is where learning agents would update.
pub trait Scheduler: Send {
    fn name(&self) -> &str;

    fn propose(&mut self, state: &SimState, tasks: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError>;

    fn feedback(&mut self, _feedback: &Feedback) {}
}

/// Groups ready tasks by application and deals the applications out
/// round-robin in ascending id order. Task order within a share follows the
/// input order.
pub fn partition_by_app<'a>(ready: &[&'a TaskSpec], num_agents: usize) -> Vec<Vec<&'a TaskSpec>> {
    let num_agents = num_agents.max(1);
    let apps: std::collections::BTreeSet<AppId> = ready.iter().map(|t| t.app).collect();
    let owner: BTreeMap<AppId, usize> = apps.into_iter().enumerate().map(|(i, a)| (a, i % num_agents)).collect();
    let mut shares = vec![Vec::new(); num_agents];
    for &task in ready {
        shares[owner[&task.app]].push(task);
    }
    shares
}

/// A fixed set of agents, indexed by agent id.
pub struct AgentPool {
    agents: Vec<Box<dyn Scheduler>>,
    parallel: bool,
}

impl std::fmt::Debug for AgentPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentPool")
            .field("agents", &self.agents.iter().map(|a| a.name()).collect::<Vec<_>>())
            .field("parallel", &self.parallel)
            .finish()
    }
}

impl AgentPool {
    pub fn new(agents: Vec<Box<dyn Scheduler>>) -> Self {
        Self { agents, parallel: true }
    }

    /// Run agents on the calling thread only.
    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agent_mut(&mut self, id: usize) -> Option<&mut (dyn Scheduler + 'static)> {
        self.agents.get_mut(id).map(|a| a.as_mut())
    }

    /// Calls every agent that has work and concatenates the proposals in
    /// ascending agent id. A failing or panicking agent contributes nothing;
    /// proposals for tasks outside an agent's share are dropped.
    pub fn run_agents(&mut self, state: &SimState, partition: &[Vec<&TaskSpec>]) -> Vec<Assignment> {
        let run = |(agent_id, (agent, share)): (usize, (&mut Box<dyn Scheduler>, &Vec<&TaskSpec>))| {
            if share.is_empty() {
                return Vec::new();
            }
            let proposed = catch_unwind(AssertUnwindSafe(|| agent.propose(state, share)));
            let mut proposals = match proposed {
                Ok(Ok(p)) => p,
                Ok(Err(e)) => {
                    log::warn!("agent {agent_id} ({}) failed: {e}", agent.name());
                    return Vec::new();
                }
                Err(_) => {
                    log::warn!("agent {agent_id} ({}) panicked during propose", agent.name());
                    return Vec::new();
                }
            };
            let given: HashSet<_> = share.iter().map(|t| t.id).collect();
            proposals.retain(|a| {
                let ok = given.contains(&a.task);
                if !ok {
                    log::warn!("agent {agent_id} proposed task {} outside its share", a.task);
                }
                ok
            });
            for a in &mut proposals {
                a.agent = agent_id;
            }
            proposals
        };

        let empty = Vec::new();
        let shares = (0..self.agents.len()).map(|i| partition.get(i).unwrap_or(&empty));
        let per_agent: Vec<Vec<Assignment>> = if self.parallel && partition.iter().filter(|s| !s.is_empty()).count() > 1 {
            let shares: Vec<&Vec<&TaskSpec>> = shares.collect();
            self.agents
                .par_iter_mut()
                .zip(shares.into_par_iter())
                .enumerate()
                .map(run)
                .collect()
        } else {
            self.agents.iter_mut().zip(shares).enumerate().map(run).collect()
        };
        per_agent.into_iter().flatten().collect()
    }

    /// Delivers per-agent feedback, in agent id order.
    pub fn feedback(&mut self, feedback: Vec<Feedback>) {
        for (agent, fb) in self.agents.iter_mut().zip(feedback) {
            agent.feedback(&fb);
        }
    }
}

/// Weights of the per-cycle reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub scheduled: f64,
    pub rejected: f64,
    pub energy: f64,
    pub deadline: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { scheduled: 1.0, rejected: 1.0, energy: 0.0, deadline: 0.0 }
    }
}

/// Event counts a reward is computed from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardInputs {
    pub accepted: usize,
    pub rejected: usize,
    pub energy_wh: f64,
    pub deadline_misses: usize,
}

pub fn reward_signal(inputs: &RewardInputs, weights: &RewardWeights) -> f64 {
    weights.scheduled * inputs.accepted as f64
        - weights.rejected * inputs.rejected as f64
        - weights.energy * inputs.energy_wh
        - weights.deadline * inputs.deadline_misses as f64
}

/// Everything a factory needs to build one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentContext {
    pub agent_id: usize,
    /// Seed for the agent's private generator.
    pub seed: u64,
}

pub type SchedulerFactory = Arc<dyn Fn(AgentContext) -> Box<dyn Scheduler> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scheduler `{name}`; valid names: {}", valid.join(", "))]
pub struct UnknownScheduler {
    pub name: String,
    pub valid: Vec<String>,
}

/// Schedulers selectable by name.
#[derive(Clone)]
pub struct SchedulerRegistry {
    factories: BTreeMap<String, SchedulerFactory>,
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        let mut reg = Self { factories: BTreeMap::new() };
        reg.register("random", |ctx: AgentContext| {
            Box::new(RandomScheduler::new(ctx.agent_id, ctx.seed)) as Box<dyn Scheduler>
        });
        reg.register("greedy_eft", |ctx: AgentContext| {
            Box::new(GreedyEftScheduler::new(ctx.agent_id)) as Box<dyn Scheduler>
        });
        reg.register("min_energy", |ctx: AgentContext| {
            Box::new(MinEnergyScheduler::new(ctx.agent_id)) as Box<dyn Scheduler>
        });
        reg
    }
}

impl SchedulerRegistry {
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(AgentContext) -> Box<dyn Scheduler> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Arc::new(factory));
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// `num_agents` instances of `name`; agent `i` is seeded from
    /// `(seed, AGENT_BASE + i)`.
    pub fn build_pool(&self, name: &str, num_agents: usize, seed: u64) -> Result<AgentPool, UnknownScheduler> {
        let factory = self.factories.get(name).ok_or_else(|| UnknownScheduler {
            name: name.to_string(),
            valid: self.names(),
        })?;
        let agents = (0..num_agents.max(1))
            .map(|agent_id| {
                let agent_seed = seed ^ (crate::rng::stream::AGENT_BASE + agent_id as u64).rotate_left(17);
                factory(AgentContext { agent_id, seed: agent_seed })
            })
            .collect();
        Ok(AgentPool::new(agents))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeviceId, TaskId};

    fn task(id: u32, app: u32) -> TaskSpec {
        TaskSpec {
            id: TaskId(id),
            app: AppId(app),
            compute_load: 1,
            input_size_mb: 1,
            output_size_mb: 1,
            safety_level: 0,
            predecessors: vec![],
        }
    }

    #[test]
    fn single_agent_gets_everything() {
        let tasks = [task(0, 5), task(1, 2), task(2, 9)];
        let refs: Vec<&TaskSpec> = tasks.iter().collect();
        let shares = partition_by_app(&refs, 1);
        assert_eq!(shares.len(), 1);
        assert_eq!(shares[0].len(), 3);
    }

    #[test]
    fn apps_are_dealt_round_robin() {
        let tasks = [task(0, 3), task(1, 1), task(2, 2), task(3, 1)];
        let refs: Vec<&TaskSpec> = tasks.iter().collect();
        let shares = partition_by_app(&refs, 2);
        let apps = |s: &Vec<&TaskSpec>| s.iter().map(|t| t.app.0).collect::<Vec<_>>();
        assert_eq!(apps(&shares[0]), vec![3, 1, 1]);
        assert_eq!(apps(&shares[1]), vec![2]);
    }

    struct Fixed(Vec<Assignment>);
    impl Scheduler for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn propose(&mut self, _: &SimState, _: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError> {
            Ok(self.0.clone())
        }
    }

    struct Failing;
    impl Scheduler for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn propose(&mut self, _: &SimState, _: &[&TaskSpec]) -> Result<Vec<Assignment>, SchedulerError> {
            Err(SchedulerError("boom".into()))
        }
    }

    fn assign(task: u32) -> Assignment {
        Assignment { task: TaskId(task), device: DeviceId(0), core: 0, agent: 99 }
    }

    #[test]
    fn merge_is_by_agent_id_with_isolation() {
        let state = SimState::new([], 0.001);
        let mut pool = AgentPool::new(vec![
            Box::new(Fixed(vec![assign(0), assign(7)])),
            Box::new(Failing),
            Box::new(Fixed(vec![assign(2)])),
        ]);
        let tasks = [task(0, 0), task(1, 1), task(2, 2)];
        let partition = vec![vec![&tasks[0]], vec![&tasks[1]], vec![&tasks[2]]];
        let merged = pool.run_agents(&state, &partition);
        // task 7 was never handed to agent 0 and is dropped
        assert_eq!(
            merged,
            vec![
                Assignment { agent: 0, ..assign(0) },
                Assignment { agent: 2, ..assign(2) }
            ]
        );
        assert!(pool.run_agents(&state, &[vec![], vec![], vec![]]).is_empty());
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights { scheduled: 1.0, rejected: 1.0, energy: 0.0, deadline: 0.0 };
        assert_eq!(reward_signal(&RewardInputs::default(), &w), 0.0);
        let r = RewardInputs { accepted: 2, rejected: 1, energy_wh: 3.0, deadline_misses: 4 };
        assert_eq!(reward_signal(&r, &w), 1.0);
        let w2 = RewardWeights { scheduled: 0.5, rejected: 2.0, energy: 10.0, deadline: 0.25 };
        assert!((reward_signal(&r, &w2) - (1.0 - 2.0 - 30.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn unknown_scheduler_lists_valid_names() {
        let reg = SchedulerRegistry::default();
        let err = reg.build_pool("nope", 2, 0).err().unwrap();
        assert_eq!(err.valid, vec!["greedy_eft", "min_energy", "random"]);
        assert!(err.to_string().contains("greedy_eft, min_energy, random"));
        assert_eq!(reg.build_pool("random", 24, 0).unwrap().len(), 24);
    }
}
