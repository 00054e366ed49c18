//! The simulation loop.
//!
//! Each call to [`Environment::step`] runs one cycle: deliver a window,
//! pick out ready tasks, let the agents propose, commit proposals in merge
//! order, advance execution, settle applications and deadlines, apply churn
//! and sample the monitor. Completion times are stamped at the end of the
//! cycle in which the last execution cycle ran.

mod events;
mod exec;
mod ready;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::churn::{index_script, maybe_churn, ChurnAction, ChurnConfig, ChurnEvent, ChurnHistory, ScriptedChurn};
use crate::dataflow::{filter_ready, next_window, prioritize, WindowConfig, WorkloadCursor};
use crate::datagen::{generate_workload, GenConfig};
use crate::graph::{validate_application, AppGraphIndex, CycleError, PriorityRule};
use crate::metrics::{MetricsStore, MonitorSample};
use crate::model::{AppId, ApplicationSpec, DeviceSpec, TaskId, TaskSpec};
use crate::rng::{stream, stream_rng, SimRng};
use crate::scheduling::{partition_by_app, reward_signal, AgentPool, Feedback, Outcome, RewardInputs, RewardWeights};
use crate::state::{AppMeta, SimState, Snapshot};

use ready::ReadyTracker;

pub use events::{parse_event_log, Event, EventKind, EventSink, EVENT_LOG_HEADER};
pub use exec::{
    advance_execution, check_deadlines, commit_assignment, finalize_applications, provision_elastic, AdvanceOutcome,
    CoreEvent,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub total_cycles: u64,
    pub cycle_duration_s: f64,
    pub window: WindowConfig,
    pub churn: ChurnConfig,
    pub monitor_interval_cycles: u64,
    pub seed: u64,
    pub priority_rule: PriorityRule,
    pub reward: RewardWeights,
    /// Run the full structural state check after every cycle instead of
    /// only the ledger count.
    pub strict_invariants: bool,
    /// Measure per-cycle wall time. When off, `wall_time_s` is recorded as 0
    /// and metrics files are byte-identical across repeated runs.
    pub record_wall_time: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            total_cycles: 10_000,
            cycle_duration_s: 0.001,
            window: WindowConfig::default(),
            churn: ChurnConfig::default(),
            monitor_interval_cycles: 100,
            seed: 1,
            priority_rule: PriorityRule::default(),
            reward: RewardWeights::default(),
            strict_invariants: false,
            record_wall_time: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.total_cycles == 0 {
            return Err("total_cycles must be at least 1".into());
        }
        if !(self.cycle_duration_s > 0.0 && self.cycle_duration_s.is_finite()) {
            return Err("cycle_duration_s must be positive".into());
        }
        if self.monitor_interval_cycles == 0 {
            return Err("monitor_interval_cycles must be at least 1".into());
        }
        let w = self.reward;
        if [w.scheduled, w.rejected, w.energy, w.deadline].iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err("reward weights must be non-negative".into());
        }
        self.window.validate()?;
        self.churn.validate()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error("invariant breach at cycle {cycle}: {message}")]
    Invariant { cycle: u64, message: String },
    #[error("event log: {0}")]
    EventLog(#[from] std::io::Error),
    #[error("the run already reached its last cycle ({0})")]
    Horizon(u64),
}

/// Counters for one cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleReport {
    pub cycle: u64,
    pub tasks_delivered: usize,
    pub tasks_scheduled: usize,
    pub tasks_rejected: usize,
    pub tasks_completed: usize,
    pub apps_completed: usize,
    pub deadline_misses: usize,
    pub energy_wh: f64,
    pub reward: f64,
    pub churn_event: Option<ChurnEvent>,
    pub wall_time_s: f64,
}

impl CycleReport {
    /// The report with the wall-clock field cleared, for comparing runs.
    pub fn without_wall_time(&self) -> Self {
        Self { wall_time_s: 0.0, ..self.clone() }
    }
}

/// End-of-run totals. Displays as the CLI summary line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub cycles: u64,
    pub apps_finished: usize,
    pub mean_makespan: Option<f64>,
    pub total_energy_wh: f64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycles={} apps_finished={} mean_makespan=", self.cycles, self.apps_finished)?;
        match self.mean_makespan {
            Some(m) => write!(f, "{m:.3}")?,
            None => f.write_str("nan")?,
        }
        write!(f, " total_energy_wh={:.6}", self.total_energy_wh)
    }
}

pub struct Environment {
    cfg: EngineConfig,
    gen: GenConfig,
    state: Arc<SimState>,
    cursor: WorkloadCursor,
    app_meta: HashMap<AppId, AppMeta>,
    index: AppGraphIndex,
    ready: ReadyTracker,
    pool: AgentPool,
    window_rng: SimRng,
    churn_rng: SimRng,
    churn_history: ChurnHistory,
    script: BTreeMap<u64, ScriptedChurn>,
    metrics: MetricsStore,
    events: EventSink,
}

impl Environment {
    /// Generates the workload and fleet from `gen` and wires the engine.
    pub fn init(gen: GenConfig, cfg: EngineConfig, pool: AgentPool) -> Result<Self, EngineError> {
        let (apps, devices) = generate_workload(&gen).map_err(|e| EngineError::Config(e.0))?;
        Self::with_workload(apps, devices, gen, cfg, pool)
    }

    /// Uses a given workload and fleet. `gen` still supplies the device
    /// templates for churn additions.
    pub fn with_workload(
        apps: Vec<ApplicationSpec>,
        devices: Vec<DeviceSpec>,
        gen: GenConfig,
        cfg: EngineConfig,
        pool: AgentPool,
    ) -> Result<Self, EngineError> {
        cfg.validate().map_err(EngineError::Config)?;
        if pool.is_empty() {
            return Err(EngineError::Config("the agent pool is empty".into()));
        }
        for app in &apps {
            if let Some(v) = validate_application(app).first() {
                return Err(EngineError::Config(format!("application {}: {v}", app.id)));
            }
        }
        for dev in &devices {
            if let Some(v) = dev.violations().first() {
                return Err(EngineError::Config(v.clone()));
            }
        }
        let index = AppGraphIndex::build(&apps, cfg.priority_rule);
        let ready = ReadyTracker::new(&apps);
        let app_meta = apps
            .iter()
            .map(|a| (a.id, AppMeta { total_tasks: a.tasks.len(), deadline_cycles: a.deadline_cycles }))
            .collect();
        let cursor = WorkloadCursor::new(apps)?;
        let state = SimState::new(devices, cfg.cycle_duration_s);
        let metrics = MetricsStore::for_state(&state);
        let churn_history = ChurnHistory::new(&state);
        Ok(Self {
            window_rng: stream_rng(cfg.seed, stream::WINDOW),
            churn_rng: stream_rng(cfg.seed, stream::CHURN),
            script: index_script(&cfg.churn.manual_script),
            cfg,
            gen,
            state: Arc::new(state),
            cursor,
            app_meta,
            index,
            ready,
            pool,
            churn_history,
            metrics,
            events: EventSink::Off,
        })
    }

    pub fn set_event_sink(&mut self, sink: EventSink) {
        self.events = sink;
    }

    /// Takes the in-memory event log, leaving an empty one in its place.
    pub fn take_events(&mut self) -> Vec<Event> {
        match &mut self.events {
            EventSink::Memory(v) => std::mem::take(v),
            _ => Vec::new(),
        }
    }

    pub fn flush_events(&mut self) -> std::io::Result<()> {
        self.events.flush()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Cheap read-only view of the current state. Later cycles copy on
    /// write, so the view never changes.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot::shared(&self.state)
    }

    pub fn metrics(&self) -> &MetricsStore {
        &self.metrics
    }

    pub fn churn_history(&self) -> &ChurnHistory {
        &self.churn_history
    }

    pub fn cursor(&self) -> &WorkloadCursor {
        &self.cursor
    }

    pub fn pool_mut(&mut self) -> &mut AgentPool {
        &mut self.pool
    }

    /// Nothing left to deliver, schedule or execute.
    pub fn workload_done(&self) -> bool {
        self.cursor.is_exhausted() && self.state.active_apps().is_empty()
    }

    pub fn at_horizon(&self) -> bool {
        self.state.cycle() >= self.cfg.total_cycles
    }

    /// Runs to the horizon, or until the workload is done unless `exact`.
    pub fn run(&mut self, exact: bool) -> Result<RunSummary, EngineError> {
        while !self.at_horizon() && (exact || !self.workload_done()) {
            self.step()?;
        }
        self.events.flush()?;
        Ok(self.summary())
    }

    /// Runs `n` more cycles, stopping early only at the horizon.
    pub fn run_cycles(&mut self, n: u64) -> Result<(), EngineError> {
        for _ in 0..n {
            if self.at_horizon() {
                break;
            }
            self.step()?;
        }
        self.events.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            cycles: self.state.cycle(),
            apps_finished: self.state.finished_apps().len(),
            mean_makespan: self.metrics.mean_makespan(),
            total_energy_wh: self.metrics.energy_total(None).unwrap_or(0.0),
        }
    }

    pub fn step(&mut self) -> Result<CycleReport, EngineError> {
        if self.at_horizon() {
            return Err(EngineError::Horizon(self.cfg.total_cycles));
        }
        let started = self.cfg.record_wall_time.then(Instant::now);
        let cycle = self.state.cycle();
        let mut report = CycleReport { cycle, ..CycleReport::default() };

        // deliver
        let batch = next_window(&mut self.cursor, &self.cfg.window, cycle, &mut self.window_rng);
        report.tasks_delivered = batch.len();
        if !batch.is_empty() {
            let st = Arc::make_mut(&mut self.state);
            for task in batch {
                let app = task.app;
                self.events.emit(cycle, EventKind::Deliver, task.id.0, || format!("app={app}"))?;
                self.ready.delivered(&task, st);
                st.deliver(task, self.app_meta[&app]);
            }
        }

        // preprocess
        let ready_ids: Vec<TaskId> = {
            let remaining = self.state.remaining_tasks();
            let candidates: Vec<&TaskSpec> = self.ready.ready().iter().map(|id| &remaining[id]).collect();
            let ready = filter_ready(&self.state, &candidates).map_err(|e| self.breach(cycle, e.to_string()))?;
            prioritize(&ready, &self.index)
                .map_err(|e| self.breach(cycle, e.to_string()))?
                .iter()
                .map(|t| t.id)
                .collect()
        };

        // schedule
        let proposals = if ready_ids.is_empty() {
            Vec::new()
        } else {
            provision_elastic(Arc::make_mut(&mut self.state), ready_ids.len());
            let snap = Arc::clone(&self.state);
            let ready: Vec<&TaskSpec> = ready_ids.iter().map(|id| &snap.remaining_tasks()[id]).collect();
            let partition = partition_by_app(&ready, self.pool.len());
            self.pool.run_agents(&snap, &partition)
        };

        // commit
        let st = Arc::make_mut(&mut self.state);
        let mut outcomes: Vec<Vec<Outcome>> = vec![Vec::new(); self.pool.len()];
        for a in proposals {
            let result = commit_assignment(st, &a);
            match result {
                Ok(()) => {
                    report.tasks_scheduled += 1;
                    self.ready.committed(a.task);
                    self.events.emit(cycle, EventKind::Commit, a.task.0, || {
                        format!("device={};core={};agent={}", a.device, a.core, a.agent)
                    })?;
                }
                Err(reason) => {
                    report.tasks_rejected += 1;
                    self.events.emit(cycle, EventKind::Reject, a.task.0, || {
                        format!("reason={reason};device={};core={};agent={}", a.device, a.core, a.agent)
                    })?;
                }
            }
            outcomes[a.agent].push(Outcome { assignment: a, result });
        }

        // advance
        let adv = advance_execution(st);
        for ev in &adv.started {
            self.events.emit(cycle, EventKind::Start, ev.task.0, || format!("device={};core={}", ev.device, ev.core))?;
        }
        for ev in &adv.completed {
            self.events.emit(cycle, EventKind::Complete, ev.task.0, || format!("device={};core={}", ev.device, ev.core))?;
        }
        for &dev in &adv.depleted {
            self.events.emit(cycle, EventKind::BatteryDepleted, dev.0, String::new)?;
        }
        for ev in &adv.completed {
            self.ready.finished(ev.task);
        }
        for &(dev, task) in &adv.requeued {
            self.ready.requeued(task);
            self.events.emit(cycle, EventKind::Requeue, task.0, || format!("device={dev};cause=battery"))?;
        }
        for &(dev, wh) in &adv.energy_wh {
            self.metrics.add_energy(dev, wh);
        }
        report.tasks_completed = adv.completed.len();
        report.energy_wh = adv.total_energy_wh();

        // applications and deadlines
        let missed = check_deadlines(st);
        for &app in &missed {
            let deadline = st.active_apps()[&app].deadline_cycles;
            self.events.emit(cycle, EventKind::DeadlineMiss, app.0, || format!("deadline={deadline}"))?;
        }
        report.deadline_misses = missed.len();
        self.metrics.deadline_misses += missed.len() as u64;
        let done = finalize_applications(st);
        for app in &done {
            self.events.emit(cycle, EventKind::AppDone, app.app.0, || format!("makespan={}", app.makespan()))?;
            self.metrics.record_app(app);
        }
        report.apps_completed = done.len();

        // feedback
        let w = &self.cfg.reward;
        let feedback: Vec<Feedback> = outcomes
            .into_iter()
            .map(|outcomes| {
                let accepted = outcomes.iter().filter(|o| o.result.is_ok()).count();
                let inputs = RewardInputs {
                    accepted,
                    rejected: outcomes.len() - accepted,
                    energy_wh: report.energy_wh,
                    deadline_misses: report.deadline_misses,
                };
                Feedback { cycle, outcomes, reward: reward_signal(&inputs, w) }
            })
            .collect();
        report.reward = reward_signal(
            &RewardInputs {
                accepted: report.tasks_scheduled,
                rejected: report.tasks_rejected,
                energy_wh: report.energy_wh,
                deadline_misses: report.deadline_misses,
            },
            w,
        );
        self.pool.feedback(feedback);

        // churn
        let event = maybe_churn(
            st,
            &self.cfg.churn,
            &self.script,
            &self.gen,
            &mut self.churn_history,
            cycle,
            &mut self.churn_rng,
        );
        if let Some(ev) = &event {
            let kind = match ev.action {
                ChurnAction::Add => EventKind::DeviceAdd,
                ChurnAction::Remove => EventKind::DeviceRemove,
            };
            self.events.emit(cycle, kind, ev.device.0, || format!("tier={}", ev.tier))?;
            for task in &ev.requeued {
                self.ready.requeued(*task);
                self.events.emit(cycle, EventKind::Requeue, task.0, || format!("device={};cause=removal", ev.device))?;
            }
            match ev.action {
                ChurnAction::Add => {
                    let dev = st.device(ev.device).expect("device was just added");
                    self.metrics.register_device(dev, cycle + 1);
                }
                ChurnAction::Remove => self.metrics.retire_device(ev.device, cycle + 1),
            }
            self.metrics.record_churn(*self.churn_history.events.last().expect("event was recorded"));
        }
        report.churn_event = event;

        // monitor
        if cycle.is_multiple_of(self.cfg.monitor_interval_cycles) {
            self.metrics.record_monitor(MonitorSample::of(cycle, st));
        }

        let check = if self.cfg.strict_invariants {
            st.check_invariants().and_then(|()| self.ready.verify(st))
        } else {
            st.check_conservation()
        };
        if let Err(message) = check {
            return Err(EngineError::Invariant { cycle, message });
        }
        st.cycle += 1;

        if let Some(t) = started {
            report.wall_time_s = t.elapsed().as_secs_f64();
        }
        self.metrics
            .record_cycle(&report, &self.state)
            .map_err(|e| EngineError::Invariant { cycle, message: e.to_string() })?;
        Ok(report)
    }

    fn breach(&self, cycle: u64, message: String) -> EngineError {
        EngineError::Invariant { cycle, message }
    }
}
