//! Devices joining and leaving while the simulation runs.
//!
//! Each cycle at most one event fires. Direction is a fair coin, corrected
//! so that no more than `max_consecutive` events in a row share a direction.
//! New devices are stamped from the generator's tier profiles; removed
//! devices hand their queued and running work back to the remaining ledger.

mod script;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::GenConfig;
use crate::model::{DeviceId, TaskId, Tier};
use crate::state::SimState;

pub use script::{load_script, parse_script, ScriptError};
pub use sweep::{churn_sweep, read_sweep_csv, write_sweep_csv, SweepError, SweepRow, SWEEP_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChurnAction {
    Add,
    Remove,
}

impl ChurnAction {
    pub fn as_str(self) -> &'static str {
        match self {
            ChurnAction::Add => "add",
            ChurnAction::Remove => "remove",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ChurnAction::Add => ChurnAction::Remove,
            ChurnAction::Remove => ChurnAction::Add,
        }
    }
}

impl fmt::Display for ChurnAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChurnAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "add" => Ok(ChurnAction::Add),
            "remove" => Ok(ChurnAction::Remove),
            other => Err(format!("unknown churn action `{other}` (expected add or remove)")),
        }
    }
}

/// What happens when a draw would exceed the consecutive cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapBehavior {
    #[default]
    Flip,
    Suppress,
}

/// Tier mix for added devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AddMix {
    pub mec: f64,
    pub iot: f64,
}

impl Default for AddMix {
    fn default() -> Self {
        Self { mec: 1.0 / 3.0, iot: 2.0 / 3.0 }
    }
}

/// A directive from a churn script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedChurn {
    pub cycle: u64,
    pub action: ChurnAction,
    /// Required for additions; restricts the candidates for removals.
    pub tier: Option<Tier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChurnConfig {
    pub enabled: bool,
    pub event_probability: f64,
    pub max_consecutive: u32,
    pub cap_behavior: CapBehavior,
    pub add_mix: AddMix,
    pub manual_script: Vec<ScriptedChurn>,
}

impl Default for ChurnConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            event_probability: 0.0075,
            max_consecutive: 3,
            cap_behavior: CapBehavior::Flip,
            add_mix: AddMix::default(),
            manual_script: Vec::new(),
        }
    }
}

impl ChurnConfig {
    /// No events at all.
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let p = self.event_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("churn event_probability {p} is outside [0, 1]"));
        }
        if self.max_consecutive == 0 {
            return Err("churn max_consecutive must be at least 1".into());
        }
        let AddMix { mec, iot } = self.add_mix;
        if !(mec >= 0.0 && iot >= 0.0) || (mec + iot - 1.0).abs() > 1e-9 {
            return Err(format!("churn add_mix must be non-negative and sum to 1 (got mec={mec}, iot={iot})"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.manual_script {
            if !seen.insert(d.cycle) {
                return Err(format!("churn script has more than one directive at cycle {}", d.cycle));
            }
            if d.tier == Some(Tier::Cloud) {
                return Err(format!("churn script names the Cloud tier at cycle {}", d.cycle));
            }
            if d.action == ChurnAction::Add && d.tier.is_none() {
                return Err(format!("churn script add at cycle {} has no tier", d.cycle));
            }
        }
        Ok(())
    }
}

/// One applied churn event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChurnEvent {
    pub cycle: u64,
    pub action: ChurnAction,
    pub device: DeviceId,
    pub tier: Tier,
    /// Tasks handed back to the remaining ledger by a removal, ascending.
    pub requeued: Vec<TaskId>,
    pub scripted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChurnRecord {
    pub cycle: u64,
    pub action: ChurnAction,
    pub device: DeviceId,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChurnHistory {
    pub consecutive_count: u32,
    pub last_direction: Option<ChurnAction>,
    pub total_added: u64,
    pub total_removed: u64,
    pub events: Vec<ChurnRecord>,
    initial_fleet: usize,
    /// Devices with ids below this were part of the starting fleet.
    first_new_id: DeviceId,
}

impl ChurnHistory {
    /// Starts tracking from the current fleet of `state`.
    pub fn new(state: &SimState) -> Self {
        Self {
            consecutive_count: 0,
            last_direction: None,
            total_added: 0,
            total_removed: 0,
            events: Vec::new(),
            initial_fleet: state.devices().len(),
            first_new_id: DeviceId(state.next_device_id),
        }
    }

    pub fn initial_fleet(&self) -> usize {
        self.initial_fleet
    }

    /// Starting-fleet devices that have been removed.
    pub fn original_removed(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| e.action == ChurnAction::Remove && e.device < self.first_new_id)
            .count() as u64
    }

    /// (original devices removed + devices added) / starting fleet size.
    pub fn fraction_changed(&self) -> f64 {
        if self.initial_fleet == 0 {
            return 0.0;
        }
        (self.original_removed() + self.total_added) as f64 / self.initial_fleet as f64
    }

    /// MEC share of additions, `None` before the first addition.
    pub fn mec_fraction(&self) -> Option<f64> {
        (self.total_added > 0).then(|| {
            let mec = self
                .events
                .iter()
                .filter(|e| e.action == ChurnAction::Add && e.tier == Tier::Mec)
                .count();
            mec as f64 / self.total_added as f64
        })
    }

    /// Longest run of same-direction events.
    pub fn longest_run(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        let mut last = None;
        for e in &self.events {
            run = if last == Some(e.action) { run + 1 } else { 1 };
            last = Some(e.action);
            best = best.max(run);
        }
        best
    }

    fn record(&mut self, cycle: u64, action: ChurnAction, device: DeviceId, tier: Tier) {
        if self.last_direction == Some(action) {
            self.consecutive_count += 1;
        } else {
            self.consecutive_count = 1;
            self.last_direction = Some(action);
        }
        match action {
            ChurnAction::Add => self.total_added += 1,
            ChurnAction::Remove => self.total_removed += 1,
        }
        self.events.push(ChurnRecord { cycle, action, device, tier });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChurnError {
    #[error("no removable device: only the Cloud remains")]
    NoRemovableDevice,
    #[error("devices of tier {0} cannot be added at runtime")]
    UnsupportedTier(Tier),
}

/// Stamps out a fresh device of `tier` with the generator's profile and a
/// never-used id, and registers it.
pub fn add_device<R: Rng + ?Sized>(
    state: &mut SimState,
    tier: Tier,
    gen: &GenConfig,
    rng: &mut R,
) -> Result<DeviceId, ChurnError> {
    if tier == Tier::Cloud {
        return Err(ChurnError::UnsupportedTier(tier));
    }
    let id = state.alloc_device_id();
    let device = gen.profile(tier).generate(id, rng);
    Ok(state.add_device(device))
}

fn removable(state: &SimState, tier: Option<Tier>) -> Vec<DeviceId> {
    state
        .devices()
        .values()
        .filter(|d| d.tier != Tier::Cloud && tier.is_none_or(|t| d.tier == t))
        .map(|d| d.id)
        .collect()
}

/// Deregisters a uniformly chosen non-Cloud device (of `tier`, if given).
/// Its queued and running tasks go back to the remaining ledger.
pub fn remove_device<R: Rng + ?Sized>(
    state: &mut SimState,
    tier: Option<Tier>,
    rng: &mut R,
) -> Result<(DeviceId, Tier, Vec<TaskId>), ChurnError> {
    let candidates = removable(state, tier);
    let &id = candidates.choose(rng).ok_or(ChurnError::NoRemovableDevice)?;
    let requeued = state.evict_device_tasks(id);
    let dev = state.devices.remove(&id).expect("candidate exists");
    Ok((id, dev.tier, requeued))
}

fn draw_add_tier<R: Rng + ?Sized>(mix: &AddMix, rng: &mut R) -> Tier {
    if rng.random::<f64>() < mix.mec {
        Tier::Mec
    } else {
        Tier::Iot
    }
}

/// Scripted directives indexed by cycle.
pub fn index_script(script: &[ScriptedChurn]) -> BTreeMap<u64, ScriptedChurn> {
    script.iter().map(|d| (d.cycle, *d)).collect()
}

/// The churn stage of one cycle. A scripted directive for `cycle` replaces
/// the random draw and is exempt from the consecutive cap. Scripts apply
/// even when random churn is disabled.
///
/// The generator is consumed identically whether or not an event fires, so
/// the event sequence of a seed does not depend on the workload.
pub fn maybe_churn<R: Rng + ?Sized>(
    state: &mut SimState,
    cfg: &ChurnConfig,
    script: &BTreeMap<u64, ScriptedChurn>,
    gen: &GenConfig,
    history: &mut ChurnHistory,
    cycle: u64,
    rng: &mut R,
) -> Option<ChurnEvent> {
    let draws = cfg.enabled.then(|| {
        let fired = rng.random_bool(cfg.event_probability);
        let coin = rng.random_bool(0.5);
        (fired, coin, draw_add_tier(&cfg.add_mix, rng))
    });

    if let Some(d) = script.get(&cycle) {
        return apply(state, d.action, d.tier, gen, history, cycle, true, rng);
    }
    let (fired, coin, add_tier) = draws?;
    if !fired {
        return None;
    }
    let mut action = if coin { ChurnAction::Add } else { ChurnAction::Remove };
    let capped = |a: ChurnAction, h: &ChurnHistory| {
        h.last_direction == Some(a) && h.consecutive_count >= cfg.max_consecutive
    };
    if capped(action, history) {
        match cfg.cap_behavior {
            CapBehavior::Flip => action = action.flipped(),
            CapBehavior::Suppress => return None,
        }
    }
    if action == ChurnAction::Remove && removable(state, None).is_empty() {
        action = ChurnAction::Add;
        if capped(action, history) {
            return None;
        }
    }
    let tier = (action == ChurnAction::Add).then_some(add_tier);
    apply(state, action, tier, gen, history, cycle, false, rng)
}

#[allow(clippy::too_many_arguments)]
fn apply<R: Rng + ?Sized>(
    state: &mut SimState,
    action: ChurnAction,
    tier: Option<Tier>,
    gen: &GenConfig,
    history: &mut ChurnHistory,
    cycle: u64,
    scripted: bool,
    rng: &mut R,
) -> Option<ChurnEvent> {
    let (device, tier, requeued) = match action {
        ChurnAction::Add => {
            let tier = tier.expect("additions carry a tier");
            match add_device(state, tier, gen, rng) {
                Ok(id) => (id, tier, Vec::new()),
                Err(e) => {
                    log::warn!("cycle {cycle}: churn add skipped: {e}");
                    return None;
                }
            }
        }
        ChurnAction::Remove => match remove_device(state, tier, rng) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("cycle {cycle}: churn remove skipped: {e}");
                return None;
            }
        },
    };
    history.record(cycle, action, device, tier);
    Some(ChurnEvent { cycle, action, device, tier, requeued, scripted })
}
