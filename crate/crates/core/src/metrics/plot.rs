use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::io::MetricsTables;
use crate::churn::ChurnAction;

pub const MAKESPAN_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    IterationTime,
    MemoryProxy,
    Churn,
    MakespanHist,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::IterationTime, PlotKind::MemoryProxy, PlotKind::Churn, PlotKind::MakespanHist];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::IterationTime => "iteration_time",
            PlotKind::MemoryProxy => "memory_proxy",
            PlotKind::Churn => "churn",
            PlotKind::MakespanHist => "makespan_hist",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown plot kind `{0}`; valid kinds: iteration_time, memory_proxy, churn, makespan_hist")]
pub struct UnknownPlotKind(pub String);

impl FromStr for PlotKind {
    type Err = UnknownPlotKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| UnknownPlotKind(s.to_string()))
    }
}

/// Writes one plot-ready series as CSV and returns its row count.
///
/// * `iteration_time`: `cycle,wall_time_s`, one row per cycle.
/// * `memory_proxy`: `cycle,live_objects` at each monitor sample.
/// * `churn`: `cycle,added,removed`, cumulative, one row per cycle.
/// * `makespan_hist`: `bin_lo,bin_hi,count` over finished applications.
pub fn plot_data<W: Write>(tables: &MetricsTables, kind: PlotKind, out: W) -> std::io::Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    let rows = match kind {
        PlotKind::IterationTime => {
            w.write_record(["cycle", "wall_time_s"])?;
            for c in &tables.cycles {
                w.write_record([c.cycle.to_string(), c.wall_time_s.to_string()])?;
            }
            tables.cycles.len()
        }
        PlotKind::MemoryProxy => {
            w.write_record(["cycle", "live_objects"])?;
            for s in &tables.monitor {
                w.write_record([s.cycle.to_string(), s.live_objects.to_string()])?;
            }
            tables.monitor.len()
        }
        PlotKind::Churn => {
            w.write_record(["cycle", "added", "removed"])?;
            let mut events = tables.churn.iter().peekable();
            let (mut added, mut removed) = (0u64, 0u64);
            for c in &tables.cycles {
                while let Some(e) = events.next_if(|e| e.cycle <= c.cycle) {
                    match e.action {
                        ChurnAction::Add => added += 1,
                        ChurnAction::Remove => removed += 1,
                    }
                }
                w.write_record([c.cycle.to_string(), added.to_string(), removed.to_string()])?;
            }
            tables.cycles.len()
        }
        PlotKind::MakespanHist => {
            w.write_record(["bin_lo", "bin_hi", "count"])?;
            let spans: Vec<u64> = tables.apps.iter().map(|a| a.makespan_cycles).collect();
            match (spans.iter().min(), spans.iter().max()) {
                (Some(&lo), Some(&hi)) => {
                    let width = (hi - lo) / MAKESPAN_BINS as u64 + 1;
                    let mut counts = [0usize; MAKESPAN_BINS];
                    for s in &spans {
                        counts[((s - lo) / width) as usize] += 1;
                    }
                    for (i, n) in counts.iter().enumerate() {
                        let b = lo + i as u64 * width;
                        w.write_record([b.to_string(), (b + width).to_string(), n.to_string()])?;
                    }
                    MAKESPAN_BINS
                }
                _ => 0,
            }
        }
    };
    w.flush()?;
    Ok(rows)
}
