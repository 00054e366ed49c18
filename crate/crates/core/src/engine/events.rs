use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

pub const EVENT_LOG_HEADER: &str = "cycle,event_kind,subject_id,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Deliver,
    Commit,
    Reject,
    Start,
    Complete,
    Requeue,
    AppDone,
    DeadlineMiss,
    DeviceAdd,
    DeviceRemove,
    BatteryDepleted,
}

impl EventKind {
    pub const ALL: [EventKind; 11] = [
        EventKind::Deliver,
        EventKind::Commit,
        EventKind::Reject,
        EventKind::Start,
        EventKind::Complete,
        EventKind::Requeue,
        EventKind::AppDone,
        EventKind::DeadlineMiss,
        EventKind::DeviceAdd,
        EventKind::DeviceRemove,
        EventKind::BatteryDepleted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Deliver => "deliver",
            EventKind::Commit => "commit",
            EventKind::Reject => "reject",
            EventKind::Start => "start",
            EventKind::Complete => "complete",
            EventKind::Requeue => "requeue",
            EventKind::AppDone => "app_done",
            EventKind::DeadlineMiss => "deadline_miss",
            EventKind::DeviceAdd => "device_add",
            EventKind::DeviceRemove => "device_remove",
            EventKind::BatteryDepleted => "battery_depleted",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// One log line. The subject is a task id, an application id or a device
/// id depending on the kind; `detail` is a `;`-separated list of `key=value`
/// pairs and never contains a comma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub cycle: u64,
    pub kind: EventKind,
    pub subject: u32,
    pub detail: String,
}

impl Event {
    /// Value of `key` in the detail field.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.detail.split(';').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then_some(v)
        })
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let mut parts = line.splitn(4, ',');
        let mut next = |name: &str| parts.next().ok_or_else(|| format!("missing {name} in `{line}`"));
        let cycle = next("cycle")?;
        let kind = next("event_kind")?;
        let subject = next("subject_id")?;
        let detail = next("detail")?;
        Ok(Event {
            cycle: cycle.parse().map_err(|e| format!("bad cycle `{cycle}`: {e}"))?,
            kind: kind.parse()?,
            subject: subject.parse().map_err(|e| format!("bad subject `{subject}`: {e}"))?,
            detail: detail.to_string(),
        })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.cycle, self.kind, self.subject, self.detail)
    }
}

/// Where events go.
#[derive(Default)]
pub enum EventSink {
    #[default]
    Off,
    Memory(Vec<Event>),
    Writer(Box<dyn Write + Send>),
}

impl EventSink {
    pub fn memory() -> Self {
        EventSink::Memory(Vec::new())
    }

    /// Streams to `w`, starting with the header line.
    pub fn writer(mut w: Box<dyn Write + Send>) -> io::Result<Self> {
        writeln!(w, "{EVENT_LOG_HEADER}")?;
        Ok(EventSink::Writer(w))
    }

    pub fn is_on(&self) -> bool {
        !matches!(self, EventSink::Off)
    }

    pub(crate) fn emit(&mut self, cycle: u64, kind: EventKind, subject: u32, detail: impl FnOnce() -> String) -> io::Result<()> {
        match self {
            EventSink::Off => Ok(()),
            EventSink::Memory(v) => {
                v.push(Event { cycle, kind, subject, detail: detail() });
                Ok(())
            }
            EventSink::Writer(w) => writeln!(w, "{cycle},{kind},{subject},{}", detail()),
        }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        match self {
            EventSink::Writer(w) => w.flush(),
            _ => Ok(()),
        }
    }
}

/// Reads a log written by [`EventSink::writer`].
pub fn parse_event_log<R: BufRead>(reader: R) -> Result<Vec<Event>, String> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h == EVENT_LOG_HEADER => {}
        Some(Ok(h)) => return Err(format!("expected header `{EVENT_LOG_HEADER}`, found `{h}`")),
        Some(Err(e)) => return Err(e.to_string()),
        None => return Err("empty event log".into()),
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let l = l.map_err(|e| e.to_string())?;
            Event::parse_line(&l).map_err(|e| format!("line {}: {e}", i + 2))
        })
        .collect()
}
