use std::fs::File;
use std::path::Path;

use super::{AppRecord, CycleRecord, MetricsStore, MonitorSample};
use crate::churn::{ChurnAction, ChurnRecord};
use crate::datagen::{FileManifest, ManifestEntry};
use crate::model::{AppId, DeviceId, Tier};

pub const CYCLES_CSV: &str = "cycles.csv";
pub const APPS_CSV: &str = "apps.csv";
pub const DEVICES_CSV: &str = "devices.csv";
pub const MONITOR_CSV: &str = "monitor.csv";
pub const CHURN_CSV: &str = "churn.csv";

const CYCLES_HEADER: [&str; 9] = [
    "cycle",
    "delivered",
    "scheduled",
    "rejected",
    "completed",
    "apps_completed",
    "fleet_size",
    "total_battery_wh",
    "wall_time_s",
];
const APPS_HEADER: [&str; 5] = ["app_id", "arrival_cycle", "completion_cycle", "makespan_cycles", "deadline_met"];
const DEVICES_HEADER: [&str; 4] = ["device_id", "tier", "energy_wh", "lifetime_cycles"];
const MONITOR_HEADER: [&str; 7] = ["cycle", "live_objects", "remaining", "running", "finished", "queued", "active_apps"];
const CHURN_HEADER: [&str; 4] = ["cycle", "action", "device_id", "tier"];

/// One row of `devices.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceRecord {
    pub device: DeviceId,
    pub tier: Tier,
    pub energy_wh: f64,
    pub lifetime_cycles: u64,
}

/// Metrics as they are stored on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTables {
    pub cycles: Vec<CycleRecord>,
    pub apps: Vec<AppRecord>,
    pub devices: Vec<DeviceRecord>,
    pub monitor: Vec<MonitorSample>,
    pub churn: Vec<ChurnRecord>,
}

impl MetricsStore {
    pub fn device_records(&self) -> Vec<DeviceRecord> {
        self.meters
            .iter()
            .map(|(&device, m)| DeviceRecord {
                device,
                tier: m.tier,
                energy_wh: m.energy_wh,
                lifetime_cycles: self.lifetime_cycles(device).unwrap_or(0),
            })
            .collect()
    }

    pub fn tables(&self) -> MetricsTables {
        MetricsTables {
            cycles: self.cycles.clone(),
            apps: self.apps.clone(),
            devices: self.device_records(),
            monitor: self.monitor.clone(),
            churn: self.churn.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

fn writer(dir: &Path, name: &str) -> Result<(csv::Writer<File>, String), MetricsIoError> {
    let path = dir.join(name);
    let shown = path.display().to_string();
    let file = File::create(&path).map_err(|source| MetricsIoError::Io { path: shown.clone(), source })?;
    Ok((csv::Writer::from_writer(file), shown))
}

fn write_table<const N: usize>(
    dir: &Path,
    name: &str,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
    manifest: &mut FileManifest,
) -> Result<(), MetricsIoError> {
    let (mut w, path) = writer(dir, name)?;
    let csv_err = |source| MetricsIoError::Csv { path: path.clone(), source };
    w.write_record(header).map_err(csv_err)?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
        count += 1;
    }
    w.flush().map_err(|source| MetricsIoError::Io { path: path.clone(), source })?;
    manifest.entries.push(ManifestEntry { path: dir.join(name), rows: count });
    Ok(())
}

/// Writes `cycles.csv`, `apps.csv`, `devices.csv`, `monitor.csv` and
/// `churn.csv` into `dir`.
pub fn export_metrics(store: &MetricsStore, dir: &Path) -> Result<FileManifest, MetricsIoError> {
    std::fs::create_dir_all(dir).map_err(|source| MetricsIoError::Io { path: dir.display().to_string(), source })?;
    let t = store.tables();
    let mut m = FileManifest::default();
    write_table(
        dir,
        CYCLES_CSV,
        CYCLES_HEADER,
        t.cycles.iter().map(|c| {
            [
                c.cycle.to_string(),
                c.delivered.to_string(),
                c.scheduled.to_string(),
                c.rejected.to_string(),
                c.completed.to_string(),
                c.apps_completed.to_string(),
                c.fleet_size.to_string(),
                c.total_battery_wh.to_string(),
                c.wall_time_s.to_string(),
            ]
        }),
        &mut m,
    )?;
    write_table(
        dir,
        APPS_CSV,
        APPS_HEADER,
        t.apps.iter().map(|a| {
            [
                a.app.to_string(),
                a.arrival_cycle.to_string(),
                a.completion_cycle.to_string(),
                a.makespan_cycles.to_string(),
                a.deadline_met.to_string(),
            ]
        }),
        &mut m,
    )?;
    write_table(
        dir,
        DEVICES_CSV,
        DEVICES_HEADER,
        t.devices.iter().map(|d| {
            [d.device.to_string(), d.tier.to_string(), d.energy_wh.to_string(), d.lifetime_cycles.to_string()]
        }),
        &mut m,
    )?;
    write_table(
        dir,
        MONITOR_CSV,
        MONITOR_HEADER,
        t.monitor.iter().map(|s| {
            [
                s.cycle.to_string(),
                s.live_objects.to_string(),
                s.remaining.to_string(),
                s.running.to_string(),
                s.finished.to_string(),
                s.queued.to_string(),
                s.active_apps.to_string(),
            ]
        }),
        &mut m,
    )?;
    write_table(
        dir,
        CHURN_CSV,
        CHURN_HEADER,
        t.churn.iter().map(|c| [c.cycle.to_string(), c.action.to_string(), c.device.to_string(), c.tier.to_string()]),
        &mut m,
    )?;
    Ok(m)
}

fn read_table<T, const N: usize>(
    dir: &Path,
    name: &str,
    header: [&str; N],
    parse: impl Fn(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, MetricsIoError> {
    let path = dir.join(name);
    let shown = path.display().to_string();
    let file = File::open(&path).map_err(|source| MetricsIoError::Io { path: shown.clone(), source })?;
    let mut rdr = csv::Reader::from_reader(file);
    let found = rdr.headers().map_err(|source| MetricsIoError::Csv { path: shown.clone(), source })?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(MetricsIoError::Parse {
            path: shown,
            line: 1,
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|source| MetricsIoError::Csv { path: shown.clone(), source })?;
            parse(&rec).map_err(|message| MetricsIoError::Parse { path: shown.clone(), line: i + 2, message })
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| format!("missing column {}", i + 1))?;
    raw.parse().map_err(|e| format!("column {}: `{raw}`: {e}", i + 1))
}

/// Reads metrics written by [`export_metrics`]. `monitor.csv` and
/// `churn.csv` are optional.
pub fn load_metrics(dir: &Path) -> Result<MetricsTables, MetricsIoError> {
    let cycles = read_table(dir, CYCLES_CSV, CYCLES_HEADER, |r| {
        Ok(CycleRecord {
            cycle: field(r, 0)?,
            delivered: field(r, 1)?,
            scheduled: field(r, 2)?,
            rejected: field(r, 3)?,
            completed: field(r, 4)?,
            apps_completed: field(r, 5)?,
            fleet_size: field(r, 6)?,
            total_battery_wh: field(r, 7)?,
            wall_time_s: field(r, 8)?,
        })
    })?;
    let apps = read_table(dir, APPS_CSV, APPS_HEADER, |r| {
        Ok(AppRecord {
            app: field::<AppId>(r, 0)?,
            arrival_cycle: field(r, 1)?,
            completion_cycle: field(r, 2)?,
            makespan_cycles: field(r, 3)?,
            deadline_met: field(r, 4)?,
        })
    })?;
    let devices = read_table(dir, DEVICES_CSV, DEVICES_HEADER, |r| {
        Ok(DeviceRecord {
            device: field::<DeviceId>(r, 0)?,
            tier: field::<Tier>(r, 1)?,
            energy_wh: field(r, 2)?,
            lifetime_cycles: field(r, 3)?,
        })
    })?;
    let optional = |name: &str| dir.join(name).exists();
    let monitor = if optional(MONITOR_CSV) {
        read_table(dir, MONITOR_CSV, MONITOR_HEADER, |r| {
            Ok(MonitorSample {
                cycle: field(r, 0)?,
                live_objects: field(r, 1)?,
                remaining: field(r, 2)?,
                running: field(r, 3)?,
                finished: field(r, 4)?,
                queued: field(r, 5)?,
                active_apps: field(r, 6)?,
            })
        })?
    } else {
        Vec::new()
    };
    let churn = if optional(CHURN_CSV) {
        read_table(dir, CHURN_CSV, CHURN_HEADER, |r| {
            Ok(ChurnRecord {
                cycle: field(r, 0)?,
                action: field::<ChurnAction>(r, 1)?,
                device: field::<DeviceId>(r, 2)?,
                tier: field::<Tier>(r, 3)?,
            })
        })?
    } else {
        Vec::new()
    };
    Ok(MetricsTables { cycles, apps, devices, monitor, churn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::FinishedApp;

    #[test]
    fn empty_store_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_metrics(&MetricsStore::new(), dir.path()).unwrap();
        assert_eq!(manifest.rows(CYCLES_CSV), Some(0));
        let text = std::fs::read_to_string(dir.path().join(CYCLES_CSV)).unwrap();
        assert_eq!(text, format!("{}\n", CYCLES_HEADER.join(",")));
        let apps = std::fs::read_to_string(dir.path().join(APPS_CSV)).unwrap();
        assert_eq!(apps, "app_id,arrival_cycle,completion_cycle,makespan_cycles,deadline_met\n");
        assert_eq!(load_metrics(dir.path()).unwrap(), MetricsTables::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut store = MetricsStore::new();
        store.cycles.push(CycleRecord {
            cycle: 0,
            delivered: 3,
            scheduled: 2,
            rejected: 1,
            completed: 0,
            apps_completed: 0,
            fleet_size: 151,
            total_battery_wh: 1_234.567_890_123_4,
            wall_time_s: 1.5e-5,
        });
        store.record_app(&FinishedApp { app: AppId(2), first_delivery_cycle: 0, completion_cycle: 9, deadline_cycles: 5 });
        let dev = crate::model::DeviceSpec::new(DeviceId(3), Tier::Mec, 1, 8, Some(20), Some(150.0), 8.0, 0.8, 2);
        store.register_device(&dev, 0);
        store.add_energy(DeviceId(3), 0.1 + 0.2);
        store.record_churn(ChurnRecord { cycle: 0, action: ChurnAction::Remove, device: DeviceId(3), tier: Tier::Mec });
        store.retire_device(DeviceId(3), 1);
        let dir = tempfile::tempdir().unwrap();
        export_metrics(&store, dir.path()).unwrap();
        assert_eq!(load_metrics(dir.path()).unwrap(), store.tables());
    }

    #[test]
    fn missing_files_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_metrics(dir.path()), Err(MetricsIoError::Io { .. })));
    }
}
