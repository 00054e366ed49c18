//! `applications.csv`, `tasks.csv` and `devices.csv` persistence.

use std::collections::HashMap;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::graph::validate_application;
use crate::model::{ApplicationSpec, AppId, DeviceId, DeviceSpec, TaskId, TaskSpec, Tier};

pub const APPLICATIONS_FILE: &str = "applications.csv";
pub const TASKS_FILE: &str = "tasks.csv";
pub const DEVICES_FILE: &str = "devices.csv";

const APPLICATIONS_HEADER: &[&str] = &["app_id", "deadline_cycles", "num_tasks"];
const TASKS_HEADER: &[&str] = &[
    "task_id",
    "app_id",
    "compute_load",
    "input_size_mb",
    "output_size_mb",
    "safety_level",
    "predecessors",
];
const DEVICES_HEADER: &[&str] = &[
    "device_id",
    "tier",
    "num_cores",
    "core_speed",
    "queue_capacity",
    "battery_wh",
    "active_power_w",
    "idle_power_w",
    "safety_capability",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("{file}: expected header `{expected}`, found `{found}`")]
    SchemaMismatch { file: String, expected: String, found: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CsvError {
    fn io(path: &Path, source: impl Into<io::Error>) -> Self {
        CsvError::Io { path: path.to_path_buf(), source: source.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// Data rows, header excluded.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileManifest {
    pub entries: Vec<ManifestEntry>,
}

impl FileManifest {
    pub fn rows(&self, file_name: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.path.file_name().is_some_and(|n| n == file_name))
            .map(|e| e.rows)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CsvError> {
    let file = File::create(path).map_err(|e| CsvError::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn write_row<W: io::Write>(w: &mut csv::Writer<W>, path: &Path, row: &[String]) -> Result<(), CsvError> {
    w.write_record(row).map_err(|e| CsvError::io(path, io::Error::other(e)))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the three workload files into `dir`. Refuses to write anything if
/// an application or device breaks its invariants.
pub fn export_csv(
    apps: &[ApplicationSpec],
    devices: &[DeviceSpec],
    dir: &Path,
) -> Result<FileManifest, CsvError> {
    for app in apps {
        let v = validate_application(app);
        if let Some(first) = v.first() {
            return Err(CsvError::Invariant(format!("application {}: {first}", app.id)));
        }
    }
    for dev in devices {
        if let Some(first) = dev.violations().into_iter().next() {
            return Err(CsvError::Invariant(first));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CsvError::io(dir, e))?;

    let mut manifest = FileManifest::default();

    let path = dir.join(APPLICATIONS_FILE);
    let mut w = writer(&path)?;
    write_row(&mut w, &path, &APPLICATIONS_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    for app in apps {
        write_row(
            &mut w,
            &path,
            &[app.id.to_string(), app.deadline_cycles.to_string(), app.tasks.len().to_string()],
        )?;
    }
    w.flush().map_err(|e| CsvError::io(&path, e))?;
    manifest.entries.push(ManifestEntry { path, rows: apps.len() });

    let path = dir.join(TASKS_FILE);
    let mut w = writer(&path)?;
    write_row(&mut w, &path, &TASKS_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    let mut rows = 0;
    for task in apps.iter().flat_map(|a| &a.tasks) {
        let preds: Vec<String> = task.predecessors.iter().map(ToString::to_string).collect();
        write_row(
            &mut w,
            &path,
            &[
                task.id.to_string(),
                task.app.to_string(),
                task.compute_load.to_string(),
                task.input_size_mb.to_string(),
                task.output_size_mb.to_string(),
                task.safety_level.to_string(),
                preds.join(";"),
            ],
        )?;
        rows += 1;
    }
    w.flush().map_err(|e| CsvError::io(&path, e))?;
    manifest.entries.push(ManifestEntry { path, rows });

    let path = dir.join(DEVICES_FILE);
    let mut w = writer(&path)?;
    write_row(&mut w, &path, &DEVICES_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    for dev in devices {
        write_row(
            &mut w,
            &path,
            &[
                dev.id.to_string(),
                dev.tier.to_string(),
                dev.cores.len().to_string(),
                dev.core_speed().to_string(),
                opt(dev.queue_capacity()),
                opt(dev.battery_wh),
                dev.active_power_w.to_string(),
                dev.idle_power_w.to_string(),
                dev.safety_capability.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| CsvError::io(&path, e))?;
    manifest.entries.push(ManifestEntry { path, rows: devices.len() });

    Ok(manifest)
}

/// Reads one file, checking the header and handing each data row (with its
/// 1-based line number) to `row`.
fn read_file(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(u64, &csv::StringRecord) -> Result<(), String>,
) -> Result<(), CsvError> {
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let file = File::open(path).map_err(|e| CsvError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| CsvError::Parse { file: file_name.clone(), line: 1, message: e.to_string() })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CsvError::SchemaMismatch {
            file: file_name,
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    for record in reader.records() {
        let record = record.map_err(|e| CsvError::Parse {
            file: file_name.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        row(line, &record).map_err(|message| CsvError::Parse { file: file_name.clone(), line, message })?;
    }
    Ok(())
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| format!("missing column {name}"))?;
    raw.trim().parse().map_err(|e| format!("bad {name} `{raw}`: {e}"))
}

fn opt_field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => field(rec, i, name).map(Some),
    }
}

/// Loads a workload directory written by [`export_csv`].
pub fn load_csv(dir: &Path) -> Result<(Vec<ApplicationSpec>, Vec<DeviceSpec>), CsvError> {
    let mut apps: Vec<(ApplicationSpec, usize)> = Vec::new();
    let mut app_pos: HashMap<AppId, usize> = HashMap::new();
    read_file(&dir.join(APPLICATIONS_FILE), APPLICATIONS_HEADER, |_, rec| {
        let id: AppId = field(rec, 0, "app_id")?;
        let deadline_cycles = field(rec, 1, "deadline_cycles")?;
        let num_tasks = field(rec, 2, "num_tasks")?;
        if app_pos.insert(id, apps.len()).is_some() {
            return Err(format!("duplicate app_id {id}"));
        }
        apps.push((ApplicationSpec { id, deadline_cycles, tasks: Vec::new() }, num_tasks));
        Ok(())
    })?;

    let mut orphan: Option<(TaskId, AppId)> = None;
    read_file(&dir.join(TASKS_FILE), TASKS_HEADER, |_, rec| {
        let preds_raw = rec.get(6).unwrap_or("");
        let predecessors = preds_raw
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| format!("bad predecessor `{s}`: {e}")))
            .collect::<Result<Vec<TaskId>, _>>()?;
        let task = TaskSpec {
            id: field(rec, 0, "task_id")?,
            app: field(rec, 1, "app_id")?,
            compute_load: field(rec, 2, "compute_load")?,
            input_size_mb: field(rec, 3, "input_size_mb")?,
            output_size_mb: field(rec, 4, "output_size_mb")?,
            safety_level: field(rec, 5, "safety_level")?,
            predecessors,
        };
        match app_pos.get(&task.app) {
            Some(&i) => apps[i].0.tasks.push(task),
            None => orphan = orphan.or(Some((task.id, task.app))),
        }
        Ok(())
    })?;
    if let Some((task, app)) = orphan {
        return Err(CsvError::Invariant(format!("task {task} references unknown application {app}")));
    }

    let mut out = Vec::with_capacity(apps.len());
    for (app, declared) in apps {
        if app.tasks.len() != declared {
            return Err(CsvError::Invariant(format!(
                "application {} declares {declared} tasks but tasks.csv has {}",
                app.id,
                app.tasks.len()
            )));
        }
        if let Some(v) = validate_application(&app).first() {
            return Err(CsvError::Invariant(format!("application {}: {v}", app.id)));
        }
        out.push(app);
    }

    let mut devices = Vec::new();
    read_file(&dir.join(DEVICES_FILE), DEVICES_HEADER, |_, rec| {
        let tier: Tier = field(rec, 1, "tier")?;
        let dev = DeviceSpec::new(
            field::<DeviceId>(rec, 0, "device_id")?,
            tier,
            field(rec, 2, "num_cores")?,
            field(rec, 3, "core_speed")?,
            opt_field(rec, 4, "queue_capacity")?,
            opt_field(rec, 5, "battery_wh")?,
            field(rec, 6, "active_power_w")?,
            field(rec, 7, "idle_power_w")?,
            field(rec, 8, "safety_capability")?,
        );
        if let Some(v) = dev.violations().into_iter().next() {
            return Err(v);
        }
        devices.push(dev);
        Ok(())
    })?;

    Ok((out, devices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_applications, generate_devices, GenConfig};
    use crate::rng::stream_rng;

    fn tiny_app(id: u32, first_task: u32) -> ApplicationSpec {
        let t = |i: u32, preds: Vec<TaskId>| TaskSpec {
            id: TaskId(first_task + i),
            app: AppId(id),
            compute_load: 3 + i as u64,
            input_size_mb: 10,
            output_size_mb: 20,
            safety_level: 1,
            predecessors: preds,
        };
        ApplicationSpec {
            id: AppId(id),
            deadline_cycles: 50,
            tasks: vec![
                t(0, vec![]),
                t(1, vec![TaskId(first_task)]),
                t(2, vec![TaskId(first_task), TaskId(first_task + 1)]),
            ],
        }
    }

    #[test]
    fn two_apps_of_three_tasks() {
        let dir = tempfile::tempdir().unwrap();
        let apps = vec![tiny_app(0, 0), tiny_app(1, 3)];
        let manifest = export_csv(&apps, &[], dir.path()).unwrap();
        assert_eq!(manifest.rows(TASKS_FILE), Some(6));
        let text = std::fs::read_to_string(dir.path().join(TASKS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), TASKS_HEADER.join(","));
        assert!(text.contains("\n4,1,4,10,20,1,3\n"));
        assert!(text.contains("\n5,1,5,10,20,1,3;4\n"));
        let (loaded, devices) = load_csv(dir.path()).unwrap();
        assert_eq!(loaded, apps);
        assert!(devices.is_empty());
    }

    #[test]
    fn generated_workload_round_trips() {
        let cfg = GenConfig { num_apps: 30, num_iot: 5, num_mec: 3, ..GenConfig::default() };
        let apps = generate_applications(&cfg, &mut stream_rng(4, 1)).unwrap();
        let devices = generate_devices(&cfg, &mut stream_rng(4, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_csv(&apps, &devices, dir.path()).unwrap();
        let (a, d) = load_csv(dir.path()).unwrap();
        assert_eq!(a, apps);
        assert_eq!(d, devices);
        let text = std::fs::read_to_string(dir.path().join(DEVICES_FILE)).unwrap();
        let cloud = text.lines().last().unwrap();
        assert!(cloud.contains(",Cloud,16,16,,,"), "{cloud}");
    }

    #[test]
    fn dangling_predecessor_is_named() {
        let dir = tempfile::tempdir().unwrap();
        export_csv(&[tiny_app(0, 0)], &[], dir.path()).unwrap();
        let path = dir.path().join(TASKS_FILE);
        let text = std::fs::read_to_string(&path).unwrap().replace("\n1,0,4,10,20,1,0\n", "\n1,0,4,10,20,1,77\n");
        std::fs::write(&path, text).unwrap();
        match load_csv(dir.path()) {
            Err(CsvError::Invariant(msg)) => assert!(msg.contains("77"), "{msg}"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        export_csv(&[tiny_app(0, 0)], &[], dir.path()).unwrap();
        std::fs::write(dir.path().join(APPLICATIONS_FILE), "id,deadline,n\n0,50,3\n").unwrap();
        assert!(matches!(load_csv(dir.path()), Err(CsvError::SchemaMismatch { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        export_csv(&[tiny_app(0, 0)], &[], dir.path()).unwrap();
        let path = dir.path().join(TASKS_FILE);
        let text = std::fs::read_to_string(&path).unwrap().replace("\n2,0,5,", "\n2,0,five,");
        std::fs::write(&path, text).unwrap();
        match load_csv(dir.path()) {
            Err(CsvError::Parse { file, line, .. }) => {
                assert_eq!(file, TASKS_FILE);
                assert_eq!(line, 4);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_data_is_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut app = tiny_app(0, 0);
        app.tasks[0].predecessors.push(TaskId(2));
        assert!(matches!(export_csv(&[app], &[], dir.path()), Err(CsvError::Invariant(_))));
        assert!(!dir.path().join(TASKS_FILE).exists());
    }
}
