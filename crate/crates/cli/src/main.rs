mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgesim::churn::{churn_sweep, write_sweep_csv, SweepError};
use edgesim::datagen::{export_csv, generate_workload, load_csv, CsvError};
use edgesim::engine::{EngineError, EventSink};
use edgesim::metrics::{export_metrics, load_metrics, plot_data, PlotKind};
use edgesim::scheduling::SchedulerRegistry;
use edgesim::Environment;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Invariant(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) | EngineError::Cycle(_) => CliError::Config(e.to_string()),
            EngineError::EventLog(_) => CliError::Io(e.to_string()),
            EngineError::Invariant { .. } | EngineError::Horizon(_) => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        match e {
            CsvError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "edgesim", version, about = "Cycle-based multi-agent scheduling simulator for IoT/MEC/Cloud fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set engine.total_cycles=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload and fleet and write them as CSV.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (overrides `output_dir`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation and write metrics.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Metrics directory (overrides `output_dir`).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write the event log to this file.
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Run every configured cycle even after the workload is done.
        #[arg(long)]
        exact_cycles: bool,
    },
    /// Average device churn over seeds for several probabilities.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated probabilities, e.g. `0.01,0.05,0.1,0.15`.
        #[arg(short, long)]
        probabilities: String,
        /// Seeds per probability, counting up from the engine seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Cycles per run (defaults to `engine.total_cycles`).
        #[arg(long)]
        cycles: Option<u64>,
        /// Output CSV.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Turn a metrics directory into a plot-ready series.
    PlotData {
        /// Directory written by `run`.
        #[arg(short, long)]
        metrics: PathBuf,
        /// iteration_time, memory_proxy, churn or makespan_hist.
        #[arg(short, long)]
        kind: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn workload(cfg: &RunConfig) -> Result<(Vec<edgesim::ApplicationSpec>, Vec<edgesim::DeviceSpec>), CliError> {
    match &cfg.workload_dir {
        Some(dir) => Ok(load_csv(dir)?),
        None => generate_workload(&cfg.generator).map_err(|e| CliError::Config(e.to_string())),
    }
}

fn environment(cfg: &RunConfig) -> Result<Environment, CliError> {
    let registry = SchedulerRegistry::default();
    let mut pool = registry
        .build_pool(&cfg.scheduler, cfg.agents, cfg.engine.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if !cfg.parallel_agents {
        pool = pool.sequential();
    }
    let (apps, devices) = workload(cfg)?;
    Ok(Environment::with_workload(apps, devices, cfg.generator.clone(), cfg.engine.clone(), pool)?)
}

fn cmd_generate(cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out.unwrap_or(cfg.output_dir.clone());
    let (apps, devices) = generate_workload(&cfg.generator).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let manifest = export_csv(&apps, &devices, &dir)?;
    let path = dir.join("manifest.txt");
    let mut text = format!(
        "seed={}\napplications={}\ntasks={}\ndevices={}\n",
        cfg.generator.seed,
        apps.len(),
        apps.iter().map(|a| a.tasks.len()).sum::<usize>(),
        devices.len()
    );
    for e in &manifest.entries {
        let name = e.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        text.push_str(&format!("file={name} rows={}\n", e.rows));
    }
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    println!("wrote {} applications and {} devices to {}", apps.len(), devices.len(), dir.display());
    Ok(())
}

fn cmd_run(cfg: RunConfig, out: Option<PathBuf>, event_log: Option<PathBuf>, exact: bool) -> Result<(), CliError> {
    let dir = out.unwrap_or(cfg.output_dir.clone());
    let mut env = environment(&cfg)?;
    if let Some(path) = &event_log {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let sink = EventSink::writer(Box::new(BufWriter::new(file))).map_err(|e| io_err(path, e))?;
        env.set_event_sink(sink);
    }
    let summary = env.run(exact)?;
    export_metrics(env.metrics(), &dir).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{summary}");
    Ok(())
}

fn parse_probabilities(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|p| {
            let v: f64 = p.trim().parse().map_err(|e| CliError::Config(format!("bad probability `{p}`: {e}")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Config(format!("probability {v} is outside [0, 1]")));
            }
            Ok(v)
        })
        .collect()
}

fn cmd_sweep(cfg: RunConfig, probabilities: &str, seeds: u64, cycles: Option<u64>, out: &Path) -> Result<(), CliError> {
    let probabilities = parse_probabilities(probabilities)?;
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let cycles = cycles.unwrap_or(cfg.engine.total_cycles);
    let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.engine.seed + i).collect();
    let make = |p: f64, seed: u64| {
        let mut run = cfg.clone();
        run.engine.churn.enabled = true;
        run.engine.churn.event_probability = p;
        run.engine.seed = seed;
        run.engine.total_cycles = cycles;
        environment(&run).map_err(|e| EngineError::Config(e.to_string()))
    };
    let rows = churn_sweep(make, &probabilities, cycles, &seed_list).map_err(|e| match e {
        SweepError::BadProbability(_) | SweepError::NoSeeds => CliError::Config(e.to_string()),
        SweepError::Run { source: EngineError::Config(m), .. } => CliError::Config(m),
        SweepError::Run { .. } => CliError::Invariant(e.to_string()),
        SweepError::Csv(_) | SweepError::Format(_) => CliError::Io(e.to_string()),
    })?;
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    write_sweep_csv(&rows, BufWriter::new(file)).map_err(|e| io_err(out, e))?;
    for r in &rows {
        println!("p={} mean_added={:.2} mean_removed={:.2}", r.probability, r.mean_added, r.mean_removed);
    }
    Ok(())
}

fn cmd_plot_data(metrics: &Path, kind: &str, out: &Path) -> Result<(), CliError> {
    let kind: PlotKind = kind.parse().map_err(|e: edgesim::metrics::UnknownPlotKind| CliError::Config(e.to_string()))?;
    let tables = load_metrics(metrics).map_err(|e| CliError::Io(e.to_string()))?;
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = BufWriter::new(file);
    let rows = plot_data(&tables, kind, &mut w).map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))?;
    println!("wrote {rows} rows of {kind} to {}", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { cfg, out } => cmd_generate(config::load(cfg.config.as_deref(), &cfg.overrides)?, out),
        Command::Run { cfg, out, event_log, exact_cycles } => {
            cmd_run(config::load(cfg.config.as_deref(), &cfg.overrides)?, out, event_log, exact_cycles)
        }
        Command::Sweep { cfg, probabilities, seeds, cycles, out } => {
            cmd_sweep(config::load(cfg.config.as_deref(), &cfg.overrides)?, &probabilities, seeds, cycles, &out)
        }
        Command::PlotData { metrics, kind, out } => cmd_plot_data(&metrics, &kind, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edgesim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
