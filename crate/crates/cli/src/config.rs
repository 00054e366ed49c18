use std::path::{Path, PathBuf};

use edgesim::datagen::GenConfig;
use edgesim::engine::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "SCHEDGE_SEED";

/// Everything one invocation needs, read from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheduler: String,
    pub agents: usize,
    pub parallel_agents: bool,
    /// Where `run` writes metrics and `generate` writes workloads.
    pub output_dir: PathBuf,
    /// Load the workload from these CSVs instead of generating it.
    pub workload_dir: Option<PathBuf>,
    /// Manual churn directives (`cycle,action,tier`), appended to
    /// `engine.churn.manual_script`.
    pub churn_script: Option<PathBuf>,
    pub generator: GenConfig,
    pub engine: EngineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheduler: "greedy_eft".into(),
            agents: 24,
            parallel_agents: true,
            output_dir: PathBuf::from("out"),
            workload_dir: None,
            churn_script: None,
            generator: GenConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

/// Sets `key` (dotted path) in `table` to `raw`, parsed as a TOML value
/// when possible and as a bare string otherwise.
fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads `path` (or defaults), applies `--set` overrides and the seed
/// environment variable, and resolves relative paths against the config
/// file's directory.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let (mut table, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (toml::Table::new(), PathBuf::new()),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{o}`")))?;
        apply_override(&mut table, k.trim(), v.trim())?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;

    if let Ok(seed) = std::env::var(SEED_ENV) {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("{SEED_ENV}=`{seed}`: {e}")))?;
        cfg.generator.seed = seed;
        cfg.engine.seed = seed;
    }

    let resolve = |p: &mut PathBuf| {
        if p.is_relative() && !base.as_os_str().is_empty() {
            *p = base.join(&*p);
        }
    };
    resolve(&mut cfg.output_dir);
    if let Some(p) = cfg.workload_dir.as_mut() {
        resolve(p);
        if !p.is_dir() {
            return Err(CliError::Config(format!("workload_dir {} does not exist", p.display())));
        }
    }
    if let Some(p) = cfg.churn_script.as_mut() {
        resolve(p);
        let script = edgesim::churn::load_script(p).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.engine.churn.manual_script.extend(script);
    }
    if cfg.agents == 0 {
        return Err(CliError::Config("agents must be at least 1".into()));
    }
    cfg.generator.validate().map_err(|e| CliError::Config(e.to_string()))?;
    cfg.engine.validate().map_err(CliError::Config)?;
    Ok(cfg)
}
