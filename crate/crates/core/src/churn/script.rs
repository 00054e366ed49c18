use std::io::Read;
use std::path::Path;

use super::{ChurnAction, ScriptedChurn};
use crate::model::Tier;

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read churn script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("churn script line {line}: {message}")]
    Parse { line: usize, message: String },
}

const HEADER: [&str; 3] = ["cycle", "action", "tier"];

/// Parses a `cycle,action,tier` script. The tier may be empty for removals.
pub fn parse_script<R: Read>(reader: R) -> Result<Vec<ScriptedChurn>, ScriptError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| ScriptError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(ScriptError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let err = |message: String| ScriptError::Parse { line, message };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let cycle = rec[0].parse::<u64>().map_err(|e| err(format!("bad cycle `{}`: {e}", &rec[0])))?;
        let action = rec[1].parse::<ChurnAction>().map_err(err)?;
        let tier = match rec.get(2).unwrap_or("") {
            "" => None,
            t => Some(t.parse::<Tier>().map_err(|e| err(e.to_string()))?),
        };
        if action == ChurnAction::Add && tier.is_none() {
            return Err(err("add requires a tier".into()));
        }
        if tier == Some(Tier::Cloud) {
            return Err(err("the Cloud tier cannot churn".into()));
        }
        out.push(ScriptedChurn { cycle, action, tier });
    }
    Ok(out)
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptedChurn>, ScriptError> {
    let file = std::fs::File::open(path).map_err(|source| ScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_script(file)
}
