//! Config resolution and artifact annotation.
//!
//! Precedence: command-line flags override the `--config` JSON file, which
//! overrides built-in defaults. Resolution happens at the JSON level so each
//! command declares one defaulted config struct plus one flags struct with
//! optional fields.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::errors::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(base_map), Value::Object(patch_map)) => {
            for (key, value) in patch_map {
                match base_map.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        base_map.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Builds the resolved config: defaults, then the optional config file, then
/// the present CLI flags. Flags structs serialize with absent options
/// skipped, so only explicitly-set flags override.
pub fn resolve<C, F>(config_path: Option<&Path>, flags: &F) -> CliResult<C>
where
    C: DeserializeOwned + Serialize + Default,
    F: Serialize,
{
    let mut value = serde_json::to_value(C::default())?;
    if let Some(path) = config_path {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let file_value: Value = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        merge(&mut value, file_value);
    }
    let flag_value = serde_json::to_value(flags)?;
    merge(&mut value, flag_value);
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid config: {e}")))
}

/// Adds `tool_version` and the resolved `config` into a JSON artifact.
pub fn annotate(artifact: &mut Value, config: &impl Serialize) -> CliResult<()> {
    if let Value::Object(map) = artifact {
        map.insert("tool_version".into(), Value::String(TOOL_VERSION.into()));
        map.insert("config".into(), serde_json::to_value(config)?);
        Ok(())
    } else {
        Err(CliError::usage("artifact is not a JSON object"))
    }
}

/// Writes the resolved config echo for artifacts that cannot embed it
/// (CSV files, IQ binaries): `run_config.json` in a directory, or
/// `<file>.run.json` next to a file.
pub fn write_run_config(target: &Path, command: &str, config: &impl Serialize) -> CliResult<()> {
    let path = if target.is_dir() {
        target.join("run_config.json")
    } else {
        let mut os = target.as_os_str().to_owned();
        os.push(".run.json");
        PathBuf::from(os)
    };
    let body = serde_json::json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
    });
    std::fs::write(path, serde_json::to_string_pretty(&body)?)?;
    Ok(())
}

/// Writes an annotated JSON artifact.
pub fn write_annotated_json(
    path: &Path,
    mut artifact: Value,
    config: &impl Serialize,
) -> CliResult<()> {
    annotate(&mut artifact, config)?;
    std::fs::write(path, serde_json::to_string_pretty(&artifact)?)?;
    Ok(())
}

/// Usage-level check that an input file exists, with a role-specific message
/// ("model not found: ...").
pub fn require_file(path: &Path, role: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "{role} not found: {}",
            path.display()
        )));
    }
    Ok(())
}
