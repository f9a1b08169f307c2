//! Loading configs from TOML with dotted-path overrides, and config hashes.

use std::path::Path;

use irsopt_core::config::ScenarioConfig;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};

/// Parses `key=value`; the value is read as a TOML literal, or as a bare
/// string if it is not one.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Validation(format!("override `{s}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed table has the key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

/// Sets `key` (dotted; numeric segments index arrays) in `root`, creating
/// missing tables.
pub fn apply_override(root: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur: &mut Value = root
        .entry(parts[0].to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let bad = |msg: &str| CliError::Validation(format!("override `{key}`: {msg}"));
    for part in &parts[1..] {
        cur = match cur {
            Value::Table(t) => t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = part.parse().map_err(|_| bad("array segment must be an index"))?;
                a.get_mut(i).ok_or_else(|| bad("array index out of range"))?
            }
            _ => return Err(bad("path goes through a scalar")),
        };
    }
    *cur = value;
    Ok(())
}

/// Deserializes and validates; errors name the offending key.
pub fn config_from_table(table: Table) -> Result<ScenarioConfig> {
    let de = Value::Table(table);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        // the TOML error repeats the (coarser) key path on a second line
        let inner = e.inner().to_string();
        let message = inner.lines().next().unwrap_or_default().to_string();
        CliError::Validation(format!("configuration error at `{path}`: {message}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut table: Table = toml::from_str(text).map_err(|e| CliError::Validation(format!("invalid TOML: {e}")))?;
    for o in overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut table, &k, v)?;
    }
    config_from_table(table)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, overrides).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Hex SHA-256 of the canonical JSON form of the whole config.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hash_json(&serde_json::to_value(cfg).expect("config serializes"))
}

/// Hash of everything a beam set depends on: the config without its
/// `evaluation` section.
pub fn beam_compat_hash(cfg: &ScenarioConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("evaluation");
    }
    hash_json(&v)
}

fn hash_json(v: &serde_json::Value) -> String {
    hex_digest(&serde_json::to_vec(v).expect("json serializes"))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// First 64 bits of a hex digest, for the numeric hash fields.
pub fn short_hash(hex: &str) -> u64 {
    u64::from_str_radix(&hex[..16], 16).expect("hex digest")
}

/// Sorted-key TOML rendering, used to store the effective config next to
/// the results.
pub fn to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serializes to TOML")
}
