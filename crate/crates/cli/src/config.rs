//! Config loading: JSON file, then `--set` overrides on the fully defaulted
//! value, then typed validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// An error the user can fix by changing the invocation (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: String) -> Result<T, UsageError> {
    Err(UsageError(msg))
}

/// Parses `key=value`. The value is read as JSON when it parses as JSON and
/// as a plain string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), UsageError> {
    let Some((key, raw)) = s.split_once('=') else {
        return usage(format!("--set expects key=value, got `{s}`"));
    };
    if key.is_empty() {
        return usage(format!("--set `{s}` has an empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Replaces the value at a dotted path; every segment must already exist.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), UsageError> {
    let mut cur = root;
    for seg in key.split('.') {
        cur = match cur {
            Value::Object(map) => match map.get_mut(seg) {
                Some(v) => v,
                None => return usage(format!("unknown config key `{key}`")),
            },
            Value::Array(items) => match seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)) {
                Some(v) => v,
                None => return usage(format!("unknown config key `{key}`")),
            },
            _ => return usage(format!("unknown config key `{key}`")),
        };
    }
    *cur = value;
    Ok(())
}

pub struct Loaded<T> {
    pub config: T,
    /// Directory that relative paths in the file are resolved against.
    pub base: PathBuf,
}

/// Reads `path` as `T`, applies overrides and returns the re-validated config.
pub fn load<T: DeserializeOwned + Serialize>(
    path: &Path,
    overrides: &[(String, Value)],
) -> Result<Loaded<T>, UsageError> {
    let text = std::fs::read_to_string(path)
        .or_else(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let typed: T = serde_json::from_str(&text)
        .or_else(|e| usage(format!("config {}: {e}", path.display())))?;
    let mut value = serde_json::to_value(&typed).expect("config serializes");
    for (k, v) in overrides {
        apply_override(&mut value, k, v.clone())?;
    }
    let config = serde_json::from_value(value)
        .or_else(|e| usage(format!("config {} after overrides: {e}", path.display())))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok(Loaded { config, base })
}

pub fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}
