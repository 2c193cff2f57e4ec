//! Layered configuration: defaults < JSON config file < `--set key=value`.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::UsageError;

pub const SEED_ENV: &str = "DUET_SEED";

/// Seed from the environment, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| UsageError(format!("{SEED_ENV}={v} is not an unsigned integer")).into()),
        Err(_) => Ok(None),
    }
}

/// Recursively overlays `top` onto `base`; objects merge, anything else
/// replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `a.b.c=value`. The value is read as JSON when possible and as a
/// plain string otherwise.
fn parse_override(spec: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| UsageError(format!("override `{spec}` is not of the form key=value")))?;
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(UsageError(format!("override `{spec}` has an empty key segment")).into());
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut node = root;
    for (i, key) in path.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            UsageError(format!(
                "override key `{}` does not name a section",
                path[..i].join(".")
            ))
        })?;
        if !obj.contains_key(key) {
            return Err(UsageError(format!("unknown config key `{}`", path[..=i].join("."))).into());
        }
        if i + 1 == path.len() {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        node = obj.get_mut(key).expect("checked above");
    }
    Ok(())
}

/// Resolves a config from its defaults, an optional JSON file and
/// overrides. Unknown keys in the file or the overrides are usage errors.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut value = serde_json::to_value(defaults).context("config: serializing defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("config: reading {}", path.display()))?;
        let layer: Value =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("config file {}: {e}", path.display())))?;
        if !layer.is_object() {
            return Err(UsageError(format!("config file {} must hold a JSON object", path.display())).into());
        }
        merge(&mut value, layer);
    }
    for spec in overrides {
        let (path, v) = parse_override(spec)?;
        set_path(&mut value, &path, v)?;
    }
    serde_json::from_value(value).map_err(|e| UsageError(format!("config: {e}")).into())
}

/// Prints the resolved config as one JSON line on stderr.
pub fn log_resolved<T: Serialize>(command: &str, config: &T) {
    let json = serde_json::to_string(config).unwrap_or_else(|e| format!("<unserializable: {e}>"));
    eprintln!("{command}: resolved config {json}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        rate: f64,
        name: String,
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Outer {
        epochs: usize,
        inner: Inner,
    }

    fn defaults() -> Outer {
        Outer {
            epochs: 3,
            inner: Inner {
                rate: 0.5,
                name: "a".into(),
            },
        }
    }

    #[test]
    fn file_then_overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epochs": 7, "inner": {"name": "file"}}"#).unwrap();
        let got = resolve(
            &defaults(),
            Some(&path),
            &["inner.name=cli".into(), "inner.rate=2".into()],
        )
        .unwrap();
        assert_eq!(
            got,
            Outer {
                epochs: 7,
                inner: Inner {
                    rate: 2.0,
                    name: "cli".into()
                }
            }
        );
        let file_only = resolve(&defaults(), Some(&path), &[]).unwrap();
        assert_eq!(file_only.inner.name, "file");
        assert_eq!(file_only.inner.rate, 0.5);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        for bad in ["epoch=2", "inner.rat=1", "epochs.x=1", "noequals", "inner..rate=1"] {
            let err = resolve(&defaults(), None, &[bad.into()]).unwrap_err();
            assert!(err.is::<UsageError>(), "{bad}: {err}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epohcs": 7}"#).unwrap();
        assert!(resolve(&defaults(), Some(&path), &[]).unwrap_err().is::<UsageError>());
    }

    #[test]
    fn wrong_types_are_rejected() {
        assert!(resolve(&defaults(), None, &["epochs=many".into()]).is_err());
    }
}
