//! Flag and config-file merging. Every command's flags are plain `Option`s;
//! the resolved settings are the config file's JSON object with each flag
//! that was given written over it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use seprate_core::ConvexBody;

/// Reads `path` as a JSON object.
pub fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("config file {} is not valid JSON", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => bail!("config file {} must hold a JSON object", path.display()),
    }
}

/// Overlays the non-null fields of `flags` on the config file (if any) and
/// deserializes the result. Unknown config keys are rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&PathBuf>) -> Result<T> {
    let mut merged = match config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags)? else {
        bail!("flags did not serialize to an object");
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid configuration")
}

/// A body given inline (`{...}`), as a path to a JSON file, or as an object
/// inside a config file.
pub fn parse_body(spec: &Value) -> Result<ConvexBody> {
    let text = match spec {
        Value::String(s) if s.trim_start().starts_with('{') => s.clone(),
        Value::String(path) => std::fs::read_to_string(path)
            .with_context(|| format!("--body is neither inline JSON nor a readable file: {path}"))?,
        Value::Object(_) => spec.to_string(),
        other => bail!("--body must be JSON or a file path, got {other}"),
    };
    Ok(ConvexBody::from_json(&text)?)
}

/// clap parser that keeps the raw flag text for [`parse_body`].
pub fn body_arg(s: &str) -> std::result::Result<Value, String> {
    Ok(Value::String(s.to_string()))
}

pub fn require<T>(v: Option<T>, name: &str) -> Result<T> {
    v.with_context(|| format!("missing required setting --{name}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Flags {
        n: Option<f64>,
        eta: Option<f64>,
        #[serde(skip_serializing, default)]
        config: Option<PathBuf>,
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"n": 100, "eta": 0.3}"#).unwrap();
        let flags = Flags {
            n: None,
            eta: Some(0.1),
            config: None,
        };
        let r = resolve(&flags, Some(&path)).unwrap();
        assert_eq!((r.n, r.eta), (Some(100.0), Some(0.1)));
        let plain = resolve(&flags, None).unwrap();
        assert_eq!(plain.n, None);
    }

    #[test]
    fn bad_config_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"n": 100, "bogus": 1}"#).unwrap();
        let flags = Flags {
            n: None,
            eta: None,
            config: None,
        };
        assert!(resolve(&flags, Some(&path)).is_err());
        std::fs::write(&path, "[1, 2]").unwrap();
        assert!(resolve(&flags, Some(&path)).is_err());
        assert!(resolve(&flags, Some(&dir.path().join("missing.json"))).is_err());
    }

    #[test]
    fn bodies_from_text_files_and_objects() {
        let inline = Value::String(r#"{"variant": "orthant", "d": 3}"#.into());
        assert_eq!(parse_body(&inline).unwrap().dim(), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        std::fs::write(&path, r#"{"variant": "ball", "d": 2, "radius": 1.5}"#).unwrap();
        let from_file = parse_body(&Value::String(path.display().to_string())).unwrap();
        assert_eq!(from_file.variant_name(), "ball");
        let object = serde_json::json!({"variant": "halfspace", "d": 4});
        assert_eq!(parse_body(&object).unwrap().dim(), 4);
        assert!(parse_body(&Value::String("{not json".into())).is_err());
        assert!(parse_body(&Value::from(3)).is_err());
    }
}
