use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Version of both the config and the report layout.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Maxent,
    Schrodinger,
    Film,
    Curvature,
    Cartan,
    SpinorCheck,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Maxent => "maxent",
            Command::Schrodinger => "schrodinger",
            Command::Film => "film",
            Command::Curvature => "curvature",
            Command::Cartan => "cartan",
            Command::SpinorCheck => "spinor-check",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub command: Command,
    #[serde(default = "empty_object")]
    pub parameters: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl RunConfig {
    pub fn new(command: Command, parameters: Value) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), command, parameters, output_dir: None, seed: 0 }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            pointer: pointer(e.path()),
            message: e.inner().to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config {
                pointer: "/schema_version".into(),
                message: format!("unsupported schema version {:?}, expected {SCHEMA_VERSION:?}", cfg.schema_version),
            });
        }
        if !cfg.parameters.is_object() {
            return Err(CliError::Config { pointer: "/parameters".into(), message: "parameters must be an object".into() });
        }
        Ok(cfg)
    }
}

/// Parses `value`, reporting failures as a pointer below `prefix`.
pub fn parse_at<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Config {
        pointer: format!("{prefix}{}", pointer(e.path())),
        message: e.inner().to_string(),
    })
}

/// RFC 6901 pointer for a serde path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::from_json(r#"{"schema_version":"1","command":"spinor-check"}"#).unwrap();
        assert_eq!(cfg.command, Command::SpinorCheck);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.parameters.as_object().unwrap().is_empty());
    }

    #[test]
    fn pointers_locate_errors() {
        let err = RunConfig::from_json(r#"{"schema_version":"1","command":"maxent","extra":1}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { .. }));
        let err = RunConfig::from_json(r#"{"schema_version":"1","command":"nope"}"#).unwrap_err();
        match err {
            CliError::Config { pointer, .. } => assert_eq!(pointer, "/command"),
            other => panic!("{other:?}"),
        }
        let err = RunConfig::from_json(r#"{"schema_version":"2","command":"suite"}"#).unwrap_err();
        assert!(err.to_string().contains("/schema_version"));
        let err = RunConfig::from_json(r#"{"command":"suite"}"#).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn nested_pointer() {
        #[derive(Debug, Deserialize)]
        #[allow(dead_code)]
        struct P {
            levels: Vec<f64>,
        }
        let v: Value = serde_json::json!({"levels": [0.0, "x"]});
        let err = parse_at::<P>(&v, "/parameters").unwrap_err();
        assert!(err.to_string().contains("/parameters/levels/1"), "{err}");
    }
}
