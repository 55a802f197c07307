//! Strict JSON config parsing and dotted-key overrides.

use serde::Serialize;
use serde_json::Value;

use crate::solver::RunConfig;

/// A config problem with as much location context as is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    /// Dotted key path, when the problem is attached to a key.
    pub key: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl ParseError {
    fn at_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError {
            key: Some(key.into()),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

fn deserialize_strict<'de, D>(de: D) -> Result<RunConfig, ParseError>
where
    D: serde::Deserializer<'de, Error = serde_json::Error>,
{
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = if inner.line() > 0 {
            (Some(inner.line()), Some(inner.column()))
        } else {
            (None, None)
        };
        ParseError {
            key: (path != "." && !path.is_empty()).then_some(path),
            line,
            column,
            message: strip_location(&inner.to_string()),
        }
    })
}

/// serde_json appends " at line L column C"; the location is kept separately.
fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn range_checks(cfg: &RunConfig) -> Result<(), Vec<ParseError>> {
    let issues: Vec<ParseError> = cfg
        .scalar_issues()
        .into_iter()
        .map(|(k, m)| ParseError::at_key(k, m))
        .collect();
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// Parses a JSON config. Unknown keys and out-of-range scalars are errors;
/// absent keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ParseError>> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg = deserialize_strict(&mut de).map_err(|e| vec![e])?;
    de.end().map_err(|e| {
        vec![ParseError {
            key: None,
            line: Some(e.line()),
            column: Some(e.column()),
            message: strip_location(&e.to_string()),
        }]
    })?;
    range_checks(&cfg)?;
    Ok(cfg)
}

/// Parses `text`, applies `key=value` overrides to the resolved config
/// (defaults filled in), and re-parses strictly.
pub fn resolve_config(text: &str, overrides: &[String]) -> Result<RunConfig, Vec<ParseError>> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg = deserialize_strict(&mut de).map_err(|e| vec![e])?;
    if overrides.is_empty() {
        range_checks(&cfg)?;
        return Ok(cfg);
    }
    let mut value = serde_json::to_value(&cfg).expect("configs serialize");
    for o in overrides {
        apply_override(&mut value, o).map_err(|e| vec![e])?;
    }
    let cfg = deserialize_strict(value).map_err(|e| vec![e])?;
    range_checks(&cfg)?;
    Ok(cfg)
}

/// Sets one `dotted.key=value` in a resolved config value. The key must
/// already exist. The value is read as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ParseError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ParseError::at_key(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| ParseError::at_key(key, "override names a key that does not exist in the config"))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialPreset;
    use crate::solver::PotentialSpec;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg.tau, 1.0);
        assert_eq!(cfg.eps, 0.1);
        assert_eq!(cfg.potential, PotentialSpec::preset(PotentialPreset::Regular));
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn eps_out_of_range() {
        let errs = parse_config(r#"{"eps": 1.5}"#).unwrap_err();
        assert_eq!(errs[0].key.as_deref(), Some("eps"));
        assert!(errs[0].message.contains("eps must lie in (0,1)"));
    }

    #[test]
    fn unknown_key_is_named() {
        let errs = parse_config("{\n  \"epsilonn\": 0.1\n}").unwrap_err();
        assert!(errs[0].message.contains("epsilonn"), "{}", errs[0]);
        assert_eq!(errs[0].line, Some(2));
    }

    #[test]
    fn nested_error_reports_path() {
        let errs = parse_config(r#"{"grid": {"nx": "many"}}"#).unwrap_err();
        assert_eq!(errs[0].key.as_deref(), Some("grid.nx"));
    }

    #[test]
    fn overrides_apply_to_existing_keys() {
        let cfg = resolve_config(
            "{}",
            &[
                "eps=0.05".into(),
                "grid.nx=16".into(),
                "potential.preset=logarithmic".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.eps, 0.05);
        assert_eq!(cfg.grid.nx, 16);
        assert_eq!(cfg.potential.preset, Some(PotentialPreset::Logarithmic));
        let errs = resolve_config("{}", &["grid.nz=3".into()]).unwrap_err();
        assert_eq!(errs[0].key.as_deref(), Some("grid.nz"));
        let errs = resolve_config("{}", &["eps=2".into()]).unwrap_err();
        assert_eq!(errs[0].key.as_deref(), Some("eps"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
