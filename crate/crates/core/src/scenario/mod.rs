//! Scenario files: strict JSON parsing, reference checks, lints and the
//! bundled fixtures.

pub mod config;
pub mod schema;
pub mod validate;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use config::{Config, ConfigOverrides};
pub use schema::*;
pub use validate::{check_scenario, validate_scenario, ValidationError, ValidationKind, Warning};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column} ({field}): {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("{}", ValidationList(.0))]
    Validation(Vec<ValidationError>),
}

struct ValidationList<'a>(&'a [ValidationError]);

impl fmt::Display for ValidationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parse and fully check a scenario document.
pub fn parse_str(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        ScenarioError::Parse { line: inner.line(), column: inner.column(), field, message: inner.to_string() }
    })?;
    check_scenario(&scenario).map_err(ScenarioError::Validation)?;
    Ok(scenario)
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_str(&text)
}

pub fn to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes")
}

/// Fixture scenarios shipped with the library, by name.
pub const FIXTURES: &[(&str, &str)] = &[
    ("outage60", include_str!("../../fixtures/outage60.json")),
    ("chain_relay", include_str!("../../fixtures/chain_relay.json")),
    ("border_crossing", include_str!("../../fixtures/border_crossing.json")),
    ("flapping_bearer", include_str!("../../fixtures/flapping_bearer.json")),
    ("tiered_band", include_str!("../../fixtures/tiered_band.json")),
    ("reference10", include_str!("../../fixtures/reference10.json")),
];

pub fn fixture(name: &str) -> Option<Scenario> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_str(text).expect("bundled fixtures are valid"))
}
