//! Tool/version/config stamp embedded in every emitted artifact.

use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "hsrecon";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(config: impl Serialize) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
        }
    }

    /// `tool: …`, `version: …`, `config: …` without a comment marker.
    pub fn lines(&self) -> [String; 3] {
        [
            format!("tool: {}", self.tool),
            format!("version: {}", self.version),
            format!("config: {}", self.config),
        ]
    }

    /// Comment lines placed ahead of a CSV header. Readers skip lines starting with `#`.
    pub fn csv_preamble(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}
