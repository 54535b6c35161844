//! Uniform machine-readable report emitted by every command.

use serde::Serialize;
use serde_json::Value;

/// One named pass/fail item produced in --check mode.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckItem {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }
}

/// The summary report. All scientific fields are deterministic functions of
/// (config, seed); `runtime_s` is wall clock and is the one exception to the
/// byte-identical re-run guarantee.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config_echo: Value,
    pub theoretical: Value,
    pub empirical: Value,
    pub stderr_or_ks: Value,
    pub verdict: String,
    pub runtime_s: f64,
}

impl Report {
    /// Serialized report with the wall-clock field zeroed: the byte-identical
    /// determinism contract applies to exactly these bytes.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.runtime_s = 0.0;
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Outcome of one command: the report, the sample-level CSV table behind it,
/// and the itemized checks applied in --check mode.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub report: Report,
    pub csv: String,
    pub checks: Vec<CheckItem>,
}

impl CommandOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckItem> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Render a verdict string from check items.
pub fn verdict(checks: &[CheckItem]) -> String {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        "pass".to_string()
    } else {
        format!("fail: {}", failed.join(", "))
    }
}
