//! Experiment configuration: a JSON document validated against a strict
//! schema (unknown fields anywhere are rejected) before any computation.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use pssmp::subordinator_models::{JumpLaw, SubordinatorKind, SubordinatorSpec};

use crate::CliError;

/// Output format for the `--out` artifact: a JSON summary report or a
/// sample-level CSV table (the plotting interface).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Command-specific knobs. Every field is optional; each command reads the
/// subset it understands and fills documented defaults for the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Terminal horizon as log t (natural log).
    pub log_t: Option<f64>,
    /// Pilot horizons for convergence calibration (limit_v).
    pub log_t_pilot: Option<Vec<f64>>,
    /// Replicate / sample count.
    pub n: Option<usize>,
    /// Number of independent seeds (lil, frag rho section).
    pub seeds: Option<usize>,
    /// Highest moment order to check (darling_kac, expfun).
    pub n_max: Option<u32>,
    /// Short-time evaluation point (short_time).
    pub t_small: Option<f64>,
    /// Exponent p of the test function f(t) = t^p (integral_test).
    pub power: Option<f64>,
    /// Small-s grid for the left-tail diagnostic (expfun).
    pub s_grid: Option<Vec<f64>>,
    /// Deterministic binary split U == u (frag).
    pub split_u: Option<f64>,
    /// Random binary split via the law of -log U (frag).
    pub split_neg_log: Option<JumpLaw>,
    /// Index beta of the limit-law target for the rho section (frag).
    pub rho_beta: Option<f64>,
    /// Horizon log t for the rho section (frag).
    pub rho_log_t: Option<f64>,
    /// Size-biased walks per realization for the rho section (frag).
    pub rho_walks: Option<usize>,
    /// Grid step override for grid-simulated subordinators.
    pub grid_step: Option<f64>,
    /// Tolerance override applied by --check (meaning is per command).
    pub tolerance: Option<f64>,
}

/// One experiment: the subordinator model, the self-similarity index, the
/// command knobs, and the reproducibility/output contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: Option<SubordinatorSpec>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    /// Parse and fully validate a config document. `deny_unknown_fields`
    /// cannot see inside the flattened spec enum, so the spec sub-document's
    /// keys are checked against its declared kind by hand.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad JSON: {e}")))?;
        let config: ExperimentConfig = serde_json::from_value(doc.clone())
            .map_err(|e| CliError::Config(format!("schema violation: {e}")))?;
        if let Some(spec_doc) = doc.get("spec") {
            validate_spec_keys(spec_doc)?;
        }
        if let Some(spec) = &config.spec {
            spec.validate().map_err(|e| CliError::Config(format!("invalid spec: {e}")))?;
        }
        if let Some(alpha) = config.alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(CliError::Config("alpha must be positive and finite".into()));
            }
        }
        Ok(config)
    }

    pub fn spec(&self) -> Result<&SubordinatorSpec, CliError> {
        self.spec.as_ref().ok_or_else(|| CliError::Config("missing required field: spec".into()))
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.alpha.ok_or_else(|| CliError::Config("missing required field: alpha".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The document echoed into every report, with output plumbing stripped
    /// so that the echo depends only on the scientific inputs.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
            map.remove("format");
        }
        v
    }
}

/// Reject unknown keys in the flattened spec sub-document.
fn validate_spec_keys(spec_doc: &Value) -> Result<(), CliError> {
    let obj = spec_doc
        .as_object()
        .ok_or_else(|| CliError::Config("spec must be a JSON object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Config("spec must declare a string field 'kind'".into()))?;
    let kind_fields: &[&str] = match kind {
        "stable" => &["beta", "scale"],
        "gamma" => &["shape", "rate"],
        "tempered_stable" => &["delta", "theta", "scale"],
        "compound_poisson" => &["rate", "jump_law"],
        "drift_only" => &["d"],
        other => return Err(CliError::Config(format!("unknown spec kind: {other}"))),
    };
    let mut allowed: BTreeSet<&str> = kind_fields.iter().copied().collect();
    allowed.extend(["kind", "drift", "declared_rv_index"]);
    for key in obj.keys() {
        if !allowed.contains(key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown field '{key}' in spec of kind '{kind}'"
            )));
        }
    }
    if kind == "compound_poisson" {
        if let Some(jl) = obj.get("jump_law") {
            validate_jump_law_keys(jl)?;
        }
    }
    Ok(())
}

fn validate_jump_law_keys(doc: &Value) -> Result<(), CliError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| CliError::Config("jump_law must be a JSON object".into()))?;
    let law = obj
        .get("law")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Config("jump_law must declare a string field 'law'".into()))?;
    let fields: &[&str] = match law {
        "point_mass" => &["location"],
        "pareto_log_tail" => &["beta"],
        "exponential" => &["rate"],
        other => return Err(CliError::Config(format!("unknown jump law: {other}"))),
    };
    for key in obj.keys() {
        if key != "law" && !fields.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown field '{key}' in jump law '{law}'")));
        }
    }
    Ok(())
}

/// Convenience constructor used by tests and the acceptance suite.
pub fn stable_config(beta: f64, scale: f64, alpha: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        spec: Some(SubordinatorSpec::stable(beta, scale).expect("valid stable spec")),
        alpha: Some(alpha),
        params: Params::default(),
        seed: Some(seed),
        out: None,
        format: None,
    }
}

/// Convenience constructor for compound-Poisson specs.
pub fn compound_poisson_config(
    rate: f64,
    jump_law: JumpLaw,
    alpha: f64,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        spec: Some(
            SubordinatorSpec::new(SubordinatorKind::CompoundPoisson { rate, jump_law })
                .expect("valid compound-poisson spec"),
        ),
        alpha: Some(alpha),
        params: Params::default(),
        seed: Some(seed),
        out: None,
        format: None,
    }
}
