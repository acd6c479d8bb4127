//! Run configuration: the JSON document schema, dotted-path `--set`
//! overrides, and the structural validation shared by `run` and `validate`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::gates::GateSpec;
use crate::model::SystemParams;

/// Named experiment selecting which artifact a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Magnetostatic chain from junction current to the collective coupling.
    Estimate,
    /// Conditional-evolution concurrence curves for three decay ratios.
    Concurrence,
    /// Holonomic reflection-gate cycle check over a (θ, φ) grid.
    Holonomic,
    /// Driven two-qubit phase gate under decoherence, time-resolved.
    PhaseGate,
    /// Dispersive π phase-swap fidelity over a (Γ₁, Γ₂) grid.
    SwapGate,
    /// Full vs. effective dispersive dynamics over one swap period.
    ValidateEffective,
    /// Full vs. rotating-wave reduction under strong driving.
    ValidateRwa,
}

impl Experiment {
    /// File-name stem and summary tag for this experiment.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::Concurrence => "concurrence",
            Experiment::Holonomic => "holonomic",
            Experiment::PhaseGate => "phase-gate",
            Experiment::SwapGate => "swap-gate",
            Experiment::ValidateEffective => "validate-effective",
            Experiment::ValidateRwa => "validate-rwa",
        }
    }

    /// Sweep variables this experiment accepts.
    pub fn sweep_variables(self) -> &'static [&'static str] {
        match self {
            Experiment::Estimate | Experiment::PhaseGate => &[],
            Experiment::Concurrence => &["lambda_t"],
            Experiment::Holonomic => &["theta"],
            Experiment::SwapGate => &["gamma", "gamma1", "gamma2"],
            Experiment::ValidateEffective | Experiment::ValidateRwa => &["ratio"],
        }
    }
}

/// Inputs for the coupling estimate: junction current, spin-junction
/// distance, and the number of spins in each ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateInputs {
    pub i0_amperes: f64,
    pub distance_meters: f64,
    pub n_spins: f64,
}

impl Default for EstimateInputs {
    fn default() -> Self {
        Self {
            i0_amperes: 21e-6,
            distance_meters: 1.2e-6,
            n_spins: 1e6,
        }
    }
}

/// One-dimensional parameter sweep: `points` values spaced uniformly from
/// `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    /// The swept values, ordered by index.
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

/// Uniform grid of `points` values over [start, stop], endpoints included.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![start];
    }
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect()
}

/// A complete, self-describing run request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub gate: GateSpec,
    #[serde(default)]
    pub estimate: EstimateInputs,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_path")]
    pub output_path: String,
}

fn default_output_path() -> String {
    ".".to_string()
}

/// Splits raw `KEY=VALUE` override strings into pairs.
pub fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, CliError> {
    raw.iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .ok_or_else(|| {
                    CliError::Config(format!("--set expects KEY=VALUE, got '{item}'"))
                })
        })
        .collect()
}

/// Loads a configuration file, applies dotted-path overrides, and validates
/// the result. Parse errors carry the file path and the line/column the
/// parser stopped at.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = if overrides.is_empty() {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        serde_json::from_value(value).map_err(|e| {
            CliError::Config(format!("{} (with --set overrides applied): {e}", path.display()))
        })?
    };
    validate(&config)?;
    Ok(config)
}

/// Sets one field addressed by a dotted JSON path. The value is parsed as
/// JSON when possible and falls back to a plain string otherwise, so both
/// `--set params.n_max=3` and `--set experiment=swap-gate` work.
fn apply_override(root: &mut Value, dotted: &str, raw: &str) -> Result<(), CliError> {
    let parsed: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = dotted.split('.').collect();
    if dotted.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!(
            "--set path '{dotted}' has an empty segment"
        )));
    }
    let (last, parents) = segments.split_last().expect("segments is nonempty");
    let mut cursor = root;
    for (i, segment) in parents.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "--set path '{dotted}': '{}' is not a JSON object",
                segments[..=i].join(".")
            ))
        })?;
        cursor = map
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    let map = cursor.as_object_mut().ok_or_else(|| {
        CliError::Config(format!(
            "--set path '{dotted}': parent of '{last}' is not a JSON object"
        ))
    })?;
    map.insert(last.to_string(), parsed);
    Ok(())
}

/// Allowed closed range for each sweep variable (`min_exclusive` marks an
/// open lower end).
fn sweep_domain(variable: &str) -> Option<(f64, f64, bool)> {
    match variable {
        "lambda_t" => Some((0.0, f64::INFINITY, false)),
        "theta" => Some((0.0, std::f64::consts::PI, false)),
        "gamma" | "gamma1" | "gamma2" => Some((0.0, f64::INFINITY, false)),
        "ratio" => Some((0.0, f64::INFINITY, true)),
        _ => None,
    }
}

/// Structural validation: physical parameters, gate request, and sweep shape.
pub fn validate(config: &RunConfig) -> Result<(), CliError> {
    config
        .params
        .validate()
        .map_err(|e| CliError::Config(format!("params: {e}")))?;
    config
        .gate
        .validate()
        .map_err(|e| CliError::Config(format!("gate: {e}")))?;
    if let Some(sweep) = &config.sweep {
        if sweep.points < 2 {
            return Err(CliError::Config(format!(
                "sweep.points must be at least 2, got {}",
                sweep.points
            )));
        }
        if !sweep.start.is_finite() || !sweep.stop.is_finite() {
            return Err(CliError::Config(format!(
                "sweep range [{}, {}] must be finite",
                sweep.start, sweep.stop
            )));
        }
        let allowed = config.experiment.sweep_variables();
        if !allowed.contains(&sweep.variable.as_str()) {
            return Err(CliError::Config(format!(
                "experiment '{}' does not support sweep variable '{}' (allowed: {allowed:?})",
                config.experiment.name(),
                sweep.variable
            )));
        }
        let (min, max, min_exclusive) =
            sweep_domain(&sweep.variable).expect("allowed variables have a domain");
        let lo = sweep.start.min(sweep.stop);
        let hi = sweep.start.max(sweep.stop);
        let below = if min_exclusive { lo <= min } else { lo < min };
        if below || hi > max {
            return Err(CliError::Config(format!(
                "sweep values [{lo}, {hi}] leave the domain of '{}' ({}{min}, {max}]",
                sweep.variable,
                if min_exclusive { "(" } else { "[" }
            )));
        }
    }
    Ok(())
}
