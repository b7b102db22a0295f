//! Experiment configuration (TOML).
//!
//! Every section except `seeds` and the deadline scenarios has a default;
//! see `configs/default.toml` at the repository root for an annotated file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::power::{EnergyMode, FrequencyLevel, PowerCurve, ServerModel};
use crate::workload::{WorkloadSpec, ZipfianParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(PathBuf),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.to_string(),
    }
}

/// A named deadline the comparison is run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineScenario {
    pub label: String,
    pub deadline: f64,
    /// Scenarios sharing a group are compared by the deadline sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Multiplier on per-record cycle costs for this scenario.
    #[serde(default = "one")]
    pub work_scale: f64,
    /// Overrides `server.u_full`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_full: Option<f64>,
}

impl DeadlineScenario {
    pub fn group_key(&self) -> &str {
        self.group.as_deref().unwrap_or("")
    }
}

fn one() -> f64 {
    1.0
}

/// A benchmark's tight/firm deadline pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkPreset {
    pub name: &'static str,
    pub tight: f64,
    pub firm: f64,
    /// Average full-load CPU utilization, where measured.
    pub u_full: Option<f64>,
}

/// Tight and firm deadlines (seconds) of the five benchmarks, with the
/// measured average CPU utilization of the three that have one.
pub const BENCHMARK_PRESETS: [BenchmarkPreset; 5] = [
    BenchmarkPreset { name: "wordcount", tight: 1350.0, firm: 1500.0, u_full: Some(0.68) },
    BenchmarkPreset { name: "grep", tight: 670.0, firm: 730.0, u_full: Some(0.45) },
    BenchmarkPreset { name: "inverted-index", tight: 27000.0, firm: 30000.0, u_full: Some(0.82) },
    BenchmarkPreset { name: "tpc", tight: 1250.0, firm: 1400.0, u_full: None },
    BenchmarkPreset { name: "amazon", tight: 1150.0, firm: 1350.0, u_full: None },
];

/// Expands the benchmark presets into `<name>-tight` / `<name>-firm`
/// scenarios. Work is scaled by `firm / reference_deadline`, so each
/// benchmark's firm deadline sits where `reference_deadline` sits for the
/// unscaled workload.
pub fn benchmark_scenarios(reference_deadline: f64) -> Vec<DeadlineScenario> {
    BENCHMARK_PRESETS
        .iter()
        .flat_map(|p| {
            let scale = p.firm / reference_deadline;
            [("tight", p.tight), ("firm", p.firm)].map(|(kind, deadline)| DeadlineScenario {
                label: format!("{}-{kind}", p.name),
                deadline,
                group: Some(p.name.to_string()),
                work_scale: scale,
                u_full: p.u_full,
            })
        })
        .collect()
}

/// Default workload: 7 blocks of 100k records, 36k hits, sized so that at
/// a 1000 s deadline the top frequency finishes at about 93% of it and the
/// uniform case leaves no room for the low frequency.
pub fn default_workload() -> WorkloadSpec {
    WorkloadSpec {
        n_blocks: 7,
        records_per_block: 100_000,
        total_hit_records: 36_000,
        cycles_per_hit: 6.96e6,
        cycles_per_miss: 1.96e6,
        zipf: ZipfianParams { z: 2.0, n: 7 },
        rng_seed: 0,
        shuffle: false,
        jitter_sigma: 0.0,
    }
}

fn default_error_margin() -> f64 {
    0.05
}

fn default_sampling_fraction() -> f64 {
    0.01
}

fn default_energy_mode() -> EnergyMode {
    EnergyMode::SlotAverage
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_reference_deadline() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioPreset {
    Benchmarks,
}

/// On-disk shape; resolved into [`ExperimentConfig`] by [`load_config`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_workload")]
    workload: WorkloadSpec,
    #[serde(default)]
    server: RawServer,
    #[serde(default)]
    deadline_scenarios: Vec<DeadlineScenario>,
    #[serde(default)]
    presets: Vec<ScenarioPreset>,
    #[serde(default = "default_reference_deadline")]
    reference_deadline: f64,
    #[serde(default = "default_error_margin")]
    error_margin: f64,
    #[serde(default = "default_sampling_fraction")]
    sampling_fraction: f64,
    #[serde(default = "default_energy_mode")]
    energy_mode: EnergyMode,
    #[serde(default)]
    z_sweep: Vec<f64>,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServer {
    #[serde(default = "default_server_frequencies")]
    frequencies: Vec<FrequencyLevel>,
    #[serde(default)]
    curve: PowerCurve,
    #[serde(default = "default_server_u_full")]
    u_full: f64,
    /// Two-column `GHz,watts` CSV, relative to the config file.
    table_csv: Option<PathBuf>,
}

impl Default for RawServer {
    fn default() -> Self {
        let s = ServerModel::default();
        Self {
            frequencies: s.frequencies,
            curve: s.curve,
            u_full: s.u_full,
            table_csv: None,
        }
    }
}

fn default_server_frequencies() -> Vec<FrequencyLevel> {
    ServerModel::default().frequencies
}

fn default_server_u_full() -> f64 {
    ServerModel::default().u_full
}

/// Validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub workload: WorkloadSpec,
    pub server: ServerModel,
    pub deadline_scenarios: Vec<DeadlineScenario>,
    pub error_margin: f64,
    pub sampling_fraction: f64,
    pub energy_mode: EnergyMode,
    /// Exponents for the variety sweep; empty means the workload's own `z`.
    pub z_sweep: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload
            .validate()
            .map_err(|e| field_error("workload", e))?;
        self.server.validate().map_err(|e| field_error("server", e))?;
        if self.deadline_scenarios.is_empty() {
            return Err(invalid("deadline_scenarios", "at least one scenario is required"));
        }
        for (i, s) in self.deadline_scenarios.iter().enumerate() {
            let at = |f: &str| format!("deadline_scenarios[{i}].{f}");
            if s.label.is_empty() {
                return Err(invalid(at("label"), "must not be empty"));
            }
            if !(s.deadline > 0.0 && s.deadline.is_finite()) {
                return Err(invalid(at("deadline"), format!("must be positive, got {}", s.deadline)));
            }
            if !(s.work_scale > 0.0 && s.work_scale.is_finite()) {
                return Err(invalid(at("work_scale"), format!("must be positive, got {}", s.work_scale)));
            }
            if let Some(u) = s.u_full {
                if !(u > 0.0 && u <= 1.0) {
                    return Err(invalid(at("u_full"), format!("must lie in (0, 1], got {u}")));
                }
            }
            if self.deadline_scenarios[..i].iter().any(|o| o.label == s.label) {
                return Err(invalid(at("label"), format!("duplicate label {:?}", s.label)));
            }
        }
        if !(0.0..1.0).contains(&self.error_margin) {
            return Err(invalid("error_margin", format!("must lie in [0, 1), got {}", self.error_margin)));
        }
        if !(self.sampling_fraction > 0.0 && self.sampling_fraction <= 1.0) {
            return Err(invalid(
                "sampling_fraction",
                format!("must lie in (0, 1], got {}", self.sampling_fraction),
            ));
        }
        for (i, &z) in self.z_sweep.iter().enumerate() {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(invalid(format!("z_sweep[{i}]"), format!("must be finite and >= 0, got {z}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        Ok(())
    }

    /// The variety sweep's exponents, falling back to the workload's own.
    pub fn z_values(&self) -> Vec<f64> {
        if self.z_sweep.is_empty() {
            vec![self.workload.zipf.z]
        } else {
            self.z_sweep.clone()
        }
    }
}

fn field_error(section: &str, err: crate::Error) -> ConfigError {
    match err {
        crate::Error::InvalidParameter { name, reason } => invalid(format!("{section}.{name}"), reason),
        other => invalid(section, other),
    }
}

/// Reads, resolves and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::NotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses config text; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: PathBuf::new(),
        message: e.to_string(),
    })?;

    let mut curve = raw.server.curve;
    if let Some(csv) = &raw.server.table_csv {
        if curve.table.is_some() {
            return Err(invalid("server.table_csv", "conflicts with server.curve.table"));
        }
        let points = PowerCurve::load_table_csv(&base_dir.join(csv))
            .map_err(|e| field_error("server", e))?;
        curve.table = Some(points);
    }
    let server = ServerModel {
        frequencies: raw.server.frequencies,
        curve,
        u_full: raw.server.u_full,
    };

    if !(raw.reference_deadline > 0.0 && raw.reference_deadline.is_finite()) {
        return Err(invalid("reference_deadline", "must be positive"));
    }
    let mut deadline_scenarios = raw.deadline_scenarios;
    for preset in raw.presets {
        match preset {
            ScenarioPreset::Benchmarks => deadline_scenarios.extend(benchmark_scenarios(raw.reference_deadline)),
        }
    }

    let config = ExperimentConfig {
        workload: raw.workload,
        server,
        deadline_scenarios,
        error_margin: raw.error_margin,
        sampling_fraction: raw.sampling_fraction,
        energy_mode: raw.energy_mode,
        z_sweep: raw.z_sweep,
        seeds: raw.seeds,
        output_dir: raw.output_dir,
    };
    config.validate()?;
    Ok(config)
}
