//! Experiment harness: configuration, sweeps and report files.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, DeadlineScenario, ExperimentConfig};
pub use report::{emit_report, load_json_report, ReportError, ReportFormat};
pub use sweep::{
    run_comparison, run_deadline_sweep, run_single, run_variety_sweep, RunError, RunRow, SweepKind,
    SweepReport,
};
