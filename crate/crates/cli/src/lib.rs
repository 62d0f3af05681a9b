//! Ingestion, configuration, staged monitoring runs, simulation and
//! reporting on top of `postmon_core`.

pub mod config;
pub mod error;
pub mod ingest;
pub mod monitor;
pub mod report;
pub mod simulate;
pub mod suite;

pub use config::{load_config, LoadedConfig, MonitorConfig, Stage, TestEntry, TestName};
pub use error::{CliError, Result};
pub use monitor::run_monitor;
pub use report::{emit_report, parse_report, Format, MonitorReport, Verdict};
pub use simulate::{simulate, ScenarioKind, ShiftScenario};
