//! Monte Carlo evaluation: scenario synthesis, campaigns and CSV export.

pub mod campaign;
pub mod config;
pub mod report;
pub mod scenario;

pub use campaign::{coverage_sweep, run_campaign, Algorithm, CoverageCell, MetricsReport, TrialResult};
pub use config::{ConfigError, ScenarioConfig};
pub use report::{export_report, export_summary};
pub use scenario::{Infeasibility, Scenario, SynthesizedTrial};
