//! Experiment configuration, execution and bundled presets.

pub mod config;
pub mod presets;
pub mod runner;

pub use config::{
    apply_override, AgentGroup, EconomyConfig, ExperimentConfig, OracleSelector, PureMoneyConfig, SyntheticConfig,
};
pub use runner::{
    field_csv, plot_csv, run_experiment, write_artifacts, NodeRecord, RunManifest, RunOutcome, RunStats,
    ValueAgreement, FIELD_HEADER,
};
pub use presets::{emit_preset, list_presets, preset};
