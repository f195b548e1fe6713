//! Experiment runner for QGT response measurements on pseudo-Hermitian
//! two-band models: configuration, scan drivers and table output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use run::{
    apply_overrides, run_chern, run_circuit_check, run_fig1, run_fig2, run_fig3, run_qgt,
    with_workers, LabError, Overrides, RunReport, Verdict,
};
