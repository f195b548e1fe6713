use std::path::PathBuf;
use std::process::ExitCode;

use biqgt_lab::config::{ConfigError, ExperimentConfig};
use biqgt_lab::run::{self, LabError, Overrides, RunReport};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "biqgt",
    version,
    about = "QGT response experiments on pseudo-Hermitian two-band models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model I theta scan, both schemes against the analytic tensor.
    Fig1(Common),
    /// Chern number against Delta2 / Delta1.
    Fig2(Common),
    /// Model II x scan, both schemes against the analytic tensor.
    Fig3(Common),
    /// Circuit readout against direct generalized expectation values.
    CircuitCheck(Common),
    /// All estimates and references at one parameter point.
    Qgt(Common),
    /// Chern number scan for an arbitrary Model I configuration.
    Chern(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment description; the subcommand preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    /// Ramp speed (number or expression).
    #[arg(long, allow_hyphen_values = true)]
    v: Option<String>,
    /// Ramp offset (number or expression).
    #[arg(long, allow_hyphen_values = true)]
    dlam: Option<String>,
    /// Theta grid size.
    #[arg(long)]
    ntheta: Option<usize>,
    /// scheme1, scheme2, both, analytic or circuit-check.
    #[arg(long)]
    scheme: Option<String>,
}

fn load(common: &Common, preset: fn() -> ExperimentConfig) -> Result<ExperimentConfig, LabError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => preset(),
    };
    let overrides = Overrides {
        v: common.v.clone(),
        dlam: common.dlam.clone(),
        ntheta: common.ntheta,
        scheme: common.scheme.clone(),
        out: common.out.clone(),
    };
    run::apply_overrides(&mut config, &overrides)?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<RunReport, LabError> {
    type Runner = fn(&ExperimentConfig) -> Result<RunReport, LabError>;
    let (common, preset, runner): (Common, fn() -> ExperimentConfig, Runner) = match cli.command {
        Command::Fig1(c) => (c, ExperimentConfig::fig1_default, run::run_fig1),
        Command::Fig2(c) => (c, ExperimentConfig::fig2_default, run::run_fig2),
        Command::Fig3(c) => (c, ExperimentConfig::fig3_default, run::run_fig3),
        Command::CircuitCheck(c) => (c, ExperimentConfig::fig1_default, run::run_circuit_check),
        Command::Qgt(c) => (c, ExperimentConfig::qgt_default, run::run_qgt),
        Command::Chern(c) => (c, ExperimentConfig::fig2_default, run::run_chern),
    };
    let config = load(&common, preset)?;
    run::with_workers(common.workers, || runner(&config))?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report.summary).unwrap_or_default()
            );
            for file in &report.files {
                eprintln!("wrote {}", file.display());
            }
            ExitCode::from(report.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("biqgt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
