//! Batch front end: each subcommand runs one experiment on the sensor model
//! and writes CSV artifacts plus a `resolved-config.txt` that reproduces it.

pub mod commands;
pub mod output;
pub mod settings;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::output::Outputs;
use crate::settings::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "flowtwin", version, about = "Thermopile flow sensor experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Balanced power ratio over a flow list and the fitted sensitivity.
    Calibrate(Common),
    /// Temperature field at one flow with balanced heater powers.
    Field(Common),
    /// Wall temperature profiles and heater peaks over a flow list.
    Profile(Common),
    /// Closed-loop response to a stepwise flow schedule.
    Step(StepArgs),
    /// Long closed-loop drift run with spectra and statistics.
    Drift(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key = value configuration file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Flow in µl/min; comma-separated for list commands.
    #[arg(long, value_name = "UL_PER_MIN", value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub qt: Option<Vec<f64>>,
    /// Total heater power in mW.
    #[arg(long, value_name = "MW")]
    pub pt: Option<f64>,
    /// Sample rate in Hz.
    #[arg(long, value_name = "HZ")]
    pub fs: Option<f64>,
    /// Simulated duration in s.
    #[arg(long, value_name = "S")]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    #[command(flatten)]
    pub common: Common,
    /// CSV schedule `t_s,Q_ul_per_min`.
    #[arg(long, value_name = "PATH")]
    pub schedule: Option<PathBuf>,
}

impl Common {
    fn overrides(&self, schedule: Option<PathBuf>) -> Overrides {
        Overrides {
            seed: self.seed,
            qt_ul_per_min: self.qt.clone(),
            pt_mw: self.pt,
            fs: self.fs,
            duration: self.duration,
            schedule,
        }
    }
}

/// Runs a command and writes its outputs; returns the written paths.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let (common, schedule) = match &cli.command {
        Command::Calibrate(c) | Command::Field(c) | Command::Profile(c) | Command::Drift(c) => (c, None),
        Command::Step(s) => (&s.common, s.schedule.clone()),
    };
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(&common.overrides(schedule))?;
    let outputs: Outputs = match cli.command {
        Command::Calibrate(_) => commands::calibrate(cfg)?,
        Command::Field(_) => commands::field(cfg)?,
        Command::Profile(_) => commands::profile(cfg)?,
        Command::Step(_) => commands::step(cfg)?,
        Command::Drift(_) => commands::drift(cfg)?,
    };
    outputs.commit(&common.out)
}
