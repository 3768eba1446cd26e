//! Batch experiments on multi-bath collision models, written as CSV.
//!
//! Every run resolves its parameters from command defaults, an optional
//! preset, an optional config file and command-line flags (in increasing
//! priority), then evaluates one of the [`Command`]s and returns a
//! [`Table`](table::Table).

pub mod commands;
pub mod params;
pub mod table;

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

use params::{Layer, Params};
use table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Steady-state temperature and heat flux on a (dt, delta) grid.
    SteadyState,
    /// Infidelity to the bath Gibbs state along the evolution.
    Dynamics,
    /// Per-step heat exchanged with each bath.
    Heat,
    /// Discretised BLP non-Markovianity measure.
    Blp,
    /// Steady-state negativities of the system-memory compound.
    Negativity,
    /// Temperature shift, heat flux and entanglement over a (dt, delta) grid.
    Sweep,
    /// Two-point-measurement trajectory averages of the heat into bath 0.
    Trajectories,
    /// Temperature shift at fixed r = dt / (1 - delta) as dt shrinks.
    LimitScan,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SteadyState,
        Command::Dynamics,
        Command::Heat,
        Command::Blp,
        Command::Negativity,
        Command::Sweep,
        Command::Trajectories,
        Command::LimitScan,
    ];
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Merges the layers and parses them.
pub fn resolve(command: Command, preset: Option<&str>, config: Option<&Path>, flags: &Layer) -> Result<Params> {
    let mut layer = params::defaults(command);
    if let Some(name) = preset {
        layer = layer.overlay(&params::preset(name)?);
    }
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        layer = layer.overlay(&Layer::parse_config(&text).with_context(|| path.display().to_string())?);
    }
    Params::resolve(command, &layer.overlay(flags))
}

pub fn run(command: Command, preset: Option<&str>, config: Option<&Path>, flags: &Layer) -> Result<Table> {
    commands::run(&resolve(command, preset, config, flags)?)
}
