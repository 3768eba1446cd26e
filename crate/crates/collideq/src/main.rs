use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use collideq::params::Layer;
use collideq::Command;

/// Collision-model experiments written as CSV.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    command: Command,

    /// `I`, `II` or a comma list.
    #[arg(long)]
    setting: Option<String>,
    /// Inverse temperature(s), comma separated; `inf` allowed.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Collision time(s), comma separated.
    #[arg(long, conflicts_with = "dt_grid")]
    dt: Option<String>,
    /// `a:b:n`, n evenly spaced points including both ends.
    #[arg(long)]
    dt_grid: Option<String>,
    /// Intra-bath angle(s) in `--delta-units`.
    #[arg(long, conflicts_with = "delta_grid")]
    delta: Option<String>,
    #[arg(long)]
    delta_grid: Option<String>,
    /// Number of collisions; `auto` lets the command choose.
    #[arg(long)]
    steps: Option<String>,
    /// Trajectory count(s), comma separated.
    #[arg(long)]
    traj: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// fig2, fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `rad` or `half-pi` (delta given as a fraction of pi/2).
    #[arg(long)]
    delta_units: Option<String>,
}

impl Cli {
    fn flags(&self) -> Result<Layer> {
        let mut layer = Layer::new();
        let pairs = [
            ("setting", &self.setting),
            ("beta", &self.beta),
            ("omega", &self.omega),
            ("gamma", &self.gamma),
            ("dt", &self.dt),
            ("dt_grid", &self.dt_grid),
            ("delta", &self.delta),
            ("delta_grid", &self.delta_grid),
            ("steps", &self.steps),
            ("traj", &self.traj),
            ("seed", &self.seed),
            ("delta_units", &self.delta_units),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                layer.set(k, v.as_str())?;
            }
        }
        Ok(layer)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("COLLIDEQ_THREADS") {
        let n: usize = v.parse().with_context(|| format!("COLLIDEQ_THREADS={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| {
        let table = collideq::run(cli.command, cli.preset.as_deref(), cli.config.as_deref(), &cli.flags()?)?;
        let text = table.render();
        match &cli.out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(table.flagged())
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            log::warn!("{n} row(s) flagged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
