//! Layered `key = value` configuration.
//!
//! Values arrive as strings from four layers: built-in command defaults,
//! a named preset, a config file and command-line flags, each overriding
//! the one before. [`Params::resolve`] parses the merged layer once, and the
//! resolved strings are echoed into the CSV header.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use collideq_core::blp::BlpGrid;
use collideq_core::metrics::{excited_state, gibbs_qubit, ground_state};
use collideq_core::{DensityMatrix, Setting};

use crate::Command;

pub const KEYS: &[&str] = &[
    "setting",
    "beta",
    "omega",
    "gamma",
    "dt",
    "dt_grid",
    "delta",
    "delta_grid",
    "delta_units",
    "cases",
    "r",
    "steps",
    "t_final",
    "traj",
    "seed",
    "rho0",
    "blp_grid",
];

/// Keys that replace each other: setting one in a higher layer drops the
/// others from the layers below.
const EXCLUSIVE: &[&[&str]] = &[&["dt", "dt_grid", "cases"], &["delta", "delta_grid", "cases"]];

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer(BTreeMap<String, String>);

impl Layer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            bail!("unknown key {key:?}");
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.set(key, value).expect("built-in key");
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut layer = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            layer.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(layer)
    }

    /// `self` with `upper` laid on top.
    pub fn overlay(&self, upper: &Layer) -> Layer {
        let mut merged = self.0.clone();
        for group in EXCLUSIVE {
            if group.iter().any(|k| upper.0.contains_key(*k)) {
                for k in *group {
                    merged.remove(*k);
                }
            }
        }
        merged.extend(upper.0.iter().map(|(k, v)| (k.clone(), v.clone())));
        Layer(merged)
    }
}

pub fn preset(name: &str) -> Result<Layer> {
    let layer = Layer::new().with("omega", "1").with("gamma", "1");
    Ok(match name {
        "fig2" => layer
            .with("setting", "I,II")
            .with("beta", "0.5,2")
            .with("dt_grid", "0.025:0.5:20")
            .with("delta", "0"),
        "fig3" => layer
            .with("setting", "I,II")
            .with("beta", "2")
            .with("delta_units", "half-pi")
            .with("cases", "0.01:0.95, 0.01:0.8, 0.001:0.95")
            .with("dt", "0.01")
            .with("delta_grid", "0:0.95:20")
            .with("rho0", "excited")
            .with("t_final", "10"),
        "fig4" => layer
            .with("setting", "II")
            .with("beta", "0.5,2")
            .with("delta_units", "half-pi")
            .with("dt_grid", "0.025:0.5:20")
            .with("delta_grid", "0:0.95:20"),
        "fig5" => layer
            .with("setting", "II")
            .with("beta", "1")
            .with("delta_units", "half-pi")
            .with("delta", "0.95")
            .with("dt", "0.1")
            .with("steps", "100")
            .with("traj", "10000,100000")
            .with("rho0", "ground"),
        other => bail!("unknown preset {other:?} (expected fig2, fig3, fig4 or fig5)"),
    })
}

pub fn defaults(command: Command) -> Layer {
    let base = Layer::new()
        .with("omega", "1")
        .with("gamma", "1")
        .with("seed", "1")
        .with("delta_units", "rad")
        .with("blp_grid", "32x16")
        .with("steps", "auto");
    match command {
        Command::SteadyState => base
            .with("setting", "I,II")
            .with("beta", "0.5,2")
            .with("dt_grid", "0.025:0.5:20")
            .with("delta", "0"),
        Command::Dynamics => base
            .with("setting", "I,II")
            .with("beta", "2")
            .with("dt", "0.01")
            .with("delta", "0")
            .with("rho0", "excited")
            .with("t_final", "5"),
        Command::Heat => base
            .with("setting", "II")
            .with("beta", "1")
            .with("dt", "0.1")
            .with("delta", "0")
            .with("rho0", "ground")
            .with("steps", "100"),
        Command::Blp => base
            .with("setting", "I,II")
            .with("beta", "2")
            .with("dt", "0.01")
            .with("delta_units", "half-pi")
            .with("delta_grid", "0:0.95:20"),
        Command::Negativity => base
            .with("setting", "II")
            .with("beta", "2")
            .with("dt", "0.1")
            .with("delta_units", "half-pi")
            .with("delta", "0.9"),
        Command::Sweep => base
            .with("setting", "II")
            .with("beta", "2")
            .with("delta_units", "half-pi")
            .with("dt_grid", "0.025:0.5:20")
            .with("delta_grid", "0:0.95:20"),
        Command::Trajectories => base
            .with("setting", "II")
            .with("beta", "1")
            .with("delta", "0")
            .with("dt", "0.1")
            .with("steps", "100")
            .with("traj", "10000")
            .with("rho0", "ground"),
        Command::LimitScan => base
            .with("setting", "II")
            .with("beta", "2")
            .with("delta_units", "half-pi")
            .with("r", "0.1,5")
            .with("dt", "0.01,0.005,0.0025,0.00125"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaUnits {
    Rad,
    HalfPi,
}

impl DeltaUnits {
    pub fn to_rad(self, value: f64) -> f64 {
        match self {
            DeltaUnits::Rad => value,
            DeltaUnits::HalfPi => value * FRAC_PI_2,
        }
    }
}

impl FromStr for DeltaUnits {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rad" => Ok(DeltaUnits::Rad),
            "half-pi" | "half_pi" => Ok(DeltaUnits::HalfPi),
            other => bail!("delta units must be rad or half-pi, got {other:?}"),
        }
    }
}

impl fmt::Display for DeltaUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaUnits::Rad => "rad",
            DeltaUnits::HalfPi => "half-pi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Excited,
    Ground,
    Gibbs,
}

impl InitialState {
    pub fn state(self, beta: f64, omega: f64) -> Result<DensityMatrix> {
        Ok(match self {
            InitialState::Excited => excited_state(),
            InitialState::Ground => ground_state(),
            InitialState::Gibbs => gibbs_qubit(beta, omega)?,
        })
    }
}

impl FromStr for InitialState {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "excited" => Ok(InitialState::Excited),
            "ground" => Ok(InitialState::Ground),
            "gibbs" => Ok(InitialState::Gibbs),
            other => bail!("rho0 must be excited, ground or gibbs, got {other:?}"),
        }
    }
}

/// `a:b:n` is `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [a, b, n] = parts[..] else {
        bail!("grid {s:?} is not of the form a:b:n");
    };
    let (a, b): (f64, f64) = (parse_f64(a)?, parse_f64(b)?);
    let n: usize = n.parse().with_context(|| format!("grid point count {n:?}"))?;
    Ok(match n {
        0 => bail!("grid {s:?} has no points"),
        1 => vec![a],
        _ => (0..n).map(|i| round12(a + (b - a) * i as f64 / (n - 1) as f64)).collect(),
    })
}

/// Twelve significant digits, so `0:0.95:20` yields `0.05` rather than
/// `0.049999999999999996`.
fn round12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float")
}

fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().with_context(|| format!("not a number: {t:?}")),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v = s.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        bail!("empty list");
    }
    Ok(v)
}

fn parse_settings(s: &str) -> Result<Vec<Setting>> {
    s.split(',').map(|t| t.trim().parse::<Setting>().map_err(|e| anyhow!("{e}"))).collect()
}

fn parse_cases(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|case| {
            let (dt, delta) = case.split_once(':').ok_or_else(|| anyhow!("case {case:?} is not dt:delta"))?;
            Ok((parse_f64(dt)?, parse_f64(delta)?))
        })
        .collect()
}

fn parse_blp_grid(s: &str) -> Result<BlpGrid> {
    let (a, b) = s.split_once('x').ok_or_else(|| anyhow!("blp grid {s:?} is not NxM"))?;
    BlpGrid::new(a.trim().parse()?, b.trim().parse()?).map_err(|e| anyhow!("{e}"))
}

/// Fully parsed parameters for one command.
#[derive(Debug, Clone)]
pub struct Params {
    pub command: Command,
    pub settings: Vec<Setting>,
    pub betas: Vec<f64>,
    pub omega: f64,
    pub gamma: f64,
    pub dts: Vec<f64>,
    /// In `delta_units`.
    pub deltas: Vec<f64>,
    pub delta_units: DeltaUnits,
    /// Explicit `(dt, delta)` pairs; replaces the `dts × deltas` product.
    pub cases: Option<Vec<(f64, f64)>>,
    pub rs: Vec<f64>,
    /// `None` means the command picks (e.g. the BLP horizon).
    pub steps: Option<usize>,
    pub t_final: Option<f64>,
    pub traj: Vec<usize>,
    pub seed: u64,
    pub rho0: Option<InitialState>,
    pub blp_grid: BlpGrid,
    /// The merged `key=value` strings, in `KEYS` order.
    pub resolved: Vec<(String, String)>,
}

impl Params {
    pub fn resolve(command: Command, layer: &Layer) -> Result<Self> {
        let get = |k: &str| layer.get(k);
        let required = |k: &str| get(k).ok_or_else(|| anyhow!("missing value for {k}"));
        let axis = |single: &str, grid: &str| -> Result<Vec<f64>> {
            match (get(single), get(grid)) {
                (_, Some(g)) => parse_grid(g).with_context(|| grid.to_string()),
                (Some(v), None) => parse_list(v).with_context(|| single.to_string()),
                (None, None) => Ok(Vec::new()),
            }
        };
        let steps = match get("steps") {
            None | Some("auto") => None,
            Some(s) => Some(s.parse().with_context(|| format!("steps {s:?}"))?),
        };
        let traj = match get("traj") {
            None => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<usize>().with_context(|| format!("traj {t:?}")))
                .collect::<Result<_>>()?,
        };
        let params = Params {
            command,
            settings: parse_settings(required("setting")?)?,
            betas: parse_list(required("beta")?).context("beta")?,
            omega: parse_f64(required("omega")?)?,
            gamma: parse_f64(required("gamma")?)?,
            dts: axis("dt", "dt_grid")?,
            deltas: axis("delta", "delta_grid")?,
            delta_units: required("delta_units")?.parse()?,
            cases: get("cases").map(parse_cases).transpose()?,
            rs: get("r").map(parse_list).transpose().context("r")?.unwrap_or_default(),
            steps,
            t_final: get("t_final").map(parse_f64).transpose()?,
            traj,
            seed: required("seed")?.parse().context("seed")?,
            rho0: get("rho0").map(str::parse).transpose()?,
            blp_grid: parse_blp_grid(required("blp_grid")?)?,
            resolved: KEYS
                .iter()
                .filter_map(|k| get(k).map(|v| (k.to_string(), v.to_string())))
                .collect(),
        };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<()> {
        let cased = self.cases.is_some() && self.uses_cases();
        if self.command != Command::LimitScan && !cased && self.deltas.is_empty() {
            bail!("no delta values given");
        }
        if !cased && self.dts.is_empty() {
            bail!("no dt values given");
        }
        if self.command == Command::LimitScan && self.rs.is_empty() {
            bail!("limit-scan needs at least one r");
        }
        if self.command == Command::Trajectories && self.traj.is_empty() {
            bail!("trajectories needs a trajectory count");
        }
        Ok(())
    }

    /// Only the time-resolved commands read `cases`.
    pub fn uses_cases(&self) -> bool {
        matches!(self.command, Command::Dynamics | Command::Heat)
    }

    /// `(dt, delta)` pairs in output order, with delta still in `delta_units`.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        match &self.cases {
            Some(c) if self.uses_cases() => c.clone(),
            _ => self.dts.iter().flat_map(|&dt| self.deltas.iter().map(move |&d| (dt, d))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_inclusive() {
        let g = parse_grid("0:1:5").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0.3:9:1").unwrap(), vec![0.3]);
        assert_eq!(parse_grid("0:0.95:20").unwrap()[1], 0.05);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn config_text_parses_with_comments() {
        let layer = Layer::parse_config("# header\nbeta = 0.5, 2  # two temps\n\ndelta-units = half-pi\n").unwrap();
        assert_eq!(layer.get("beta"), Some("0.5, 2"));
        assert_eq!(layer.get("delta_units"), Some("half-pi"));
        assert!(Layer::parse_config("nonsense = 1").is_err());
        assert!(Layer::parse_config("beta 2").is_err());
    }

    #[test]
    fn flags_beat_config_beat_preset() {
        let preset = preset("fig2").unwrap();
        let config = Layer::new().with("beta", "1").with("omega", "2");
        let flags = Layer::new().with("beta", "3");
        let merged = defaults(Command::SteadyState).overlay(&preset).overlay(&config).overlay(&flags);
        let p = Params::resolve(Command::SteadyState, &merged).unwrap();
        assert_eq!(p.betas, vec![3.0]);
        assert_eq!(p.omega, 2.0);
        assert_eq!(p.dts.len(), 20);
    }

    #[test]
    fn single_value_replaces_grid_from_lower_layer() {
        let merged = preset("fig4").unwrap().overlay(&Layer::new().with("dt", "0.1"));
        assert_eq!(merged.get("dt_grid"), None);
        let p = Params::resolve(Command::Sweep, &defaults(Command::Sweep).overlay(&merged)).unwrap();
        assert_eq!(p.dts, vec![0.1]);
        assert_eq!(p.deltas.len(), 20);
    }

    #[test]
    fn explicit_dt_drops_preset_cases() {
        let fig3 = defaults(Command::Dynamics).overlay(&preset("fig3").unwrap());
        let p = Params::resolve(Command::Dynamics, &fig3).unwrap();
        assert_eq!(p.pairs(), vec![(0.01, 0.95), (0.01, 0.8), (0.001, 0.95)]);
        let p = Params::resolve(Command::Dynamics, &fig3.overlay(&Layer::new().with("delta", "0.5"))).unwrap();
        assert_eq!(p.pairs(), vec![(0.01, 0.5)]);
    }

    #[test]
    fn every_preset_resolves_for_every_command() {
        for name in ["fig2", "fig3", "fig4", "fig5"] {
            for cmd in Command::ALL {
                let merged = defaults(cmd).overlay(&preset(name).unwrap());
                Params::resolve(cmd, &merged).unwrap_or_else(|e| panic!("{name} {cmd}: {e:#}"));
            }
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn half_pi_units_scale() {
        assert_eq!(DeltaUnits::HalfPi.to_rad(1.0), FRAC_PI_2);
        assert_eq!(DeltaUnits::Rad.to_rad(0.3), 0.3);
        assert!("degrees".parse::<DeltaUnits>().is_err());
    }
}
