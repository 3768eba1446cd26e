//! One function per subcommand, each producing a [`Table`].
//!
//! Grid points are evaluated with rayon and collected in grid order, so the
//! row order never depends on scheduling.

use std::f64::consts::FRAC_PI_2;

use anyhow::Result;
use collideq_core::blp::{blp_measure, default_steps};
use collideq_core::collision::{evolve, steady_summary, SteadySummary};
use collideq_core::metrics::{negativity_2, negativity_bipartition, tripartite_negativity};
use collideq_core::trajectories::ensemble_mean_heat;
use collideq_core::{ModelConfig, Setting};
use rayon::prelude::*;

use crate::params::{InitialState, Params};
use crate::table::{format_f64, Cell, Status, Table};
use crate::Command;

/// Largest per-step `|Σ q_sa + ΔE_S|` accepted by `heat`.
pub const HEAT_BALANCE_TOL: f64 = 1e-12;

pub fn run(params: &Params) -> Result<Table> {
    match params.command {
        Command::SteadyState => steady_state(params),
        Command::Dynamics => dynamics(params),
        Command::Heat => heat(params),
        Command::Blp => blp(params),
        Command::Negativity => negativity(params),
        Command::Sweep => sweep(params),
        Command::Trajectories => trajectories(params),
        Command::LimitScan => limit_scan(params),
    }
}

fn preamble(params: &Params) -> Vec<(String, String)> {
    let mut p = vec![
        ("collideq".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("command".to_string(), params.command.to_string()),
    ];
    p.extend(params.resolved.iter().cloned());
    p
}

/// A model configuration together with the grid coordinates it came from.
#[derive(Debug, Clone, Copy)]
struct Point {
    setting: Setting,
    beta: f64,
    dt: f64,
    /// As given, in the configured units.
    delta: f64,
    cfg: ModelConfig,
}

impl Point {
    fn lead(&self) -> Vec<Cell> {
        vec![self.setting.to_string().into(), self.beta.into(), self.dt.into(), self.delta.into()]
    }
}

fn points(params: &Params, pairs: &[(f64, f64)]) -> Vec<Point> {
    let mut out = Vec::new();
    for &setting in &params.settings {
        for &beta in &params.betas {
            for &(dt, delta) in pairs {
                let cfg = ModelConfig {
                    omega: params.omega,
                    gamma: params.gamma,
                    beta,
                    dt,
                    delta: params.delta_units.to_rad(delta),
                    setting,
                };
                out.push(Point { setting, beta, dt, delta, cfg });
            }
        }
    }
    out
}

fn grid_points(params: &Params) -> Vec<Point> {
    let pairs: Vec<(f64, f64)> =
        params.dts.iter().flat_map(|&dt| params.deltas.iter().map(move |&d| (dt, d))).collect();
    points(params, &pairs)
}

fn checked<T>(cfg: &ModelConfig, f: impl FnOnce() -> collideq_core::Result<T>) -> collideq_core::Result<T> {
    cfg.validate()?;
    f()
}

fn flag<T>(what: &str, p: &Point, r: collideq_core::Result<T>) -> std::result::Result<T, Status> {
    r.map_err(|e| {
        log::warn!("{what} at setting {} beta={} dt={} delta={}: {e}", p.setting, p.beta, p.dt, p.delta);
        Status::from(&e)
    })
}

fn blanks(n: usize) -> Vec<Cell> {
    vec![Cell::Empty; n]
}

trait SummaryValue {
    fn text(&self) -> String;
}

impl SummaryValue for f64 {
    fn text(&self) -> String {
        format_f64(*self)
    }
}

macro_rules! display_summary {
    ($($t:ty),*) => {$(
        impl SummaryValue for $t {
            fn text(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_summary!(bool, usize, &str, String, Setting);

fn kv(k: &str, v: impl SummaryValue) -> (String, String) {
    (k.to_string(), v.text())
}

fn group_key(p: &Point) -> Vec<(String, String)> {
    vec![kv("setting", p.setting), kv("beta", p.beta)]
}

fn steady_state(params: &Params) -> Result<Table> {
    let pts = grid_points(params);
    let results: Vec<_> = pts.par_iter().map(|p| checked(&p.cfg, || steady_summary(&p.cfg))).collect();
    let mut t = Table::new(
        preamble(params),
        &["setting", "beta", "dt", "delta", "g_e", "beta_e", "delta_beta", "heat_flux"],
    );
    for (p, r) in pts.iter().zip(results) {
        let mut cells = p.lead();
        match flag("steady state", p, r) {
            Ok(s) => {
                cells.extend([s.effective.g_e.into(), s.effective.beta_e.into(), s.delta_beta.into()]);
                cells.push(s.heat_flux[0].into());
                t.push(cells, Status::Ok);
            }
            Err(status) => {
                cells.extend(blanks(4));
                t.push(cells, status);
            }
        }
    }
    // Δβ along dt, per (setting, beta, delta).
    let db = t.numbers("delta_beta");
    let idx: Vec<usize> = (0..pts.len()).collect();
    for group in idx.chunk_by(|&a, &b| pts[a].setting == pts[b].setting && pts[a].beta == pts[b].beta) {
        for &delta in &params.deltas {
            let vals: Vec<f64> = group.iter().filter(|&&i| pts[i].delta == delta).filter_map(|&i| db[i]).collect();
            let mut line = group_key(&pts[group[0]]);
            line.push(kv("delta", delta));
            line.push(kv("min_delta_beta", vals.iter().copied().fold(f64::INFINITY, f64::min)));
            line.push(kv("increasing_in_dt", vals.windows(2).all(|w| w[1] > w[0])));
            t.summary.push(line);
        }
    }
    Ok(t)
}

fn n_steps(params: &Params, dt: f64) -> usize {
    params
        .steps
        .unwrap_or_else(|| (params.t_final.unwrap_or(5.0) / dt).round().max(1.0) as usize)
}

fn dynamics(params: &Params) -> Result<Table> {
    let pts = points(params, &params.pairs());
    let rho0 = params.rho0.unwrap_or(InitialState::Excited);
    let curves: Vec<_> = pts
        .par_iter()
        .map(|p| {
            checked(&p.cfg, || {
                let n = n_steps(params, p.dt);
                evolve(&p.cfg, &rho0.state(p.beta, p.cfg.omega).map_err(to_core)?, n)
            })
        })
        .collect();
    let mut t = Table::new(
        preamble(params),
        &["setting", "beta", "dt", "delta", "step", "t", "one_minus_F", "beta_e"],
    );
    for (p, curve) in pts.iter().zip(curves) {
        let mut line = group_key(p);
        line.extend([kv("dt", p.dt), kv("delta", p.delta)]);
        match flag("dynamics", p, curve) {
            Ok(curve) => {
                for e in &curve {
                    let mut cells = p.lead();
                    cells.extend([e.step.into(), e.t.into(), e.infidelity.into()]);
                    cells.push(e.effective.filter(|x| x.valid).map(|x| x.beta_e).into());
                    t.push(cells, Status::Ok);
                }
                let max_rise = curve
                    .windows(2)
                    .map(|w| w[1].infidelity - w[0].infidelity)
                    .fold(0.0, f64::max);
                line.push(kv("monotone", max_rise <= 1e-12));
                line.push(kv("max_rise", max_rise));
                line.push(kv("final_one_minus_F", curve.last().map_or(f64::NAN, |e| e.infidelity)));
            }
            Err(status) => {
                let mut cells = p.lead();
                cells.extend(blanks(4));
                t.push(cells, status);
                line.push(kv("status", status.as_str()));
            }
        }
        t.summary.push(line);
    }
    Ok(t)
}

fn to_core(e: anyhow::Error) -> collideq_core::Error {
    collideq_core::Error::InvalidParameter(format!("{e:#}"))
}

fn heat(params: &Params) -> Result<Table> {
    let pts = points(params, &params.pairs());
    let rho0 = params.rho0.unwrap_or(InitialState::Ground);
    let curves: Vec<_> = pts
        .par_iter()
        .map(|p| {
            checked(&p.cfg, || {
                evolve(&p.cfg, &rho0.state(p.beta, p.cfg.omega).map_err(to_core)?, n_steps(params, p.dt))
            })
        })
        .collect();
    let mut t = Table::new(
        preamble(params),
        &[
            "setting",
            "beta",
            "dt",
            "delta",
            "step",
            "t",
            "q_sa_0",
            "q_sa_1",
            "q_lifecycle_0",
            "q_lifecycle_1",
            "delta_e_system",
            "balance_residual",
        ],
    );
    for (p, curve) in pts.iter().zip(curves) {
        let mut line = group_key(p);
        line.extend([kv("dt", p.dt), kv("delta", p.delta)]);
        match flag("heat", p, curve) {
            Ok(curve) => {
                let mut worst: f64 = 0.0;
                for w in curve.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    let energy = |e: &collideq_core::collision::EvolutionPoint| {
                        0.5 * p.cfg.omega * (e.system.populations()[0] - e.system.populations()[1])
                    };
                    let de = energy(b) - energy(a);
                    let residual = b.heats.iter().map(|h| h.q_sa).sum::<f64>() + de;
                    worst = worst.max(residual.abs());
                    let get = |i: usize, f: fn(&collideq_core::collision::HeatRecord) -> f64| -> Cell {
                        b.heats.get(i).map(f).into()
                    };
                    let mut cells = p.lead();
                    cells.extend([b.step.into(), b.t.into()]);
                    cells.extend([get(0, |h| h.q_sa), get(1, |h| h.q_sa)]);
                    cells.extend([get(0, |h| h.q_lifecycle), get(1, |h| h.q_lifecycle)]);
                    cells.extend([de.into(), residual.into()]);
                    let status = if residual.abs() < HEAT_BALANCE_TOL { Status::Ok } else { Status::HeatImbalance };
                    t.push(cells, status);
                }
                line.push(kv("max_balance_residual", worst));
            }
            Err(status) => {
                let mut cells = p.lead();
                cells.extend(blanks(8));
                t.push(cells, status);
                line.push(kv("status", status.as_str()));
            }
        }
        t.summary.push(line);
    }
    Ok(t)
}

fn blp(params: &Params) -> Result<Table> {
    let pts = grid_points(params);
    let results: Vec<_> = pts
        .par_iter()
        .map(|p| {
            checked(&p.cfg, || {
                let n = params.steps.unwrap_or_else(|| default_steps(&p.cfg));
                blp_measure(&p.cfg, n, params.blp_grid)
            })
        })
        .collect();
    let mut t = Table::new(
        preamble(params),
        &["setting", "beta", "dt", "delta", "blp_value", "theta_opt", "phi_opt", "n_steps", "converged"],
    );
    let mut values = Vec::with_capacity(pts.len());
    for (p, r) in pts.iter().zip(results) {
        let mut cells = p.lead();
        match flag("blp", p, r) {
            Ok(b) => {
                cells.extend([b.value.into(), b.argmax_pair.0.into(), b.argmax_pair.1.into()]);
                cells.extend([b.n_steps.into(), b.converged.to_string().into()]);
                let status = if b.converged { Status::Ok } else { Status::Unconverged };
                t.push(cells, status);
                values.push(Some(b.value));
            }
            Err(status) => {
                cells.extend(blanks(5));
                t.push(cells, status);
                values.push(None);
            }
        }
    }
    // Threshold along delta for each (setting, beta, dt).
    let nd = params.deltas.len();
    for (chunk, vals) in pts.chunks(nd).zip(values.chunks(nd)) {
        let mut line = group_key(&chunk[0]);
        line.push(kv("dt", chunk[0].dt));
        let first_positive = chunk.iter().zip(vals).find(|(_, v)| v.is_some_and(|x| x > 0.0));
        match first_positive {
            Some((p, _)) => line.push(kv("threshold_delta", p.delta)),
            None => line.push(kv("threshold_delta", "none")),
        }
        let tail: Vec<f64> = vals
            .iter()
            .flatten()
            .copied()
            .skip_while(|&x| x == 0.0)
            .collect();
        line.push(kv("increasing_past_threshold", tail.windows(2).all(|w| w[1] >= w[0])));
        t.summary.push(line);
    }
    Ok(t)
}

/// Steady-state negativities: `[N3, N_S, N_M0, N_M1, N2_S_M0, N2_S_M1, N2_M0_M1]`
/// for setting II and `[_, _, _, _, N2_S_M, _, _]` for setting I.
fn negativities(s: &SteadySummary) -> collideq_core::Result<Vec<Cell>> {
    let rho = &s.compound;
    if rho.register().len() == 2 {
        let mut cells = blanks(7);
        cells[4] = negativity_2(rho)?.into();
        return Ok(cells);
    }
    let pair = |a: &str, b: &str| -> collideq_core::Result<Cell> {
        Ok(negativity_2(&rho.partial_trace(&[a, b])?)?.into())
    };
    Ok(vec![
        tripartite_negativity(rho)?.into(),
        negativity_bipartition(rho, "S")?.into(),
        negativity_bipartition(rho, "M0")?.into(),
        negativity_bipartition(rho, "M1")?.into(),
        pair("S", "M0")?,
        pair("S", "M1")?,
        pair("M0", "M1")?,
    ])
}

fn steady_with_negativities(p: &Point) -> collideq_core::Result<(SteadySummary, Vec<Cell>)> {
    checked(&p.cfg, || {
        let s = steady_summary(&p.cfg)?;
        let n = negativities(&s)?;
        Ok((s, n))
    })
}

fn negativity(params: &Params) -> Result<Table> {
    let pts = grid_points(params);
    let results: Vec<_> = pts.par_iter().map(steady_with_negativities).collect();
    let mut t = Table::new(
        preamble(params),
        &["setting", "beta", "dt", "delta", "N3", "N_S", "N_M0", "N_M1", "N2_S_M0", "N2_S_M1", "N2_M0_M1"],
    );
    for (p, r) in pts.iter().zip(results) {
        let mut cells = p.lead();
        match flag("negativity", p, r) {
            Ok((_, n)) => {
                cells.extend(n);
                t.push(cells, Status::Ok);
            }
            Err(status) => {
                cells.extend(blanks(7));
                t.push(cells, status);
            }
        }
    }
    Ok(t)
}

fn sweep(params: &Params) -> Result<Table> {
    let pts = grid_points(params);
    let results: Vec<_> = pts.par_iter().map(steady_with_negativities).collect();
    let mut t = Table::new(
        preamble(params),
        &["setting", "beta", "dt", "delta", "delta_beta", "heat_flux", "N3", "N2_S_M0", "N2_S_M1", "N2_M0_M1"],
    );
    let mut db = Vec::with_capacity(pts.len());
    for (p, r) in pts.iter().zip(results) {
        let mut cells = p.lead();
        match flag("sweep", p, r) {
            Ok((s, n)) => {
                cells.extend([s.delta_beta.into(), s.heat_flux[0].into()]);
                cells.extend([n[0].clone(), n[4].clone(), n[5].clone(), n[6].clone()]);
                t.push(cells, Status::Ok);
                db.push((p, Some(s.delta_beta), n[0].as_f64()));
            }
            Err(status) => {
                cells.extend(blanks(6));
                t.push(cells, status);
                db.push((p, None, None));
            }
        }
    }
    for group in db.chunk_by(|a, b| a.0.setting == b.0.setting && a.0.beta == b.0.beta) {
        let vals: Vec<f64> = group.iter().filter_map(|g| g.1).collect();
        let neg = vals.iter().filter(|&&x| x < 0.0).count();
        let pos = vals.iter().filter(|&&x| x > 0.0).count();
        let mut line = group_key(group[0].0);
        line.push(kv("negative_cells", neg));
        line.push(kv("positive_cells", pos));
        line.push(kv("sign_change", neg > 0 && pos > 0));
        line.push(kv("min_delta_beta", vals.iter().copied().fold(f64::INFINITY, f64::min)));
        line.push(kv("max_delta_beta", vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
        let n3 = group.iter().filter_map(|g| g.2).fold(0.0, f64::max);
        line.push(kv("max_N3", n3));
        t.summary.push(line);
    }
    Ok(t)
}

/// Fraction of steps whose mean lies within three standard errors of the
/// reference; a zero standard error only covers an exact match.
pub fn coverage(mean: &[f64], se: &[f64], reference: &[f64]) -> f64 {
    let hits = mean
        .iter()
        .zip(se)
        .zip(reference)
        .filter(|((m, s), r)| {
            let d = (*m - *r).abs();
            if **s == 0.0 {
                d == 0.0
            } else {
                d < 3.0 * *s
            }
        })
        .count();
    hits as f64 / mean.len().max(1) as f64
}

fn trajectories(params: &Params) -> Result<Table> {
    let rho0 = params.rho0.unwrap_or(InitialState::Ground);
    let pts = grid_points(params);
    let mut t = Table::new(
        preamble(params),
        &[
            "setting",
            "beta",
            "dt",
            "delta",
            "traj",
            "step",
            "t",
            "mean_stoch_heat",
            "std_error",
            "unconditional_heat",
            "system_ancilla_heat",
        ],
    );
    for p in &pts {
        let n = n_steps(params, p.dt);
        let state = rho0.state(p.beta, p.cfg.omega)?;
        let exact = match flag("trajectories", p, checked(&p.cfg, || evolve(&p.cfg, &state, n))) {
            Ok(e) => e,
            Err(status) => {
                let mut cells = p.lead();
                cells.extend(blanks(7));
                t.push(cells, status);
                continue;
            }
        };
        let lifecycle: Vec<f64> = exact[1..].iter().map(|e| e.heats[0].q_lifecycle).collect();
        let mut mean_se = Vec::new();
        for &m in &params.traj {
            let stats = match flag("trajectories", p, ensemble_mean_heat(&p.cfg, &state, n, m, params.seed)) {
                Ok(s) => s,
                Err(status) => {
                    let mut cells = p.lead();
                    cells.push(m.into());
                    cells.extend(blanks(6));
                    t.push(cells, status);
                    continue;
                }
            };
            let mean: Vec<f64> = stats.mean_heat.iter().map(|r| r[0]).collect();
            let se: Vec<f64> = stats.std_error.iter().map(|r| r[0]).collect();
            for s in 0..n {
                let mut cells = p.lead();
                cells.extend([m.into(), (s + 1).into(), ((s + 1) as f64 * p.dt).into()]);
                cells.extend([mean[s].into(), se[s].into(), lifecycle[s].into()]);
                cells.push(exact[s + 1].heats[0].q_sa.into());
                t.push(cells, Status::Ok);
            }
            let avg_se = se.iter().sum::<f64>() / n.max(1) as f64;
            let mad = mean.iter().zip(&lifecycle).map(|(a, b)| (a - b).abs()).sum::<f64>() / n.max(1) as f64;
            let mut line = group_key(p);
            line.extend([kv("dt", p.dt), kv("delta", p.delta), kv("traj", m)]);
            line.push(kv("coverage", coverage(&mean, &se, &lifecycle)));
            line.push(kv("mean_std_error", avg_se));
            line.push(kv("mean_abs_deviation", mad));
            t.summary.push(line);
            mean_se.push((m, avg_se));
        }
        if let [(m0, s0), .., (m1, s1)] = mean_se[..] {
            let mut line = group_key(p);
            line.extend([kv("dt", p.dt), kv("delta", p.delta)]);
            line.push(kv("std_error_ratio", s1 / s0));
            line.push(kv("between", format!("{m0}:{m1}")));
            t.summary.push(line);
        }
    }
    Ok(t)
}

fn limit_scan(params: &Params) -> Result<Table> {
    let mut rows = Vec::new();
    for &setting in &params.settings {
        for &beta in &params.betas {
            for &r in &params.rs {
                for &dt in &params.dts {
                    let delta = 1.0 - dt / r;
                    let rad = params.delta_units.to_rad(delta);
                    let cfg = ModelConfig { omega: params.omega, gamma: params.gamma, beta, dt, delta: rad, setting };
                    rows.push((r, Point { setting, beta, dt, delta, cfg }, rad));
                }
            }
        }
    }
    let results: Vec<_> = rows
        .par_iter()
        .map(|(_, p, rad)| {
            if !(0.0..FRAC_PI_2).contains(rad) {
                return None;
            }
            Some(checked(&p.cfg, || steady_summary(&p.cfg)))
        })
        .collect();
    let mut t = Table::new(preamble(params), &["setting", "beta", "r", "dt", "delta", "delta_rad", "delta_beta"]);
    let mut db = Vec::with_capacity(rows.len());
    for ((r, p, rad), res) in rows.iter().zip(results) {
        let mut cells = vec![p.setting.to_string().into(), p.beta.into(), (*r).into(), p.dt.into()];
        cells.extend([p.delta.into(), (*rad).into()]);
        match res.map(|x| flag("limit scan", p, x)) {
            None => {
                log::warn!("skipping r={r} dt={}: delta {rad} rad outside [0, pi/2)", p.dt);
                cells.push(Cell::Empty);
                t.push(cells, Status::SkippedDeltaOutOfRange);
                db.push(None);
            }
            Some(Ok(s)) => {
                cells.push(s.delta_beta.into());
                t.push(cells, Status::Ok);
                db.push(Some(s.delta_beta));
            }
            Some(Err(status)) => {
                cells.push(Cell::Empty);
                t.push(cells, status);
                db.push(None);
            }
        }
    }
    let nd = params.dts.len();
    for (chunk, vals) in rows.chunks(nd).zip(db.chunks(nd)) {
        let (r, p, _) = &chunk[0];
        let mut line = group_key(p);
        line.push(kv("r", *r));
        let v: Vec<f64> = vals.iter().flatten().map(|x| x.abs()).collect();
        if let (Some(first), Some(last)) = (v.first(), v.last()) {
            line.push(kv("abs_delta_beta_first", *first));
            line.push(kv("abs_delta_beta_last", *last));
            line.push(kv("last_over_first", last / first));
        }
        if let [.., a, b] = v[..] {
            line.push(kv("last_rel_change", (b - a).abs() / a));
        }
        t.summary.push(line);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts_three_sigma_hits() {
        assert_eq!(coverage(&[0.0, 1.0, 5.0], &[1.0, 0.1, 1.0], &[2.9, 1.5, 5.0]), 2.0 / 3.0);
        assert_eq!(coverage(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.1]), 0.5);
    }
}
