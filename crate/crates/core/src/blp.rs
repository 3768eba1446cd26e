//! Discretised BLP non-Markovianity: accumulated revivals of the trace
//! distance between two system states evolved under the same collision
//! dynamics, maximised over antipodal pure-state pairs.

use rayon::prelude::*;

use crate::collision::{embedded_step_channel, ModelConfig, StepChannel};
use crate::error::{Error, Result};
use crate::metrics::trace_norm_distance;
use crate::tensor::{kron, partial_trace_positions, pauli_x, pauli_y, pauli_z, unvectorize, vectorize, ComplexMatrix, C64};

/// Trace-distance increments at or below this are treated as round-off.
pub const REVIVAL_FLOOR: f64 = 1e-12;
/// Final trace distance above which a run counts as unconverged.
pub const CONVERGED_BELOW: f64 = 1e-6;
pub const MAX_STEPS: usize = 1_000_000;

/// Bloch-sphere grid; `theta` spans `[0, π]` inclusive, `phi` spans
/// `[0, π)` since a pair and its swap are the same pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlpGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for BlpGrid {
    fn default() -> Self {
        Self { n_theta: 32, n_phi: 16 }
    }
}

impl BlpGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 8 || n_phi < 8 {
            return Err(Error::InvalidParameter(format!("BLP grid must be at least 8x8, got {n_theta}x{n_phi}")));
        }
        Ok(Self { n_theta, n_phi })
    }

    /// Grid angles in lexicographic `(theta, phi)` order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let pi = std::f64::consts::PI;
        let mut pts = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            let theta = pi * i as f64 / (self.n_theta - 1) as f64;
            for j in 0..self.n_phi {
                pts.push((theta, pi * j as f64 / self.n_phi as f64));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlpResult {
    pub value: f64,
    /// `(theta, phi)` of the first state of the optimal pair.
    pub argmax_pair: (f64, f64),
    /// `D_n` for the optimal pair, `n = 0..=n_steps`.
    pub series: Vec<f64>,
    pub n_steps: usize,
    /// Largest final trace distance over the grid is below [`CONVERGED_BELOW`].
    pub converged: bool,
}

/// `ceil(20 / (Γ dt))`, capped at [`MAX_STEPS`].
pub fn default_steps(cfg: &ModelConfig) -> usize {
    let n = (20.0 / (cfg.gamma * cfg.dt)).ceil();
    if n.is_finite() && n >= 1.0 {
        (n as usize).min(MAX_STEPS)
    } else {
        MAX_STEPS
    }
}

/// `Σ max(0, D_n − D_{n−1})`, ignoring increments up to [`REVIVAL_FLOOR`].
pub fn accumulate_revivals(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&inc| inc > REVIVAL_FLOOR)
        .sum()
}

/// Pure qubit state with Bloch angles `(theta, phi)`.
pub fn bloch_state(theta: f64, phi: f64) -> ComplexMatrix {
    let (x, y, z) = bloch_vector(theta, phi);
    let half = C64::new(0.5, 0.0);
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[half * (1.0 + z), C64::new(0.5 * x, -0.5 * y), C64::new(0.5 * x, 0.5 * y), half * (1.0 - z)],
    )
}

fn bloch_vector(theta: f64, phi: f64) -> (f64, f64, f64) {
    (theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Reduced system images of `σ_k ⊗ memory` after `n` steps, stored as
/// `(a, Re b, Im b)` of the traceless Hermitian `[[a, b], [b*, −a]]`.
struct PauliSeries {
    rows: Vec<[[f64; 3]; 3]>,
}

impl PauliSeries {
    fn compute(channel: &StepChannel, n_steps: usize) -> Self {
        let d = channel.dim();
        let nq = channel.compound_register.len();
        let memory = channel.collider.initial_compound(&ComplexMatrix::identity(2, 2).scale(0.5));
        let memory = partial_trace_positions(&memory, nq, &(1..nq).collect::<Vec<_>>()).expect("memory positions");
        let mut vs: Vec<_> = [pauli_x(), pauli_y(), pauli_z()].iter().map(|p| vectorize(&kron(p, &memory))).collect();
        let mut rows = Vec::with_capacity(n_steps + 1);
        let reduce = |v: &nalgebra::DVector<C64>| -> [f64; 3] {
            let s = partial_trace_positions(&unvectorize(v, d), nq, &[0]).expect("system position");
            [0.5 * (s[(0, 0)].re - s[(1, 1)].re), s[(0, 1)].re, s[(0, 1)].im]
        };
        rows.push([reduce(&vs[0]), reduce(&vs[1]), reduce(&vs[2])]);
        for _ in 0..n_steps {
            for v in vs.iter_mut() {
                *v = &channel.superoperator * &*v;
            }
            rows.push([reduce(&vs[0]), reduce(&vs[1]), reduce(&vs[2])]);
        }
        Self { rows }
    }

    fn distance(row: &[[f64; 3]; 3], r: (f64, f64, f64)) -> f64 {
        let r = [r.0, r.1, r.2];
        let mut acc = [0.0; 3];
        for (k, rk) in r.iter().enumerate() {
            for c in 0..3 {
                acc[c] += rk * row[k][c];
            }
        }
        (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt()
    }

    fn series(&self, r: (f64, f64, f64)) -> Vec<f64> {
        self.rows.iter().map(|row| Self::distance(row, r)).collect()
    }

    fn revivals_and_final(&self, r: (f64, f64, f64)) -> (f64, f64) {
        let mut value = 0.0;
        let mut prev = Self::distance(&self.rows[0], r);
        for row in &self.rows[1..] {
            let cur = Self::distance(row, r);
            if cur - prev > REVIVAL_FLOOR {
                value += cur - prev;
            }
            prev = cur;
        }
        (value, prev)
    }
}

/// BLP measure over `n_steps` collisions, maximised over `grid`.
///
/// Both states of a pair start with the same fresh memories, so with
/// `delta = 0` the measure is exactly zero.
pub fn blp_measure(cfg: &ModelConfig, n_steps: usize, grid: BlpGrid) -> Result<BlpResult> {
    BlpGrid::new(grid.n_theta, grid.n_phi)?;
    if n_steps == 0 || n_steps > MAX_STEPS {
        return Err(Error::InvalidParameter(format!("n_steps must be in 1..={MAX_STEPS}, got {n_steps}")));
    }
    let channel = embedded_step_channel(cfg)?;
    let pauli = PauliSeries::compute(&channel, n_steps);
    let points = grid.points();
    let scores: Vec<(f64, f64)> =
        points.par_iter().map(|&(t, p)| pauli.revivals_and_final(bloch_vector(t, p))).collect();

    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if s.0 > scores[best].0 {
            best = k;
        }
    }
    let worst_final = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    let converged = worst_final < CONVERGED_BELOW;
    if !converged {
        log::warn!("BLP run not converged after {n_steps} steps: final trace distance {worst_final:e}");
    }
    let (theta, phi) = points[best];
    Ok(BlpResult {
        value: scores[best].0,
        argmax_pair: (theta, phi),
        series: pauli.series(bloch_vector(theta, phi)),
        n_steps,
        converged,
    })
}

/// Trace distance between the system marginals of two initial system states
/// evolved step by step with identical fresh memories.
pub fn trace_distance_series(cfg: &ModelConfig, rho0: &ComplexMatrix, pi0: &ComplexMatrix, n_steps: usize) -> Result<Vec<f64>> {
    let channel = embedded_step_channel(cfg)?;
    let collider = &channel.collider;
    let nq = channel.compound_register.len();
    let mut a = collider.initial_compound(rho0);
    let mut b = collider.initial_compound(pi0);
    let mut out = Vec::with_capacity(n_steps + 1);
    let distance = |a: &ComplexMatrix, b: &ComplexMatrix| -> Result<f64> {
        let sa = partial_trace_positions(a, nq, &[0])?;
        let sb = partial_trace_positions(b, nq, &[0])?;
        Ok(trace_norm_distance(&sa, &sb))
    };
    out.push(distance(&a, &b)?);
    for _ in 0..n_steps {
        a = collider.propagate(&a);
        b = collider.propagate(&b);
        out.push(distance(&a, &b)?);
    }
    Ok(out)
}
