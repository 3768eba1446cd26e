//! Quantum trajectories under a two-point energy measurement of every bath
//! ancilla: once at birth and once after its last collision.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collision::engine::Collider;
use crate::collision::ModelConfig;
use crate::error::{Error, Result};
use crate::metrics::{EXCITED, GROUND};
use crate::tensor::{identity, kron, partial_trace_positions, ComplexMatrix, DensityMatrix, LocalIndex, C64};

const BORN_TOL: f64 = 1e-10;
const BLOCK: usize = 256;
const FIRST: u64 = 0;
const SECOND: u64 = 1;

/// Energy-basis measurement result for one ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Ground,
    Excited,
}

impl Outcome {
    pub fn index(self) -> usize {
        match self {
            Outcome::Excited => EXCITED,
            Outcome::Ground => GROUND,
        }
    }

    /// Eigenvalue of `σz`.
    pub fn z(self) -> f64 {
        match self {
            Outcome::Excited => 1.0,
            Outcome::Ground => -1.0,
        }
    }
}

/// Stochastic heat `ω (z₂ − z₁) / 2` absorbed by an ancilla.
pub fn stochastic_heat(first: Outcome, second: Outcome, omega: f64) -> f64 {
    0.5 * omega * (second.z() - first.z())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// `outcomes[n][i]`: (first, second) results of the ancilla of bath `i`
    /// retired at step `n + 1`.
    pub outcomes: Vec<Vec<(Outcome, Outcome)>>,
    /// `heats[n][i]`, matching `outcomes`.
    pub heats: Vec<Vec<f64>>,
    pub final_system_state: DensityMatrix,
}

/// Ensemble averages, indexed `[step][bath]` with step 0 the first collision.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_trajectories: usize,
    pub mean_heat: Vec<Vec<f64>>,
    /// Sample standard deviation over `√M`; zero when `M = 1`.
    pub std_error: Vec<Vec<f64>>,
    pub mean_final_state: ComplexMatrix,
    /// Standard errors of the real and imaginary parts of each entry.
    pub final_state_std_error: ComplexMatrix,
}

/// Seed of trajectory `k`, independent of how many trajectories run or in
/// which order.
pub fn trajectory_seed(master_seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(k);
    rng.next_u64()
}

/// Uniform draw fixed by `(step, bath, kind)` alone.
fn draw(rng: &mut ChaCha8Rng, step: usize, bath: usize, kind: u64) -> f64 {
    rng.set_stream(bath as u64 * 2 + kind);
    rng.set_word_pos(step as u128 * 2);
    rng.random::<f64>()
}

fn check_probability(p: f64) -> Result<f64> {
    if !(p.is_finite() && (-BORN_TOL..=1.0 + BORN_TOL).contains(&p)) {
        return Err(Error::NumericalPositivity(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Everything a trajectory needs that does not depend on the seed.
struct Prepared {
    collider: Collider,
    omega: f64,
    n_baths: usize,
    n_qubits: usize,
    /// `kraus[i][f][k]`: maps the memory of bath `i` to the new memory, given
    /// a newborn ancilla measured in `f` and the old memory found in `k`.
    kraus: Vec<[[ComplexMatrix; 2]; 2]>,
    /// `effects[i][f][k] = K† K`.
    effects: Vec<[[ComplexMatrix; 2]; 2]>,
    memory_index: Vec<LocalIndex>,
    /// Probability that a newborn ancilla of bath `i` is excited.
    p_born_excited: Vec<f64>,
}

impl Prepared {
    fn new(cfg: &ModelConfig) -> Result<Self> {
        let collider = Collider::new(cfg)?;
        let n_baths = collider.n_baths;
        let n_qubits = collider.compound_qubits();
        let intra = collider.intra.clone().unwrap_or_else(|| identity(4));
        let kraus_for = |f: usize, k: usize| {
            ComplexMatrix::from_fn(2, 2, |a, m| intra[(k * 2 + a, m * 2 + f)])
        };
        let table = [[kraus_for(0, 0), kraus_for(0, 1)], [kraus_for(1, 0), kraus_for(1, 1)]];
        let effects = table.clone().map(|row| row.map(|k| k.adjoint() * k));
        let memory_index =
            (0..n_baths).map(|i| LocalIndex::new(&[1 + i], n_qubits)).collect::<Result<Vec<_>>>()?;
        let p_born_excited = collider.fresh.iter().map(|f| f[(EXCITED, EXCITED)].re).collect();
        Ok(Self {
            omega: cfg.omega,
            n_baths,
            n_qubits,
            kraus: vec![table; n_baths],
            effects: vec![effects; n_baths],
            memory_index,
            p_born_excited,
            collider,
        })
    }

    /// First measurement of a newborn ancilla of bath `i`. Pure energy
    /// eigenstates give a certain outcome without consuming a draw.
    fn birth(&self, rng: &mut ChaCha8Rng, step: usize, i: usize) -> Result<Outcome> {
        let p = check_probability(self.p_born_excited[i])?;
        if p == 1.0 {
            return Ok(Outcome::Excited);
        }
        if p == 0.0 {
            return Ok(Outcome::Ground);
        }
        Ok(if draw(rng, step, i, FIRST) < p { Outcome::Excited } else { Outcome::Ground })
    }

    fn memory_probabilities(&self, rho: &ComplexMatrix, i: usize, born: Outcome) -> Result<[f64; 2]> {
        let mem = partial_trace_positions(rho, self.n_qubits, &[1 + i])?;
        let f = born.index();
        let p = |k: usize| -> C64 { (&self.effects[i][f][k] * &mem).trace() };
        let (pe, pg) = (check_probability(p(EXCITED).re)?, check_probability(p(GROUND).re)?);
        let total = pe + pg;
        if (total - 1.0).abs() > BORN_TOL {
            return Err(Error::NumericalPositivity(total));
        }
        let mut out = [0.0; 2];
        out[EXCITED] = pe / total;
        out[GROUND] = pg / total;
        Ok(out)
    }

    fn run(&self, rho0: &ComplexMatrix, n_steps: usize, seed: u64) -> Result<(TrajectoryRecord, ComplexMatrix)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut age = Vec::with_capacity(self.n_baths);
        let mut rho = rho0.clone();
        for i in 0..self.n_baths {
            let first = self.birth(&mut rng, 0, i)?;
            let pure = pure_qubit(first);
            rho = kron(&rho, &pure);
            age.push(first);
        }
        let mut outcomes = Vec::with_capacity(n_steps);
        let mut heats = Vec::with_capacity(n_steps);
        for step in 1..=n_steps {
            rho = &self.collider.collision * &rho * self.collider.collision.adjoint();
            let mut step_outcomes = Vec::with_capacity(self.n_baths);
            let mut step_heats = Vec::with_capacity(self.n_baths);
            for (i, old) in age.iter_mut().enumerate() {
                let born = self.birth(&mut rng, step, i)?;
                let probs = self.memory_probabilities(&rho, i, born)?;
                let second = if draw(&mut rng, step, i, SECOND) < probs[EXCITED] {
                    Outcome::Excited
                } else {
                    Outcome::Ground
                };
                let k = &self.kraus[i][born.index()][second.index()];
                rho = self.memory_index[i].conjugate(k, &rho);
                rho /= C64::new(probs[second.index()], 0.0);
                step_outcomes.push((*old, second));
                step_heats.push(stochastic_heat(*old, second, self.omega));
                *old = born;
            }
            outcomes.push(step_outcomes);
            heats.push(step_heats);
        }
        let system = partial_trace_positions(&rho, self.n_qubits, &[0])?;
        let record = TrajectoryRecord {
            seed,
            outcomes,
            heats,
            final_system_state: DensityMatrix::from_parts(crate::tensor::QubitRegister::new(["S"])?, system),
        };
        Ok((record, rho))
    }
}

fn pure_qubit(o: Outcome) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(o.index(), o.index())] = C64::new(1.0, 0.0);
    m
}

fn check_system(rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho0.dim() });
    }
    Ok(())
}

/// One trajectory of `n_steps` collisions.
pub fn run_trajectory(cfg: &ModelConfig, rho0: &DensityMatrix, n_steps: usize, seed: u64) -> Result<TrajectoryRecord> {
    check_system(rho0)?;
    Ok(Prepared::new(cfg)?.run(rho0.matrix(), n_steps, seed)?.0)
}

/// Like [`run_trajectory`], also returning the conditional state of the
/// system and memories after the last step.
pub fn run_trajectory_with_compound(
    cfg: &ModelConfig,
    rho0: &DensityMatrix,
    n_steps: usize,
    seed: u64,
) -> Result<(TrajectoryRecord, ComplexMatrix)> {
    check_system(rho0)?;
    Prepared::new(cfg)?.run(rho0.matrix(), n_steps, seed)
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0)).sqrt() / self.n.sqrt()
        }
    }
}

/// Moments of the heats (`[step][bath]` flattened) followed by the real
/// and imaginary parts of the final system state.
struct Block(Vec<Moments>);

/// Mean stochastic heat over `m` trajectories with seeds
/// `trajectory_seed(master_seed, k)`, `k = 0..m`.
///
/// Trajectories run in fixed blocks whose statistics are merged in block
/// order, so the result does not depend on the thread count.
pub fn ensemble_mean_heat(
    cfg: &ModelConfig,
    rho0: &DensityMatrix,
    n_steps: usize,
    m: usize,
    master_seed: u64,
) -> Result<EnsembleStats> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    check_system(rho0)?;
    let prepared = Prepared::new(cfg)?;
    let nb = prepared.n_baths;
    let width = n_steps * nb + 8;
    let blocks: Vec<Result<Block>> = (0..m.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Moments::default(); width];
            for k in b * BLOCK..((b + 1) * BLOCK).min(m) {
                let seed = trajectory_seed(master_seed, k as u64);
                let (rec, _) = prepared.run(rho0.matrix(), n_steps, seed)?;
                for (s, row) in rec.heats.iter().enumerate() {
                    for (i, q) in row.iter().enumerate() {
                        acc[s * nb + i].push(*q);
                    }
                }
                for (e, c) in rec.final_system_state.matrix().iter().enumerate() {
                    acc[n_steps * nb + 2 * e].push(c.re);
                    acc[n_steps * nb + 2 * e + 1].push(c.im);
                }
            }
            Ok(Block(acc))
        })
        .collect();

    let mut total = vec![Moments::default(); width];
    for block in blocks {
        for (t, b) in total.iter_mut().zip(block?.0.iter()) {
            t.merge(b);
        }
    }
    let per_step = |f: &dyn Fn(&Moments) -> f64| -> Vec<Vec<f64>> {
        (0..n_steps).map(|s| (0..nb).map(|i| f(&total[s * nb + i])).collect()).collect()
    };
    let state = |f: &dyn Fn(&Moments) -> f64| -> ComplexMatrix {
        let base = n_steps * nb;
        // Column-major storage order matches the `iter()` order used above.
        ComplexMatrix::from_iterator(
            2,
            2,
            (0..4).map(|e| C64::new(f(&total[base + 2 * e]), f(&total[base + 2 * e + 1]))),
        )
    };
    Ok(EnsembleStats {
        n_trajectories: m,
        mean_heat: per_step(&|mo| mo.mean),
        std_error: per_step(&|mo| mo.std_error()),
        mean_final_state: state(&|mo| mo.mean),
        final_state_std_error: state(&|mo| mo.std_error()),
    })
}
