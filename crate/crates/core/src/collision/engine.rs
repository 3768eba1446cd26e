use nalgebra::{DVector, Schur, SVD};

use super::{partial_swap_matrix, setting2_unitary, ModelConfig, Setting};
use crate::error::{Error, Result};
use crate::metrics::{effective_temperature, fidelity, gibbs_qubit, EffectiveTemperature, EXCITED};
use crate::tensor::{
    hermitize, identity, kron, partial_trace_positions, unvectorize, vectorize, ComplexMatrix, DensityMatrix,
    LocalIndex, QubitRegister, C64,
};

/// Eigenvalues this close to the unit circle count towards degeneracy.
const UNIT_CIRCLE_TOL: f64 = 1e-9;

/// Which bath an ancilla belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BathId {
    /// The only bath of setting I.
    Single,
    /// Setting II bath of ground-state ancillas.
    Ground,
    /// Setting II bath of excited-state ancillas.
    Excited,
}

impl BathId {
    pub(crate) fn for_setting(setting: Setting) -> &'static [BathId] {
        match setting {
            Setting::I => &[BathId::Single],
            Setting::II => &[BathId::Ground, BathId::Excited],
        }
    }

    pub fn index(self) -> usize {
        match self {
            BathId::Single | BathId::Ground => 0,
            BathId::Excited => 1,
        }
    }
}

/// Heat absorbed by one ancilla, split by the collision it happened in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatRecord {
    pub bath: BathId,
    /// Across the system-ancilla collision.
    pub q_sa: f64,
    /// Across the collision with its predecessor in the bath.
    pub q_intra_in: f64,
    /// Across the collision with its successor in the bath.
    pub q_intra_out: f64,
    /// Total over the ancilla's life.
    pub q_lifecycle: f64,
}

/// Energy `Tr[(ω/2) σz ρ]` of qubit `pos` in an `n`-qubit matrix.
pub(crate) fn qubit_energy(m: &ComplexMatrix, n: usize, pos: usize, omega: f64) -> f64 {
    let shift = n - 1 - pos;
    let mut e = 0.0;
    for i in 0..m.nrows() {
        let z = if (i >> shift) & 1 == EXCITED { 1.0 } else { -1.0 };
        e += z * m[(i, i)].re;
    }
    0.5 * omega * e
}

/// One collision of the memory-embedded model.
///
/// The compound holds the system at position 0 and one memory qubit per
/// bath after it. The memory is the ancilla that met the system in the
/// previous step; at the start it is a fresh bath ancilla.
#[derive(Debug, Clone)]
pub(crate) struct Collider {
    pub(crate) cfg: ModelConfig,
    pub(crate) n_baths: usize,
    /// System-memory collision on the compound.
    pub(crate) collision: ComplexMatrix,
    /// Intra-bath collision on (memory, fresh); `None` when `delta = 0`.
    pub(crate) intra: Option<ComplexMatrix>,
    /// Fresh ancilla state per bath.
    pub(crate) fresh: Vec<ComplexMatrix>,
    fresh_product: ComplexMatrix,
    fresh_energy: Vec<f64>,
    intra_index: Vec<LocalIndex>,
}

pub(crate) struct StepOutput {
    pub(crate) next: ComplexMatrix,
    pub(crate) q_sa: Vec<f64>,
    pub(crate) q_intra_out: Vec<f64>,
    /// Energy gained by each fresh ancilla in its first intra-bath collision.
    pub(crate) successor_in: Vec<f64>,
}

impl Collider {
    pub(crate) fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let n_baths = cfg.setting.n_baths();
        let (collision, fresh) = match cfg.setting {
            Setting::I => {
                let j = cfg.coupling()?;
                let eta = gibbs_qubit(cfg.beta, cfg.omega)?.into_matrix();
                (partial_swap_matrix(j * cfg.dt), vec![eta])
            }
            Setting::II => {
                let register = QubitRegister::new(["S", "M0", "M1"])?;
                let u = setting2_unitary(cfg, &register, ["S", "M0", "M1"])?.into_matrix();
                let ground = crate::metrics::ground_state().into_matrix();
                let excited = crate::metrics::excited_state().into_matrix();
                (u, vec![ground, excited])
            }
        };
        let fresh_product = fresh.iter().skip(1).fold(fresh[0].clone(), |acc, f| kron(&acc, f));
        let fresh_energy = fresh.iter().map(|f| qubit_energy(f, 1, 0, cfg.omega)).collect();
        let n_ext = 1 + 2 * n_baths;
        let intra_index = (0..n_baths)
            .map(|i| LocalIndex::new(&[1 + i, 1 + n_baths + i], n_ext))
            .collect::<Result<Vec<_>>>()?;
        let intra = (!cfg.is_markovian()).then(|| partial_swap_matrix(cfg.delta));
        Ok(Self { cfg: *cfg, n_baths, collision, intra, fresh, fresh_product, fresh_energy, intra_index })
    }

    pub(crate) fn compound_qubits(&self) -> usize {
        1 + self.n_baths
    }

    pub(crate) fn compound_register(&self) -> QubitRegister {
        let labels: &[&str] = match self.cfg.setting {
            Setting::I => &["S", "M"],
            Setting::II => &["S", "M0", "M1"],
        };
        QubitRegister::new(labels.iter().copied()).expect("static labels")
    }

    /// System state with every memory in its fresh bath state.
    pub(crate) fn initial_compound(&self, rho_s: &ComplexMatrix) -> ComplexMatrix {
        kron(rho_s, &self.fresh_product)
    }

    fn collide(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        &self.collision * rho * self.collision.adjoint()
    }

    /// Attaches fresh ancillas and runs the intra-bath collisions.
    fn extend(&self, collided: &ComplexMatrix) -> ComplexMatrix {
        let mut ext = kron(collided, &self.fresh_product);
        if let Some(intra) = &self.intra {
            for index in &self.intra_index {
                ext = index.conjugate(intra, &ext);
            }
        }
        ext
    }

    /// A full SWAP of memory and fresh ancilla followed by discarding the
    /// fresh slot is the same as discarding the memory and promoting the
    /// fresh ancilla.
    fn retire(&self, ext: &ComplexMatrix) -> ComplexMatrix {
        let nb = self.n_baths;
        let keep: Vec<usize> = std::iter::once(0).chain(1 + nb..1 + 2 * nb).collect();
        partial_trace_positions(ext, 1 + 2 * nb, &keep).expect("positions in range")
    }

    pub(crate) fn propagate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.retire(&self.extend(&self.collide(rho)))
    }

    pub(crate) fn step(&self, rho: &ComplexMatrix) -> StepOutput {
        let nb = self.n_baths;
        let nc = 1 + nb;
        let ne = 1 + 2 * nb;
        let omega = self.cfg.omega;
        let collided = self.collide(rho);
        let ext = self.extend(&collided);
        let mut q_sa = Vec::with_capacity(nb);
        let mut q_intra_out = Vec::with_capacity(nb);
        let mut successor_in = Vec::with_capacity(nb);
        for i in 0..nb {
            let before = qubit_energy(rho, nc, 1 + i, omega);
            let after_sa = qubit_energy(&collided, nc, 1 + i, omega);
            q_sa.push(after_sa - before);
            q_intra_out.push(qubit_energy(&ext, ne, 1 + i, omega) - after_sa);
            successor_in.push(qubit_energy(&ext, ne, 1 + nb + i, omega) - self.fresh_energy[i]);
        }
        StepOutput { next: self.retire(&ext), q_sa, q_intra_out, successor_in }
    }
}

/// One-collision CPTP map on the system-memory compound, stored as a
/// superoperator on row-major vectorised matrices.
#[derive(Debug, Clone)]
pub struct StepChannel {
    pub compound_register: QubitRegister,
    pub superoperator: ComplexMatrix,
    pub description: String,
    pub(crate) collider: Collider,
}

impl StepChannel {
    /// Hilbert-space dimension of the compound.
    pub fn dim(&self) -> usize {
        self.compound_register.dim()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.collider.cfg
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        unvectorize(&(&self.superoperator * vectorize(rho)), self.dim())
    }

    /// Choi matrix `Σ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim();
        let s = &self.superoperator;
        ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, k) = (r / d, r % d);
            let (j, l) = (c / d, c % d);
            s[(k * d + l, i * d + j)]
        })
    }

    /// Largest deviation of `Tr Φ(|a⟩⟨b|)` from `δ_ab`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let mut tr = C64::new(0.0, 0.0);
                for k in 0..d {
                    tr += self.superoperator[(k * d + k, a * d + b)];
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((tr - expect).norm());
            }
        }
        worst
    }
}

/// Builds the memory-embedded one-step channel.
///
/// One step: the system collides with the memory, each memory collides with
/// a fresh ancilla of its bath, a full SWAP moves the fresh ancilla into the
/// memory slot and the old memory is discarded. With `delta = 0` the memory
/// is simply reset, which reproduces the Markovian model.
pub fn embedded_step_channel(cfg: &ModelConfig) -> Result<StepChannel> {
    let collider = Collider::new(cfg)?;
    let d = 1usize << collider.compound_qubits();
    let mut superoperator = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let mut unit = ComplexMatrix::zeros(d, d);
            unit[(a, b)] = C64::new(1.0, 0.0);
            let image = vectorize(&collider.propagate(&unit));
            superoperator.set_column(a * d + b, &image);
        }
    }
    let description = format!(
        "setting {} {} (beta={}, dt={}, delta={})",
        cfg.setting,
        if cfg.is_markovian() { "markovian" } else { "embedded" },
        cfg.beta,
        cfg.dt,
        cfg.delta
    );
    Ok(StepChannel { compound_register: collider.compound_register(), superoperator, description, collider })
}

fn normalise_state(m: ComplexMatrix) -> ComplexMatrix {
    let h = hermitize(&m);
    let tr = h.trace().re;
    h.scale(1.0 / tr)
}

fn unit_circle_multiplicity(s: &ComplexMatrix) -> Option<usize> {
    let schur = Schur::try_new(s.clone(), 1e-15, 10_000)?;
    let (_, t) = schur.unpack();
    Some((0..t.nrows()).filter(|&k| t[(k, k)].norm() >= 1.0 - UNIT_CIRCLE_TOL).count())
}

/// Unique fixed point of a trace-preserving step channel.
///
/// Taken from the null space of `S - 1`; fails with
/// [`Error::NonUniqueSteadyState`] when more than one eigenvalue sits on the
/// unit circle.
pub fn steady_state(channel: &StepChannel) -> Result<DensityMatrix> {
    let s = &channel.superoperator;
    let n = s.nrows();
    let d = channel.dim();
    let shifted = s - ComplexMatrix::identity(n, n);
    let svd = SVD::new(shifted, false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let near_zero = svd.singular_values.iter().filter(|&&x| x < UNIT_CIRCLE_TOL).count();
    let multiplicity = unit_circle_multiplicity(s).unwrap_or(near_zero).max(near_zero);
    if multiplicity != 1 {
        return Err(Error::NonUniqueSteadyState { multiplicity });
    }
    let k = svd.singular_values.imin();
    let v = DVector::from_iterator(n, v_t.row(k).iter().map(|c| c.conj()));
    let rho = normalise_state(unvectorize(&v, d));
    DensityMatrix::new(channel.compound_register.clone(), rho)
}

/// Fixed point by power iteration from the maximally mixed state, using
/// repeated squaring of the superoperator. Returns the state and the number
/// of squarings performed.
pub fn power_iteration_fixed_point(channel: &StepChannel) -> (ComplexMatrix, usize) {
    let d = channel.dim();
    let start = vectorize(&identity(d).scale(1.0 / d as f64));
    let mut power = channel.superoperator.clone();
    let mut v = &power * &start;
    let mut squarings = 0;
    while squarings < 64 {
        let next = &channel.superoperator * &v;
        let change = (&next - &v).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if change < 1e-15 {
            break;
        }
        power = &power * &power;
        v = &power * &start;
        squarings += 1;
    }
    (normalise_state(unvectorize(&v, d)), squarings)
}

/// One collision in the Markovian model (`delta = 0`): fresh ancillas are
/// attached, the collision unitary applied and the ancillas traced out.
pub fn markovian_step(cfg: &ModelConfig, rho_s: &DensityMatrix) -> Result<(DensityMatrix, Vec<HeatRecord>)> {
    if !cfg.is_markovian() {
        return Err(Error::InvalidParameter(format!("markovian_step needs delta = 0, got {}", cfg.delta)));
    }
    let collider = Collider::new(cfg)?;
    check_system(rho_s)?;
    let out = collider.step(&collider.initial_compound(rho_s.matrix()));
    let system = partial_trace_positions(&out.next, collider.compound_qubits(), &[0])?;
    let heats = BathId::for_setting(cfg.setting)
        .iter()
        .zip(&out.q_sa)
        .map(|(&bath, &q)| HeatRecord { bath, q_sa: q, q_intra_in: 0.0, q_intra_out: 0.0, q_lifecycle: q })
        .collect();
    Ok((DensityMatrix::from_parts(rho_s.register().clone(), system), heats))
}

fn check_system(rho_s: &DensityMatrix) -> Result<()> {
    if rho_s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho_s.dim() });
    }
    Ok(())
}

/// Diagnostics after `step` collisions.
#[derive(Debug, Clone)]
pub struct EvolutionPoint {
    pub step: usize,
    pub t: f64,
    pub system: DensityMatrix,
    /// Heat records of the ancillas retired in this step; empty at step 0.
    pub heats: Vec<HeatRecord>,
    /// `1 - F` against the bath Gibbs state.
    pub infidelity: f64,
    /// `None` if the system state has coherences.
    pub effective: Option<EffectiveTemperature>,
}

/// Stroboscopic evolution of the system from `rho0_s` for `n_steps`
/// collisions. Memories start in fresh bath states. The returned series has
/// `n_steps + 1` points, the first being the initial state.
pub fn evolve(cfg: &ModelConfig, rho0_s: &DensityMatrix, n_steps: usize) -> Result<Vec<EvolutionPoint>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    check_system(rho0_s)?;
    let collider = Collider::new(cfg)?;
    let gibbs = gibbs_qubit(cfg.beta, cfg.omega)?;
    let register = rho0_s.register().clone();
    let nc = collider.compound_qubits();
    let baths = BathId::for_setting(cfg.setting);

    let point = |step: usize, system: ComplexMatrix, heats: Vec<HeatRecord>| -> Result<EvolutionPoint> {
        let system = DensityMatrix::from_parts(register.clone(), system);
        Ok(EvolutionPoint {
            step,
            t: step as f64 * cfg.dt,
            infidelity: 1.0 - fidelity(&system, &gibbs)?,
            effective: effective_temperature(&system, cfg.omega).ok(),
            system,
            heats,
        })
    };

    let mut compound = collider.initial_compound(rho0_s.matrix());
    let mut pending_in = vec![0.0; collider.n_baths];
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(point(0, rho0_s.matrix().clone(), Vec::new())?);
    for step in 1..=n_steps {
        let out = collider.step(&compound);
        let heats = baths
            .iter()
            .enumerate()
            .map(|(i, &bath)| HeatRecord {
                bath,
                q_sa: out.q_sa[i],
                q_intra_in: pending_in[i],
                q_intra_out: out.q_intra_out[i],
                q_lifecycle: pending_in[i] + out.q_sa[i] + out.q_intra_out[i],
            })
            .collect();
        pending_in = out.successor_in;
        compound = out.next;
        series.push(point(step, partial_trace_positions(&compound, nc, &[0])?, heats)?);
    }
    Ok(series)
}

/// Steady-state quantities of one configuration.
#[derive(Debug, Clone)]
pub struct SteadySummary {
    pub config: ModelConfig,
    /// Fixed point on the system-memory compound.
    pub compound: DensityMatrix,
    pub system: DensityMatrix,
    pub effective: EffectiveTemperature,
    pub delta_beta: f64,
    /// System-ancilla heat per unit time, per bath.
    pub heat_flux: Vec<f64>,
    /// Whole-life ancilla heat per unit time, per bath.
    pub lifecycle_flux: Vec<f64>,
}

pub fn steady_summary(cfg: &ModelConfig) -> Result<SteadySummary> {
    let channel = embedded_step_channel(cfg)?;
    let compound = steady_state(&channel)?;
    let collider = &channel.collider;
    let out = collider.step(compound.matrix());
    let heat_flux = out.q_sa.iter().map(|q| q / cfg.dt).collect();
    let lifecycle_flux = (0..collider.n_baths)
        .map(|i| (out.successor_in[i] + out.q_sa[i] + out.q_intra_out[i]) / cfg.dt)
        .collect();
    let system = compound.partial_trace(&["S"])?;
    let effective = effective_temperature(&system, cfg.omega)?;
    Ok(SteadySummary {
        config: *cfg,
        delta_beta: effective.delta_beta(cfg.beta),
        compound,
        system,
        effective,
        heat_flux,
        lifecycle_flux,
    })
}

/// Steady-state heat flux into the ancillas across the system collision,
/// one entry per bath (bath 0 first).
pub fn steady_heat_flux(cfg: &ModelConfig) -> Result<Vec<f64>> {
    Ok(steady_summary(cfg)?.heat_flux)
}
