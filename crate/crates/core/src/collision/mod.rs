//! Collision unitaries, stroboscopic evolution and steady states.
//!
//! Two microscopic models are supported. Setting I couples the system to a
//! single bath of thermal ancillas through a partial SWAP. Setting II couples
//! it simultaneously to a ground-state bath (bath 0) and an excited-state
//! bath (bath 1), with the bath temperature carried by the couplings.
//! Intra-bath collisions of angle `delta` make the dynamics non-Markovian;
//! they are handled through a memory embedding in which the ancilla that
//! last met the system is kept as a memory qubit.

pub(crate) mod engine;

pub use engine::{
    embedded_step_channel, evolve, markovian_step, power_iteration_fixed_point, steady_heat_flux, steady_state,
    steady_summary, BathId, EvolutionPoint, HeatRecord, StepChannel, SteadySummary,
};

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::metrics::ThermalParams;
use crate::tensor::{
    embed, expm_i_hermitian, identity, kron, pauli_x, pauli_y, pauli_z, swap_gate, ComplexMatrix, HermitianOp,
    QubitRegister, UnitaryOp, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    /// Single bath of thermal ancillas.
    I,
    /// Ground-state and excited-state baths with temperature-encoding couplings.
    II,
}

impl Setting {
    pub fn n_baths(self) -> usize {
        match self {
            Setting::I => 1,
            Setting::II => 2,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::I => "I",
            Setting::II => "II",
        })
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Setting::I),
            "II" | "ii" | "2" => Ok(Setting::II),
            other => Err(Error::InvalidParameter(format!("unknown setting {other:?}"))),
        }
    }
}

/// Physical parameters of a collision model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Qubit gap, shared by system and ancillas.
    pub omega: f64,
    /// Dissipation rate Γ.
    pub gamma: f64,
    /// Bath inverse temperature; `f64::INFINITY` for zero temperature.
    pub beta: f64,
    /// Collision duration Δt.
    pub dt: f64,
    /// Intra-bath partial-SWAP angle in radians, `0 <= delta < π/2`.
    pub delta: f64,
    pub setting: Setting,
}

impl ModelConfig {
    /// Configuration with `ω = Γ = 1`.
    pub fn new(setting: Setting, beta: f64, dt: f64, delta: f64) -> Self {
        Self { omega: 1.0, gamma: 1.0, beta, dt, delta, setting }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        check_delta(self.delta)?;
        ThermalParams::new(self.beta, self.omega)?;
        Ok(())
    }

    pub fn thermal(&self) -> Result<ThermalParams> {
        ThermalParams::new(self.beta, self.omega)
    }

    pub fn is_markovian(&self) -> bool {
        self.delta == 0.0
    }

    /// Setting I coupling `J = sqrt(Γ (2 nbar + 1) / Δt)`.
    pub fn coupling(&self) -> Result<f64> {
        let n = self.thermal()?.nbar;
        Ok((self.gamma * (2.0 * n + 1.0) / self.dt).sqrt())
    }

    /// Setting II couplings `(J0, J1) = (sqrt(Γ (nbar + 1) / Δt), sqrt(Γ nbar / Δt))`.
    pub fn two_bath_couplings(&self) -> Result<(f64, f64)> {
        let n = self.thermal()?.nbar;
        Ok(((self.gamma * (n + 1.0) / self.dt).sqrt(), (self.gamma * n / self.dt).sqrt()))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..FRAC_PI_2).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, pi/2), got {delta}")));
    }
    Ok(())
}

fn pair_labels(pair: [&str; 2]) -> Result<[&str; 2]> {
    if pair[0] == pair[1] {
        return Err(Error::InvalidSubsystem(format!("pair needs two distinct labels, got {}", pair[0])));
    }
    Ok(pair)
}

/// Two-qubit exchange Hamiltonian `-(J/2)(σx⊗σx + σy⊗σy + σz⊗σz)`.
pub fn heisenberg_matrix(j: f64) -> ComplexMatrix {
    (kron(&pauli_x(), &pauli_x()) + kron(&pauli_y(), &pauli_y()) + kron(&pauli_z(), &pauli_z())).scale(-0.5 * j)
}

/// `cos θ · 1 - i sin θ · W` on two qubits.
pub fn partial_swap_matrix(theta: f64) -> ComplexMatrix {
    identity(4).scale(theta.cos()) + swap_gate() * C64::new(0.0, -theta.sin())
}

/// Exchange interaction of strength `j` on `pair`, lifted into `register`.
pub fn heisenberg_interaction(j: f64, pair: [&str; 2], register: &QubitRegister) -> Result<HermitianOp> {
    let pair = pair_labels(pair)?;
    HermitianOp::new(register.clone(), embed(&heisenberg_matrix(j), &pair, register)?)
}

/// Partial SWAP of angle `theta` on `pair`, lifted into `register`.
pub fn partial_swap(theta: f64, pair: [&str; 2], register: &QubitRegister) -> Result<UnitaryOp> {
    let pair = pair_labels(pair)?;
    UnitaryOp::new(register.clone(), embed(&partial_swap_matrix(theta), &pair, register)?)
}

/// Intra-bath collision between consecutive ancillas.
pub fn intra_bath_unitary(delta: f64, pair: [&str; 2], register: &QubitRegister) -> Result<UnitaryOp> {
    check_delta(delta)?;
    partial_swap(delta, pair, register)
}

/// Setting II collision `exp(-i (H⁽⁰⁾ + H⁽¹⁾) Δt)` with `H⁽ⁱ⁾` the exchange
/// interaction between the system and the bath-`i` ancilla.
///
/// `labels` names the system, bath-0 ancilla and bath-1 ancilla in `register`.
pub fn setting2_unitary(cfg: &ModelConfig, register: &QubitRegister, labels: [&str; 3]) -> Result<UnitaryOp> {
    if cfg.setting != Setting::II {
        return Err(Error::InvalidParameter("setting2_unitary needs a setting II configuration".into()));
    }
    cfg.validate()?;
    let (j0, j1) = cfg.two_bath_couplings()?;
    let [s, a0, a1] = labels;
    let h = heisenberg_interaction(j0, [s, a0], register)?.into_matrix()
        + heisenberg_interaction(j1, [s, a1], register)?.into_matrix();
    expm_i_hermitian(&HermitianOp::new(register.clone(), h)?, cfg.dt)
}

/// Free Hamiltonian `Σ (ω/2) σz` over every qubit of `register`.
pub fn free_hamiltonian(omega: f64, register: &QubitRegister) -> Result<ComplexMatrix> {
    let mut h = ComplexMatrix::zeros(register.dim(), register.dim());
    for label in register.labels() {
        h += embed(&pauli_z().scale(omega / 2.0), &[label.as_str()], register)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{approx_eq, max_abs_diff, unitarity_error};

    fn reg(labels: &[&str]) -> QubitRegister {
        QubitRegister::new(labels.iter().copied()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(Setting::I, 2.0, 0.01, 0.0).validate().is_ok());
        assert!(ModelConfig::new(Setting::I, 2.0, 0.0, 0.0).validate().is_err());
        assert!(ModelConfig::new(Setting::I, 2.0, 0.01, FRAC_PI_2).validate().is_err());
        assert!(ModelConfig::new(Setting::I, 2.0, 0.01, -0.1).validate().is_err());
        let mut c = ModelConfig::new(Setting::II, 2.0, 0.01, 0.0);
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        assert_eq!("II".parse::<Setting>().unwrap(), Setting::II);
        assert!("III".parse::<Setting>().is_err());
    }

    #[test]
    fn couplings() {
        let c = ModelConfig::new(Setting::II, 1.0, 0.01, 0.0);
        let n = 1.0 / (1f64.exp() - 1.0);
        let (j0, j1) = c.two_bath_couplings().unwrap();
        assert!((j0 - ((n + 1.0) / 0.01).sqrt()).abs() < 1e-12);
        assert!((j1 - (n / 0.01).sqrt()).abs() < 1e-12);
        assert!((c.coupling().unwrap() - ((2.0 * n + 1.0) / 0.01).sqrt()).abs() < 1e-12);
        // J0² - J1² = Γ/Δt and J0² + J1² = J².
        assert!((j0 * j0 - j1 * j1 - 100.0).abs() < 1e-9);
        assert!((j0 * j0 + j1 * j1 - c.coupling().unwrap().powi(2)).abs() < 1e-9);
        let cold = ModelConfig::new(Setting::II, f64::INFINITY, 0.01, 0.0);
        assert_eq!(cold.two_bath_couplings().unwrap().1, 0.0);
    }

    #[test]
    fn heisenberg_examples() {
        let r = reg(&["S", "A"]);
        let zero = heisenberg_interaction(0.0, ["S", "A"], &r).unwrap();
        assert!(approx_eq(zero.matrix(), &ComplexMatrix::zeros(4, 4), 0.0));
        let h = heisenberg_interaction(1.0, ["S", "A"], &r).unwrap();
        let ev = crate::tensor::eigvalsh(h.matrix());
        for (a, b) in ev.iter().zip([-0.5, -0.5, -0.5, 1.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        let hf = free_hamiltonian(1.0, &r).unwrap();
        let comm = h.matrix() * &hf - &hf * h.matrix();
        assert!(approx_eq(&comm, &ComplexMatrix::zeros(4, 4), 1e-12));
        assert!(heisenberg_interaction(1.0, ["S", "S"], &r).is_err());
        assert!(heisenberg_interaction(1.0, ["S", "X"], &r).is_err());
    }

    #[test]
    fn partial_swap_examples() {
        let r = reg(&["S", "A"]);
        assert!(approx_eq(partial_swap(0.0, ["S", "A"], &r).unwrap().matrix(), &identity(4), 0.0));
        let full = partial_swap(FRAC_PI_2, ["S", "A"], &r).unwrap();
        let expect = swap_gate() * C64::new(0.0, -1.0);
        assert!(approx_eq(full.matrix(), &expect, 1e-15));
    }

    /// The exchange Hamiltonian is `-J (W - 1/2)`, so its propagator is
    /// `e^{-iJt/2} (cos Jt + i sin Jt W)`: a partial SWAP of angle `-Jt`.
    #[test]
    fn exchange_propagator_is_a_partial_swap() {
        let r = reg(&["S", "A"]);
        for &(j, t) in &[(1.0, 0.3), (12.5, 0.01), (3.0, 1.7)] {
            let h = heisenberg_interaction(j, ["S", "A"], &r).unwrap();
            let u = expm_i_hermitian(&h, t).unwrap();
            let phase = C64::from_polar(1.0, -j * t / 2.0);
            let ps = partial_swap(-j * t, ["S", "A"], &r).unwrap();
            assert!(max_abs_diff(u.matrix(), &(ps.matrix() * phase)) < 1e-12);
        }
    }

    #[test]
    fn setting2_examples() {
        let r = reg(&["S", "A0", "A1"]);
        let cfg = ModelConfig::new(Setting::II, 2.0, 0.01, 0.0);
        let u = setting2_unitary(&cfg, &r, ["S", "A0", "A1"]).unwrap();
        assert!(unitarity_error(u.matrix()) < 1e-10);

        let cold = ModelConfig::new(Setting::II, f64::INFINITY, 0.01, 0.0);
        let u = setting2_unitary(&cold, &r, ["S", "A0", "A1"]).unwrap();
        let j = cold.two_bath_couplings().unwrap().0;
        let r2 = reg(&["S", "A0"]);
        let single = expm_i_hermitian(&heisenberg_interaction(j, ["S", "A0"], &r2).unwrap(), 0.01).unwrap();
        assert!(approx_eq(u.matrix(), &kron(single.matrix(), &identity(2)), 1e-12));

        let tiny = ModelConfig::new(Setting::II, 2.0, 1e-14, 0.0);
        let u = setting2_unitary(&tiny, &r, ["S", "A0", "A1"]).unwrap();
        assert!(approx_eq(u.matrix(), &identity(8), 1e-6));

        let wrong = ModelConfig::new(Setting::I, 2.0, 0.01, 0.0);
        assert!(setting2_unitary(&wrong, &r, ["S", "A0", "A1"]).is_err());
    }

    #[test]
    fn setting2_conserves_energy() {
        let r = reg(&["S", "A0", "A1"]);
        let cfg = ModelConfig::new(Setting::II, 0.5, 0.2, 0.0);
        let (j0, j1) = cfg.two_bath_couplings().unwrap();
        let h = heisenberg_interaction(j0, ["S", "A0"], &r).unwrap().into_matrix()
            + heisenberg_interaction(j1, ["S", "A1"], &r).unwrap().into_matrix();
        let hf = free_hamiltonian(1.0, &r).unwrap();
        assert!(approx_eq(&(&h * &hf - &hf * &h), &ComplexMatrix::zeros(8, 8), 1e-12));
    }

    #[test]
    fn intra_bath_examples() {
        let r = reg(&["M", "F"]);
        assert!(approx_eq(intra_bath_unitary(0.0, ["M", "F"], &r).unwrap().matrix(), &identity(4), 0.0));
        let near = intra_bath_unitary(FRAC_PI_2 - 1e-9, ["M", "F"], &r).unwrap();
        assert!(approx_eq(near.matrix(), &(swap_gate() * C64::new(0.0, -1.0)), 1e-8));
        let d = 0.7;
        let fwd = intra_bath_unitary(d, ["M", "F"], &r).unwrap();
        let back = partial_swap(-d, ["M", "F"], &r).unwrap();
        assert!(approx_eq(&(fwd.matrix() * back.matrix()), &identity(4), 1e-14));
        assert!(intra_bath_unitary(FRAC_PI_2, ["M", "F"], &r).is_err());
    }
}
