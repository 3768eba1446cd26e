//! Fourth-order Runge-Kutta integration of a single-qubit GKSL master
//! equation, used as a reference for the collision models at small `dt`.

use crate::error::{Error, Result};
use crate::metrics::ThermalParams;
use crate::tensor::{kron, unvectorize, vectorize, ComplexMatrix, DensityMatrix, HermitianOp, QubitRegister, C64};

const RENORMALISE_ABOVE: f64 = 1e-12;
const UNSTABLE_ABOVE: f64 = 1e-6;

/// `σ⁻ = |ground⟩⟨excited|`.
pub fn sigma_minus() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(1, 0)] = C64::new(1.0, 0.0);
    m
}

/// `σ⁺ = |excited⟩⟨ground|`.
pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// Hamiltonian plus weighted jump operators.
#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub h_sys: HermitianOp,
    pub jumps: Vec<(ComplexMatrix, f64)>,
}

impl LindbladSpec {
    pub fn new(h_sys: HermitianOp, jumps: Vec<(ComplexMatrix, f64)>) -> Result<Self> {
        let d = h_sys.register().dim();
        for (op, rate) in &jumps {
            if !(rate.is_finite() && *rate >= 0.0) {
                return Err(Error::InvalidParameter(format!("jump rate must be finite and nonnegative, got {rate}")));
            }
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: op.nrows() });
            }
        }
        Ok(Self { h_sys, jumps })
    }

    /// Thermalising qubit: decay at `Γ(N̄+1)`, absorption at `ΓN̄`. With
    /// `with_hamiltonian` false the generator is purely dissipative.
    pub fn thermal_qubit(beta: f64, omega: f64, gamma: f64, with_hamiltonian: bool) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let nb = ThermalParams::new(beta, omega)?.nbar;
        let register = QubitRegister::new(["S"])?;
        let h = if with_hamiltonian {
            crate::tensor::pauli_z().scale(0.5 * omega)
        } else {
            ComplexMatrix::zeros(2, 2)
        };
        Self::new(
            HermitianOp::new(register, h)?,
            vec![(sigma_minus(), gamma * (nb + 1.0)), (sigma_plus(), gamma * nb)],
        )
    }

    fn dim(&self) -> usize {
        self.h_sys.register().dim()
    }

    /// Generator acting on row-major vectorised matrices.
    pub fn liouvillian(&self) -> ComplexMatrix {
        let d = self.dim();
        let id = ComplexMatrix::identity(d, d);
        let h = self.h_sys.matrix();
        let i = C64::new(0.0, 1.0);
        // vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ) for row-major vec.
        let mut l = (kron(h, &id) - kron(&id, &h.transpose())) * (-i);
        for (op, rate) in &self.jumps {
            let ldl = op.adjoint() * op;
            let term = kron(op, &op.conjugate()) - (kron(&ldl, &id) + kron(&id, &ldl.transpose())) * C64::new(0.5, 0.0);
            l += term * C64::new(*rate, 0.0);
        }
        l
    }
}

/// `L ρ L† − ½{L†L, ρ}`.
pub fn dissipator(l: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if l.nrows() != rho.nrows() || l.ncols() != rho.ncols() || !l.is_square() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: l.nrows() });
    }
    let ldl = l.adjoint() * l;
    Ok(l * rho * l.adjoint() - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0))
}

/// One point of an integrated trajectory.
#[derive(Debug, Clone)]
pub struct LindbladPoint {
    pub t: f64,
    pub state: DensityMatrix,
}

/// Integrates from `rho0` up to `t_final` with fixed step `h_step`; the last
/// step is shortened to land on `t_final`. Returns the initial point and one
/// point per step.
pub fn integrate(spec: &LindbladSpec, rho0: &DensityMatrix, t_final: f64, h_step: f64) -> Result<Vec<LindbladPoint>> {
    if !(h_step.is_finite() && h_step > 0.0) {
        return Err(Error::InvalidParameter(format!("h_step must be positive, got {h_step}")));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be nonnegative, got {t_final}")));
    }
    let d = spec.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    let gen = spec.liouvillian();
    let n_steps = ((t_final / h_step) - 1e-9).ceil().max(0.0) as usize;
    let mut v = vectorize(rho0.matrix());
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(LindbladPoint { t: 0.0, state: rho0.clone() });
    let register = rho0.register().clone();
    for k in 1..=n_steps {
        let t_prev = (k - 1) as f64 * h_step;
        let t = if k == n_steps { t_final } else { k as f64 * h_step };
        let h = C64::new(t - t_prev, 0.0);
        let k1 = &gen * &v;
        let k2 = &gen * (&v + &k1 * (h * 0.5));
        let k3 = &gen * (&v + &k2 * (h * 0.5));
        let k4 = &gen * (&v + &k3 * h);
        v += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (h / 6.0);

        let mut m = unvectorize(&v, d);
        let tr = m.trace();
        let drift = (tr - C64::new(1.0, 0.0)).norm();
        // No entry of a density matrix exceeds 1 in magnitude.
        let excess = m.iter().map(|c| c.norm()).fold(0.0, f64::max) - 1.0;
        if !(drift.is_finite() && excess.is_finite()) || drift.max(excess) > UNSTABLE_ABOVE {
            return Err(Error::IntegrationUnstable { t, drift: drift.max(excess) });
        }
        if drift > RENORMALISE_ABOVE {
            log::debug!("renormalising trace at t = {t} (drift {drift:e})");
            m /= tr;
            v = vectorize(&m);
        }
        out.push(LindbladPoint { t, state: DensityMatrix::from_parts(register.clone(), m) });
    }
    Ok(out)
}

/// Closed-form excited population under the thermal qubit generator.
pub fn analytic_excited_population(p0: f64, beta: f64, omega: f64, gamma: f64, t: f64) -> Result<f64> {
    let th = ThermalParams::new(beta, omega)?;
    let p_ss = 0.5 * (1.0 - th.g);
    let rate = gamma * (2.0 * th.nbar + 1.0);
    Ok(p_ss + (p0 - p_ss) * (-rate * t).exp())
}
