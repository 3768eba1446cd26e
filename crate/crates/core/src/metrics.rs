//! Qubit thermal states and scalar diagnostics.
//!
//! Single-qubit matrices use the ordering (excited, ground): index 0 is the
//! `+1` eigenvector of σz under `H = (ω/2) σz`. The "|0⟩ bath" of the
//! two-bath model is therefore the ground-state bath, index 1.

use crate::error::{Error, Result};
use crate::tensor::{
    eigvalsh, hermitian_function, partial_transpose_positions, ComplexMatrix, DensityMatrix, QubitRegister, C64,
};

/// Basis index of the excited level.
pub const EXCITED: usize = 0;
/// Basis index of the ground level.
pub const GROUND: usize = 1;

const NEG_CLAMP: f64 = 1e-12;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

/// Bose-Einstein occupation `1 / (e^{βω} - 1)`. `β = ∞` gives exactly zero.
pub fn nbar(beta: f64, omega: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    check_positive("omega", omega)?;
    if beta.is_infinite() {
        return Ok(0.0);
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// Thermal parameters of a qubit bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    pub beta: f64,
    pub omega: f64,
    pub nbar: f64,
    /// Population asymmetry `1 / (2 nbar + 1)`.
    pub g: f64,
}

impl ThermalParams {
    pub fn new(beta: f64, omega: f64) -> Result<Self> {
        let nbar = nbar(beta, omega)?;
        Ok(Self { beta, omega, nbar, g: 1.0 / (2.0 * nbar + 1.0) })
    }
}

fn qubit_register() -> QubitRegister {
    QubitRegister::new(["S"]).expect("static label")
}

/// Diagonal qubit state with asymmetry `g = p_ground - p_excited`.
pub fn qubit_from_asymmetry(g: f64) -> DensityMatrix {
    let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new((1.0 - g) / 2.0, 0.0),
        C64::new((1.0 + g) / 2.0, 0.0),
    ]));
    DensityMatrix::from_parts(qubit_register(), m)
}

/// Gibbs state of `(ω/2) σz` at inverse temperature `beta`, labelled `S`.
pub fn gibbs_qubit(beta: f64, omega: f64) -> Result<DensityMatrix> {
    Ok(qubit_from_asymmetry(ThermalParams::new(beta, omega)?.g))
}

pub fn excited_state() -> DensityMatrix {
    qubit_from_asymmetry(-1.0)
}

pub fn ground_state() -> DensityMatrix {
    qubit_from_asymmetry(1.0)
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// PSD square root; eigenvalues below round-off are clamped to zero.
fn sqrt_psd(m: &ComplexMatrix) -> ComplexMatrix {
    hermitian_function(m, |lam| C64::new(if lam < NEG_CLAMP { 0.0 } else { lam.sqrt() }, 0.0))
}

/// Uhlmann fidelity `(Tr √(√σ ρ √σ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    if is_diagonal(rho.matrix()) && is_diagonal(sigma.matrix()) {
        let r = rho.matrix().diagonal();
        let s = sigma.matrix().diagonal();
        let bc: f64 = r.iter().zip(s.iter()).map(|(a, b)| (a.re.max(0.0) * b.re.max(0.0)).sqrt()).sum();
        return Ok((bc * bc).clamp(0.0, 1.0));
    }
    let s = sqrt_psd(sigma.matrix());
    let inner = &s * rho.matrix() * &s;
    let root_trace: f64 = eigvalsh(&inner).iter().map(|&l| if l < NEG_CLAMP { 0.0 } else { l.sqrt() }).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

fn is_diagonal(m: &ComplexMatrix) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Half the trace norm of the difference of two Hermitian matrices.
pub fn trace_norm_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * eigvalsh(&(a - b)).iter().map(|l| l.abs()).sum::<f64>()
}

pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(trace_norm_distance(rho.matrix(), sigma.matrix()))
}

/// Inverse temperature assigned to a diagonal qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTemperature {
    /// `p_ground - p_excited`.
    pub g_e: f64,
    /// Infinite (with the sign of `g_e`) when the state is pure.
    pub beta_e: f64,
    pub valid: bool,
}

impl EffectiveTemperature {
    pub fn from_asymmetry(g_e: f64, omega: f64) -> Self {
        if g_e.abs() >= 1.0 - 1e-12 {
            return Self { g_e, beta_e: f64::INFINITY.copysign(g_e), valid: false };
        }
        Self { g_e, beta_e: ((1.0 + g_e) / (1.0 - g_e)).ln() / omega, valid: true }
    }

    pub fn delta_beta(&self, beta: f64) -> f64 {
        self.beta_e - beta
    }
}

/// Effective temperature of a single-qubit state that is diagonal to 1e-8.
pub fn effective_temperature(rho: &DensityMatrix, omega: f64) -> Result<EffectiveTemperature> {
    check_positive("omega", omega)?;
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.dim() });
    }
    let off = rho.matrix()[(0, 1)].norm();
    if off > 1e-8 {
        return Err(Error::NotDiagonal(off));
    }
    let m = rho.matrix();
    Ok(EffectiveTemperature::from_asymmetry(m[(GROUND, GROUND)].re - m[(EXCITED, EXCITED)].re, omega))
}

/// Fidelity between Gibbs states at `beta` and `beta + delta_beta`, in closed form.
pub fn fidelity_from_delta_beta(beta: f64, delta_beta: f64, omega: f64) -> f64 {
    let num = 1.0 + (0.5 * omega * (delta_beta + 2.0 * beta)).exp();
    num * num / ((1.0 + (omega * beta).exp()) * (1.0 + (omega * (delta_beta + beta)).exp()))
}

/// Partial-transpose eigenvalues above `-NEG_FLOOR` are round-off.
const NEG_FLOOR: f64 = 1e-12;

fn negative_part(l: f64) -> f64 {
    if l < -NEG_FLOOR {
        -l
    } else {
        0.0
    }
}

/// `2 Σ max(0, -λ)` over the spectrum of the partial transpose on `positions`.
pub fn negativity_positions(m: &ComplexMatrix, n: usize, positions: &[usize]) -> Result<f64> {
    let pt = partial_transpose_positions(m, n, positions)?;
    Ok(2.0 * eigvalsh(&pt).iter().map(|&l| negative_part(l)).sum::<f64>())
}

/// Two-qubit negativity `2 max(0, -λ_min)` of the partial transpose.
pub fn negativity_2(rho: &DensityMatrix) -> Result<f64> {
    if rho.register().len() != 2 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    let pt = partial_transpose_positions(rho.matrix(), 2, &[0])?;
    Ok(2.0 * negative_part(eigvalsh(&pt)[0]))
}

/// Negativity of the bipartition `part | rest` of a three-qubit state.
pub fn negativity_bipartition(rho: &DensityMatrix, part: &str) -> Result<f64> {
    if rho.register().len() != 3 {
        return Err(Error::DimensionMismatch { expected: 8, found: rho.dim() });
    }
    let p = rho.register().position(part)?;
    negativity_positions(rho.matrix(), 3, &[p])
}

/// Geometric mean of the three single-qubit bipartition negativities.
pub fn tripartite_negativity(rho: &DensityMatrix) -> Result<f64> {
    if rho.register().len() != 3 {
        return Err(Error::DimensionMismatch { expected: 8, found: rho.dim() });
    }
    let mut product = 1.0;
    for p in 0..3 {
        let n = negativity_positions(rho.matrix(), 3, &[p])?;
        if n <= 0.0 {
            return Ok(0.0);
        }
        product *= n;
    }
    Ok(product.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{identity, QubitRegister};

    fn reg(labels: &[&str]) -> QubitRegister {
        QubitRegister::new(labels.iter().copied()).unwrap()
    }

    fn bell(labels: &[&str]) -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        DensityMatrix::pure(reg(labels), &[C64::new(s, 0.0), z, z, C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn occupations() {
        assert_eq!(nbar(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert!((nbar(1.0, 1.0).unwrap() - 0.581_976_706_869_326_4).abs() < 1e-12);
        assert!((nbar(2.0, 1.0).unwrap() - 0.156_517_642_749_665_5).abs() < 1e-12);
        assert!(matches!(nbar(1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(nbar(-1.0, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn asymmetry_matches_tanh() {
        for &beta in &[0.1, 0.5, 1.0, 2.0, 7.0] {
            let t = ThermalParams::new(beta, 1.3).unwrap();
            assert!((t.g - (beta * 1.3 / 2.0).tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn gibbs_states() {
        let cold = gibbs_qubit(f64::INFINITY, 1.0).unwrap();
        assert_eq!(cold.populations(), vec![0.0, 1.0]);
        let g2 = gibbs_qubit(2.0, 1.0).unwrap();
        let p = g2.populations();
        assert!((p[0] - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!((p[1] - 0.880_797_077_977_882_3).abs() < 1e-12);
        let hot = gibbs_qubit(1e-9, 1.0).unwrap();
        assert!((hot.populations()[0] - 0.5).abs() < 1e-9);
        assert!(gibbs_qubit(1.0, -1.0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let r = gibbs_qubit(0.7, 1.0).unwrap();
        assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&excited_state(), &ground_state()).unwrap().abs() < 1e-12);
        let mixed = qubit_from_asymmetry(0.0);
        assert!((fidelity(&mixed, &excited_state()).unwrap() - 0.5).abs() < 1e-12);
        assert!((fidelity(&excited_state(), &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!(fidelity(&r, &bell(&["A", "B"])).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let r = gibbs_qubit(0.7, 1.0).unwrap();
        assert!(trace_distance(&r, &r).unwrap().abs() < 1e-15);
        assert!((trace_distance(&excited_state(), &ground_state()).unwrap() - 1.0).abs() < 1e-14);
        let a = DensityMatrix::diagonal(reg(&["q"]), &[0.7, 0.3]).unwrap();
        let b = qubit_from_asymmetry(0.0);
        assert!((trace_distance(&a, &b).unwrap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn effective_temperature_examples() {
        for &beta in &[0.5, 1.0, 2.0] {
            let e = effective_temperature(&gibbs_qubit(beta, 1.0).unwrap(), 1.0).unwrap();
            assert!(e.valid);
            assert!((e.beta_e - beta).abs() < 1e-12);
        }
        let mixed = effective_temperature(&qubit_from_asymmetry(0.0), 1.0).unwrap();
        assert_eq!(mixed.g_e, 0.0);
        assert_eq!(mixed.beta_e, 0.0);
        let inverted = DensityMatrix::diagonal(reg(&["q"]), &[0.6, 0.4]).unwrap();
        let e = effective_temperature(&inverted, 1.0).unwrap();
        assert!((e.g_e + 0.2).abs() < 1e-15);
        assert!((e.beta_e - (0.8f64 / 1.2).ln()).abs() < 1e-14);
        assert!(e.beta_e < 0.0);

        let pure = effective_temperature(&ground_state(), 1.0).unwrap();
        assert!(!pure.valid && pure.beta_e == f64::INFINITY);
        let pure = effective_temperature(&excited_state(), 1.0).unwrap();
        assert!(!pure.valid && pure.beta_e == f64::NEG_INFINITY);
    }

    #[test]
    fn effective_temperature_rejects_coherences() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(reg(&["q"]), &[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        assert!(matches!(effective_temperature(&plus, 1.0), Err(Error::NotDiagonal(_))));
    }

    #[test]
    fn fidelity_closed_form_cross_check() {
        assert!((fidelity_from_delta_beta(1.3, 0.0, 1.0) - 1.0).abs() < 1e-14);
        for &(beta, db) in &[(2.0, 1.0), (1.0, -0.5)] {
            let direct = fidelity(&gibbs_qubit(beta, 1.0).unwrap(), &gibbs_qubit(beta + db, 1.0).unwrap()).unwrap();
            assert!((fidelity_from_delta_beta(beta, db, 1.0) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn two_qubit_negativity() {
        let prod = gibbs_qubit(1.0, 1.0).unwrap().tensor(&gibbs_qubit(0.3, 1.0).unwrap().relabel(["B"]).unwrap()).unwrap();
        assert!(negativity_2(&prod).unwrap() < 1e-14);
        assert!((negativity_2(&bell(&["A", "B"])).unwrap() - 1.0).abs() < 1e-12);
        let p = 1.0 / 3.0;
        let werner = bell(&["A", "B"]).matrix().scale(p) + identity(4).scale((1.0 - p) / 4.0);
        let werner = DensityMatrix::new(reg(&["A", "B"]), werner).unwrap();
        assert!(negativity_2(&werner).unwrap() < 1e-12);
        let p = 0.6;
        let werner = bell(&["A", "B"]).matrix().scale(p) + identity(4).scale((1.0 - p) / 4.0);
        let werner = DensityMatrix::new(reg(&["A", "B"]), werner).unwrap();
        assert!((negativity_2(&werner).unwrap() - 2.0 * (3.0 * p - 1.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn three_qubit_negativities() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = vec![C64::new(0.0, 0.0); 8];
        psi[0] = C64::new(s, 0.0);
        psi[7] = C64::new(s, 0.0);
        let ghz = DensityMatrix::pure(reg(&["A", "B", "C"]), &psi).unwrap();
        for l in ["A", "B", "C"] {
            assert!((negativity_bipartition(&ghz, l).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((tripartite_negativity(&ghz).unwrap() - 1.0).abs() < 1e-12);

        let c = gibbs_qubit(0.8, 1.0).unwrap().relabel(["C"]).unwrap();
        let bc = bell(&["A", "B"]).tensor(&c).unwrap();
        assert!(negativity_bipartition(&bc, "C").unwrap() < 1e-12);
        assert!((negativity_bipartition(&bc, "A").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(tripartite_negativity(&bc).unwrap(), 0.0);
        assert!(matches!(negativity_bipartition(&bc, "Z"), Err(Error::InvalidSubsystem(_))));

        let prod = DensityMatrix::maximally_mixed(reg(&["A", "B", "C"]));
        assert_eq!(tripartite_negativity(&prod).unwrap(), 0.0);
        assert!(tripartite_negativity(&bell(&["A", "B"])).is_err());
    }
}
