//! Dense complex linear algebra over small qubit registers.
//!
//! Tensor-factor order is fixed: the leftmost label of a [`QubitRegister`]
//! is the most significant bit of a basis index. Every routine here that
//! takes qubit positions honours that convention.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Entrywise comparison tolerance.
pub const ENTRY_TOL: f64 = 1e-12;
/// Tolerance for structural invariants (trace, positivity, unitarity).
pub const STRUCT_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Two-qubit SWAP.
pub fn swap_gate() -> ComplexMatrix {
    let mut w = ComplexMatrix::zeros(4, 4);
    w[(0, 0)] = ONE;
    w[(1, 2)] = ONE;
    w[(2, 1)] = ONE;
    w[(3, 3)] = ONE;
    w
}

/// Largest entrywise modulus of `a - b`. Infinite if the shapes differ.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn approx_eq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    max_abs_diff(a, b) <= tol
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Largest entrywise deviation of `U U†` from the identity.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    max_abs_diff(&(u * u.adjoint()), &identity(u.nrows()))
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Ordered list of qubit labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QubitRegister {
    labels: Vec<String>,
}

impl QubitRegister {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidSubsystem("empty register".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidSubsystem(format!("duplicate label {l}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidSubsystem(format!("unknown label {label}")))
    }

    /// Positions of `labels`, in the order given. Rejects duplicates.
    pub fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l)?;
            if out.contains(&p) {
                return Err(Error::InvalidSubsystem(format!("label {l} repeated")));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Register made of the given positions, kept in this register's order.
    fn select(&self, positions: &[usize]) -> QubitRegister {
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        QubitRegister {
            labels: sorted.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &QubitRegister) -> Result<QubitRegister> {
        QubitRegister::new(self.labels.iter().chain(other.labels.iter()).cloned())
    }
}

/// Basis-index bookkeeping for an operator acting on a subset of qubits.
///
/// `table[rest][sub]` is the full index whose bits on the target positions
/// spell `sub` (first target = most significant) and whose remaining bits
/// spell `rest`.
#[derive(Debug, Clone)]
pub struct LocalIndex {
    table: Vec<Vec<usize>>,
    sub_dim: usize,
}

impl LocalIndex {
    pub fn new(on: &[usize], n: usize) -> Result<Self> {
        if on.is_empty() || on.len() > n {
            return Err(Error::InvalidSubsystem(format!(
                "{} target qubits in a {n}-qubit register",
                on.len()
            )));
        }
        for (i, &p) in on.iter().enumerate() {
            if p >= n || on[..i].contains(&p) {
                return Err(Error::InvalidSubsystem(format!("bad qubit position {p}")));
            }
        }
        let rest: Vec<usize> = (0..n).filter(|p| !on.contains(p)).collect();
        let k = on.len();
        let sub_dim = 1 << k;
        let rest_dim = 1 << rest.len();
        let mut table = vec![vec![0usize; sub_dim]; rest_dim];
        for (r, row) in table.iter_mut().enumerate() {
            for (s, slot) in row.iter_mut().enumerate() {
                let mut idx = 0usize;
                for (j, &p) in on.iter().enumerate() {
                    idx |= ((s >> (k - 1 - j)) & 1) << (n - 1 - p);
                }
                for (j, &p) in rest.iter().enumerate() {
                    idx |= ((r >> (rest.len() - 1 - j)) & 1) << (n - 1 - p);
                }
                *slot = idx;
            }
        }
        Ok(Self { table, sub_dim })
    }

    /// `E · m` where `E` is `op` lifted onto the target qubits.
    pub fn apply_left(&self, op: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
        let mut buf = vec![ZERO; self.sub_dim];
        for c in 0..m.ncols() {
            for row in &self.table {
                for (s, &idx) in row.iter().enumerate() {
                    buf[s] = m[(idx, c)];
                }
                for (s_out, &idx) in row.iter().enumerate() {
                    let mut acc = ZERO;
                    for (s, v) in buf.iter().enumerate() {
                        acc += op[(s_out, s)] * v;
                    }
                    out[(idx, c)] = acc;
                }
            }
        }
        out
    }

    /// `E m E†` for the lifted operator `E`.
    pub fn conjugate(&self, op: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
        let left = self.apply_left(op, m);
        self.apply_left(op, &left.adjoint()).adjoint()
    }
}

/// Lifts `op` onto the `on` qubits of an `n`-qubit space.
pub fn embed_positions(op: &ComplexMatrix, on: &[usize], n: usize) -> Result<ComplexMatrix> {
    let expected = 1usize << on.len();
    if op.nrows() != expected || op.ncols() != expected {
        return Err(Error::DimensionMismatch { expected, found: op.nrows() });
    }
    let index = LocalIndex::new(on, n)?;
    let dim = 1usize << n;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for row in &index.table {
        for (a, &i) in row.iter().enumerate() {
            for (b, &j) in row.iter().enumerate() {
                out[(i, j)] = op[(a, b)];
            }
        }
    }
    Ok(out)
}

/// Lifts `op` acting on the labels `on` into the full `register`.
pub fn embed(op: &ComplexMatrix, on: &[&str], register: &QubitRegister) -> Result<ComplexMatrix> {
    let positions = register.positions(on)?;
    embed_positions(op, &positions, register.len())
}

/// Partial trace keeping the qubits at `keep` (result in register order).
pub fn partial_trace_positions(m: &ComplexMatrix, n: usize, keep: &[usize]) -> Result<ComplexMatrix> {
    let dim = 1usize << n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Ok(ComplexMatrix::from_element(1, 1, m.trace()));
    }
    let index = LocalIndex::new(&keep, n)?;
    let kd = index.sub_dim;
    let mut out = ComplexMatrix::zeros(kd, kd);
    for row in &index.table {
        for a in 0..kd {
            for b in 0..kd {
                out[(a, b)] += m[(row[a], row[b])];
            }
        }
    }
    Ok(out)
}

/// Partial transpose on the qubits at `part`.
pub fn partial_transpose_positions(m: &ComplexMatrix, n: usize, part: &[usize]) -> Result<ComplexMatrix> {
    let dim = 1usize << n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    let mut mask = 0usize;
    for &p in part {
        if p >= n {
            return Err(Error::InvalidSubsystem(format!("bad qubit position {p}")));
        }
        mask |= 1 << (n - 1 - p);
    }
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        let swapped = (i ^ j) & mask;
        m[(i ^ swapped, j ^ swapped)]
    }))
}

/// Eigendecomposition of a matrix assumed Hermitian. Eigenvalues ascending,
/// eigenvectors as matching columns.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Ascending eigenvalues of a matrix assumed Hermitian.
pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let (values, v) = eigh(m);
    let mut scaled = v.clone();
    for (j, &lam) in values.iter().enumerate() {
        let fj = f(lam);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * v.adjoint()
}

/// Hermitian operator on a register.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp {
    register: QubitRegister,
    matrix: ComplexMatrix,
}

impl HermitianOp {
    pub fn new(register: QubitRegister, matrix: ComplexMatrix) -> Result<Self> {
        check_dim(&register, &matrix)?;
        let err = hermiticity_error(&matrix);
        if err > ENTRY_TOL {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { register, matrix })
    }

    pub fn register(&self) -> &QubitRegister {
        &self.register
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Unitary operator on a register.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    register: QubitRegister,
    matrix: ComplexMatrix,
}

impl UnitaryOp {
    pub fn new(register: QubitRegister, matrix: ComplexMatrix) -> Result<Self> {
        check_dim(&register, &matrix)?;
        let err = unitarity_error(&matrix);
        if err > STRUCT_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { register, matrix })
    }

    pub fn register(&self) -> &QubitRegister {
        &self.register
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn compose(&self, other: &UnitaryOp) -> Result<UnitaryOp> {
        if self.register != other.register {
            return Err(Error::InvalidSubsystem("composing operators on different registers".into()));
        }
        UnitaryOp::new(self.register.clone(), &self.matrix * &other.matrix)
    }
}

fn check_dim(register: &QubitRegister, m: &ComplexMatrix) -> Result<()> {
    let d = register.dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
pub fn eig_hermitian(h: &HermitianOp) -> (Vec<f64>, ComplexMatrix) {
    eigh(&h.matrix)
}

/// `exp(-i h t)` computed from the spectral decomposition of `h`.
pub fn expm_i_hermitian(h: &HermitianOp, t: f64) -> Result<UnitaryOp> {
    let u = hermitian_function(&h.matrix, |lam| C64::from_polar(1.0, -lam * t));
    UnitaryOp::new(h.register.clone(), u)
}

/// Positive semidefinite, unit-trace operator on a register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    register: QubitRegister,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(register: QubitRegister, matrix: ComplexMatrix) -> Result<Self> {
        check_dim(&register, &matrix)?;
        let herm = hermiticity_error(&matrix);
        if herm > STRUCT_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > STRUCT_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = eigvalsh(&matrix)[0];
        if min < -STRUCT_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { register, matrix })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_parts(register: QubitRegister, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(register.dim(), matrix.nrows());
        Self { register, matrix }
    }

    /// Pure state `|ψ⟩⟨ψ|`, normalising `psi`.
    pub fn pure(register: QubitRegister, psi: &[C64]) -> Result<Self> {
        let d = register.dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: psi.len() });
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(d, psi.iter().map(|c| c / norm));
        Ok(Self::from_parts(register, &v * v.adjoint()))
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(register: QubitRegister, populations: &[f64]) -> Result<Self> {
        let d = register.dim();
        if populations.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: populations.len() });
        }
        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            populations.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(register, m)
    }

    pub fn maximally_mixed(register: QubitRegister) -> Self {
        let d = register.dim();
        Self::from_parts(register, identity(d).scale(1.0 / d as f64))
    }

    pub fn register(&self) -> &QubitRegister {
        &self.register
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn relabel<I, S>(self, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let register = QubitRegister::new(labels)?;
        if register.len() != self.register.len() {
            return Err(Error::DimensionMismatch { expected: self.register.len(), found: register.len() });
        }
        Ok(Self { register, matrix: self.matrix })
    }

    /// `self ⊗ other` on the concatenated register.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self::from_parts(self.register.concat(&other.register)?, kron(&self.matrix, &other.matrix)))
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        partial_trace(self, keep)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigvalsh(&self.matrix)[0]
    }
}

/// Reduced state on `keep`; the result keeps the original label order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("nothing to keep".into()));
    }
    let positions = rho.register.positions(keep)?;
    let reduced = partial_trace_positions(&rho.matrix, rho.register.len(), &positions)?;
    Ok(DensityMatrix::from_parts(rho.register.select(&positions), reduced))
}

/// Partial transpose of `rho` on the labels in `part`.
pub fn partial_transpose(rho: &DensityMatrix, part: &[&str]) -> Result<ComplexMatrix> {
    if part.is_empty() || part.len() >= rho.register.len() {
        return Err(Error::InvalidSubsystem("partial transpose needs a nonempty proper subset".into()));
    }
    let positions = rho.register.positions(part)?;
    partial_transpose_positions(&rho.matrix, rho.register.len(), &positions)
}

/// Row-major vectorisation: `vec(m)[i * d + j] = m[i, j]`.
pub fn vectorize(m: &ComplexMatrix) -> nalgebra::DVector<C64> {
    let d = m.nrows();
    nalgebra::DVector::from_fn(d * m.ncols(), |k, _| m[(k / d, k % d)])
}

pub fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| v[i * d + j])
}
