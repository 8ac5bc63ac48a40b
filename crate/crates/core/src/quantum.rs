//! Dense linear algebra for small multi-qubit systems.
//!
//! Qubit 0 is the most significant bit of an amplitude index: in an
//! `m`-qubit register, qubit `q` lives at bit `m - 1 - q`. For the collision
//! model this puts the system qubit first and bath qubits after it in
//! collision order.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when validating user-supplied states.
pub const TOL_VALIDATE: f64 = 1e-10;
/// Tolerance used for identities that hold exactly in exact arithmetic.
pub const TOL_EXACT: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Pauli matrices and the identity, row-major.
pub mod pauli {
    use super::{C64, I, ONE, ZERO};
    use nalgebra::Matrix2;

    pub const IDENTITY: [[C64; 2]; 2] = [[ONE, ZERO], [ZERO, ONE]];
    pub const SIGMA_X: [[C64; 2]; 2] = [[ZERO, ONE], [ONE, ZERO]];
    pub const SIGMA_Y: [[C64; 2]; 2] = [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]];
    pub const SIGMA_Z: [[C64; 2]; 2] = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];

    pub fn matrix(m: &[[C64; 2]; 2]) -> Matrix2<C64> {
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

/// Kronecker product of two single-qubit operators; `a` acts on the more
/// significant qubit.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r >> 1, c >> 1)] * b[(r & 1, c & 1)])
}

#[inline]
fn bit_of(num_qubits: usize, qubit: usize) -> usize {
    num_qubits - 1 - qubit
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------

/// A 4x4 unitary in the basis order |00>, |01>, |10>, |11>, where the left
/// label is the first target qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitUnitary(Matrix4<C64>);

impl TwoQubitUnitary {
    pub fn new(matrix: Matrix4<C64>) -> Result<Self> {
        let u = Self(matrix);
        let err = u.unitarity_error();
        if err.is_nan() || err > TOL_VALIDATE {
            return Err(Error::InvalidParameter(format!(
                "matrix is not unitary (max |U^dag U - 1| = {err:e})"
            )));
        }
        Ok(u)
    }

    pub(crate) fn from_matrix_unchecked(matrix: Matrix4<C64>) -> Self {
        Self(matrix)
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Exchanges the states of the two target qubits.
    pub fn swap() -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Operator product `self * rhs` (rhs acts first).
    pub fn compose(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn scaled(&self, phase: C64) -> Self {
        Self(self.0 * phase)
    }

    pub fn unitarity_error(&self) -> f64 {
        let p = self.0.adjoint() * self.0 - Matrix4::identity();
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[inline]
    fn apply4(&self, v: [C64; 4]) -> [C64; 4] {
        let m = &self.0;
        std::array::from_fn(|r| m[(r, 0)] * v[0] + m[(r, 1)] * v[1] + m[(r, 2)] * v[2] + m[(r, 3)] * v[3])
    }

    #[inline]
    fn apply4_conj(&self, v: [C64; 4]) -> [C64; 4] {
        let m = &self.0;
        std::array::from_fn(|r| {
            m[(r, 0)].conj() * v[0]
                + m[(r, 1)].conj() * v[1]
                + m[(r, 2)].conj() * v[2]
                + m[(r, 3)].conj() * v[3]
        })
    }
}

/// Index offsets of the four basis states of a target pair, and the list of
/// base indices where both target bits are zero.
fn pair_layout(num_qubits: usize, targets: (usize, usize)) -> Result<([usize; 4], Vec<usize>)> {
    let (a, b) = targets;
    if a == b {
        return Err(Error::InvalidTargets(format!("targets must differ, got ({a}, {b})")));
    }
    if a >= num_qubits || b >= num_qubits {
        return Err(Error::InvalidTargets(format!(
            "targets ({a}, {b}) out of range for {num_qubits} qubits"
        )));
    }
    let ma = 1usize << bit_of(num_qubits, a);
    let mb = 1usize << bit_of(num_qubits, b);
    let offsets = [0, mb, ma, ma | mb];
    let bases = (0..1usize << num_qubits).filter(|i| i & (ma | mb) == 0).collect();
    Ok((offsets, bases))
}

/// Maps a compact index over `qubits` (first listed = most significant) to
/// the corresponding bit pattern in the full register.
fn deposit_table(num_qubits: usize, qubits: &[usize]) -> Vec<usize> {
    let r = qubits.len();
    (0..1usize << r)
        .map(|compact| {
            qubits.iter().enumerate().fold(0usize, |acc, (pos, &q)| {
                if compact >> (r - 1 - pos) & 1 == 1 {
                    acc | 1 << bit_of(num_qubits, q)
                } else {
                    acc
                }
            })
        })
        .collect()
}

fn split_keep(num_qubits: usize, keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("keep set must be nonempty".into()));
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&q) = kept.iter().find(|&&q| q >= num_qubits) {
        return Err(Error::InvalidTargets(format!("qubit {q} out of range for {num_qubits} qubits")));
    }
    let traced = (0..num_qubits).filter(|q| kept.binary_search(q).is_err()).collect();
    Ok((kept, traced))
}

// ---------------------------------------------------------------------------

/// Normalized pure state of `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidState(format!("length {len} is not a power of two >= 2")));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOL_VALIDATE {
            return Err(Error::InvalidState(format!("squared norm {norm} differs from 1")));
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub(crate) fn from_vec_unchecked(amplitudes: Vec<C64>) -> Self {
        debug_assert!(amplitudes.len().is_power_of_two());
        Self { num_qubits: amplitudes.len().trailing_zeros() as usize, amplitudes }
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits >= 1 && index < 1 << num_qubits);
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[index] = ONE;
        Self { num_qubits, amplitudes }
    }

    /// Single qubit `c0|0> + c1|1>`.
    pub fn qubit(c0: C64, c1: C64) -> Result<Self> {
        Self::new(vec![c0, c1])
    }

    /// Tensor product of single-qubit states, first factor on qubit 0.
    pub fn product(factors: &[PureState]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
        Ok(rest.iter().fold(first.clone(), |acc, f| acc.tensor(f)))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        PureState { num_qubits: self.num_qubits + other.num_qubits, amplitudes }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                got: other.amplitudes.len(),
            });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn apply_two_qubit(&mut self, u: &TwoQubitUnitary, targets: (usize, usize)) -> Result<()> {
        let (off, bases) = pair_layout(self.num_qubits, targets)?;
        let amps = &mut self.amplitudes;
        for base in bases {
            let v = off.map(|o| amps[base | o]);
            let w = u.apply4(v);
            for (o, x) in off.iter().zip(w) {
                amps[base | o] = x;
            }
        }
        Ok(())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix { num_qubits: self.num_qubits, data: &v * v.adjoint() }
    }

    /// Reduced density matrix over `keep` (ascending qubit order).
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let (kept, traced) = split_keep(self.num_qubits, keep)?;
        let kp = deposit_table(self.num_qubits, &kept);
        let tp = deposit_table(self.num_qubits, &traced);
        let dim = kp.len();
        let mut data = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let s: C64 = tp
                    .iter()
                    .map(|&t| self.amplitudes[kp[a] | t] * self.amplitudes[kp[b] | t].conj())
                    .sum();
                data[(a, b)] = s;
                data[(b, a)] = s.conj();
            }
        }
        Ok(DensityMatrix { num_qubits: kept.len(), data })
    }

    /// `Tr(rho_b^2)` for the subset of qubits `keep`, computed from whichever
    /// side of the bipartition is smaller.
    pub fn subset_purity(&self, keep: &[usize]) -> Result<f64> {
        let (kept, traced) = split_keep(self.num_qubits, keep)?;
        if traced.is_empty() {
            return Ok(self.norm_sqr() * self.norm_sqr());
        }
        let side = if kept.len() <= traced.len() { kept } else { traced };
        Ok(purity(&self.reduced(&side)?))
    }
}

// ---------------------------------------------------------------------------

/// Density matrix of a multi-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    data: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to [`TOL_VALIDATE`].
    pub fn new(data: DMatrix<C64>) -> Result<Self> {
        let dim = data.nrows();
        if dim != data.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "{}x{} is not a square power-of-two matrix",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm = max_abs_diff(&data, &data.adjoint());
        if herm > TOL_VALIDATE {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = data.trace();
        if (tr - ONE).norm() > TOL_VALIDATE {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let rho = Self { num_qubits: dim.trailing_zeros() as usize, data };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -TOL_VALIDATE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(data: DMatrix<C64>) -> Self {
        Self { num_qubits: data.nrows().trailing_zeros() as usize, data }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let v: Vec<C64> = populations.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)))
    }

    /// `|bit><bit|` on one qubit.
    pub fn projector(bit: usize) -> Self {
        PureState::basis(1, bit).to_density()
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self { num_qubits, data: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits + other.num_qubits,
            data: self.data.kronecker(&other.data),
        }
    }

    /// `rho -> U rho U^dag` with `U` on `targets`.
    pub fn apply_two_qubit(&mut self, u: &TwoQubitUnitary, targets: (usize, usize)) -> Result<()> {
        let (off, bases) = pair_layout(self.num_qubits, targets)?;
        let dim = self.dim();
        // column-major storage: entry (r, c) is at c * dim + r
        let m = self.data.as_mut_slice();
        for column in m.chunks_exact_mut(dim) {
            for &base in &bases {
                let v = off.map(|o| column[base | o]);
                for (o, x) in off.iter().zip(u.apply4(v)) {
                    column[base | o] = x;
                }
            }
        }
        for &base in &bases {
            let cols = off.map(|o| (base | o) * dim);
            for row in 0..dim {
                let v = cols.map(|c| m[c + row]);
                for (c, x) in cols.iter().zip(u.apply4_conj(v)) {
                    m[c + row] = x;
                }
            }
        }
        Ok(())
    }

    /// Reduced state over `keep` (ascending qubit order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let (kept, traced) = split_keep(self.num_qubits, keep)?;
        let kp = deposit_table(self.num_qubits, &kept);
        let tp = deposit_table(self.num_qubits, &traced);
        let dim = kp.len();
        let data = DMatrix::from_fn(dim, dim, |a, b| tp.iter().map(|&t| self.data[(kp[a] | t, kp[b] | t)]).sum());
        Ok(DensityMatrix { num_qubits: kept.len(), data })
    }
}

// ---------------------------------------------------------------------------

/// Either representation of a register state.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn num_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.num_qubits(),
            QuantumState::Mixed(m) => m.num_qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(p) => p.to_density(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }
}

/// Kronecker product; `a` occupies the more significant qubits.
pub fn tensor_product(a: &QuantumState, b: &QuantumState) -> Result<QuantumState> {
    match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => Ok(QuantumState::Pure(x.tensor(y))),
        (QuantumState::Mixed(x), QuantumState::Mixed(y)) => Ok(QuantumState::Mixed(x.tensor(y))),
        _ => Err(Error::KindMismatch),
    }
}

pub fn apply_two_qubit_unitary(
    state: &QuantumState,
    u: &TwoQubitUnitary,
    targets: (usize, usize),
) -> Result<QuantumState> {
    let mut out = state.clone();
    match &mut out {
        QuantumState::Pure(p) => p.apply_two_qubit(u, targets)?,
        QuantumState::Mixed(m) => m.apply_two_qubit(u, targets)?,
    }
    Ok(out)
}

pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<DensityMatrix> {
    match state {
        QuantumState::Pure(p) => p.reduced(keep),
        QuantumState::Mixed(m) => m.partial_trace(keep),
    }
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.data.iter().map(|z| z.norm_sqr()).sum()
}

/// Root fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`.
///
/// Single qubits use the closed form `sqrt(Tr(rho sigma) + 2 sqrt(det rho det sigma))`;
/// larger registers go through a Hermitian eigendecomposition.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: sigma.dim() });
    }
    let f = if rho.dim() == 2 {
        let overlap = (&rho.data * &sigma.data).trace().re;
        let det = |m: &DMatrix<C64>| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re.max(0.0);
        (overlap + 2.0 * (det(&rho.data) * det(&sigma.data)).sqrt()).max(0.0).sqrt()
    } else {
        let eig = rho.data.clone().symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
        let sqrt_rho = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint();
        let inner = &sqrt_rho * &sigma.data * &sqrt_rho;
        let inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
        inner.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
    };
    Ok(f.min(1.0))
}

/// Trace distance between two single-qubit states.
pub fn trace_distance_qubit(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 2 || sigma.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.dim().max(sigma.dim()) });
    }
    let a = (rho.data[(0, 0)] - sigma.data[(0, 0)]).re;
    let k = rho.data[(0, 1)] - sigma.data[(0, 1)];
    Ok((a * a + k.norm_sqr()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_state(n: usize, seed: &[f64]) -> PureState {
        let dim = 1 << n;
        let mut v: Vec<C64> = (0..dim)
            .map(|i| c(seed[(2 * i) % seed.len()] - 0.5 + 0.01 * i as f64, seed[(2 * i + 1) % seed.len()] - 0.5))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        PureState::new(v).unwrap()
    }

    #[test]
    fn pauli_algebra() {
        for m in [pauli::SIGMA_X, pauli::SIGMA_Y, pauli::SIGMA_Z] {
            let m = pauli::matrix(&m);
            assert_eq!(m * m, Matrix2::identity());
            assert_eq!(m.trace(), ZERO);
        }
    }

    #[test]
    fn tensor_of_ground_projectors() {
        let p0 = QuantumState::Mixed(DensityMatrix::projector(0));
        let QuantumState::Mixed(r) = tensor_product(&p0, &p0).unwrap() else { panic!() };
        assert_eq!(r, PureState::basis(2, 0).to_density());
    }

    #[test]
    fn tensor_of_thermal_states_is_diagonal() {
        let p = 0.8;
        let xi = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        let r = xi.tensor(&xi);
        let q = 1.0 - p;
        let expect = DensityMatrix::diagonal(&[p * p, p * q, p * q, q * q]).unwrap();
        assert!(r.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn tensor_embedding_of_pure_qubit() {
        let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let r = psi.tensor(&PureState::basis(1, 0));
        assert_eq!(r.amplitudes(), &[c(0.6, 0.0), ZERO, c(0.0, 0.8), ZERO]);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let a = QuantumState::Pure(PureState::basis(1, 0));
        let b = QuantumState::Mixed(DensityMatrix::projector(0));
        assert_eq!(tensor_product(&a, &b), Err(Error::KindMismatch));
    }

    #[test]
    fn identity_gate_is_a_no_op() {
        let psi = random_state(3, &[0.1, 0.7, 0.3, 0.9, 0.2]);
        let mut out = psi.clone();
        out.apply_two_qubit(&TwoQubitUnitary::identity(), (2, 0)).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn swap_exchanges_qubits() {
        let a = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let b = PureState::qubit(c(0.8, 0.0), c(-0.6, 0.0)).unwrap();
        let mut ab = a.tensor(&b);
        ab.apply_two_qubit(&TwoQubitUnitary::swap(), (0, 1)).unwrap();
        let ba = b.tensor(&a);
        for (x, y) in ab.amplitudes().iter().zip(ba.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn gate_targets_are_validated() {
        let mut psi = PureState::basis(2, 0);
        let u = TwoQubitUnitary::swap();
        assert!(matches!(psi.apply_two_qubit(&u, (1, 1)), Err(Error::InvalidTargets(_))));
        assert!(matches!(psi.apply_two_qubit(&u, (0, 2)), Err(Error::InvalidTargets(_))));
    }

    #[test]
    fn gate_on_nonadjacent_pair_matches_dense_operator() {
        // Qubits (2, 0) of a 3-qubit register, reversed order on purpose.
        let psi = random_state(3, &[0.3, 0.1, 0.4, 0.1, 0.5, 0.9, 0.2, 0.6]);
        let u = TwoQubitUnitary::new(kron2(&pauli::matrix(&pauli::SIGMA_Y), &pauli::matrix(&pauli::SIGMA_X)))
            .unwrap()
            .compose(&TwoQubitUnitary::swap());
        let mut fast = psi.clone();
        fast.apply_two_qubit(&u, (2, 0)).unwrap();
        // Dense: full 8x8 with target order (q2, q0) => index bits (b0, b2).
        let full = DMatrix::from_fn(8, 8, |r, col| {
            let (r2, r1, r0) = (r >> 2 & 1, r >> 1 & 1, r & 1);
            let (c2, c1, c0) = (col >> 2 & 1, col >> 1 & 1, col & 1);
            if r1 != c1 {
                return ZERO;
            }
            // qubit 0 -> bit 2, qubit 2 -> bit 0; u row index = 2*q2 + q0
            u.matrix()[(2 * r0 + r2, 2 * c0 + c2)]
        });
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let dense = full * v;
        for (x, y) in fast.amplitudes().iter().zip(dense.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn density_conjugation_matches_pure_evolution() {
        let psi = random_state(3, &[0.9, 0.2, 0.4, 0.7, 0.1, 0.3]);
        let u = TwoQubitUnitary::new(kron2(&pauli::matrix(&pauli::SIGMA_X), &pauli::matrix(&pauli::SIGMA_Y)))
            .unwrap()
            .compose(&TwoQubitUnitary::swap());
        let mut rho = psi.to_density();
        rho.apply_two_qubit(&u, (1, 2)).unwrap();
        let mut phi = psi;
        phi.apply_two_qubit(&u, (1, 2)).unwrap();
        assert!(rho.max_abs_diff(&phi.to_density()) < 1e-14);
    }

    #[test]
    fn partial_trace_examples() {
        let r = PureState::basis(2, 0).reduced(&[0]).unwrap();
        assert_eq!(r, DensityMatrix::projector(0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(vec![ZERO, c(h, 0.0), c(h, 0.0), ZERO]).unwrap();
        let r = bell.reduced(&[0]).unwrap();
        assert!(r.max_abs_diff(&DensityMatrix::maximally_mixed(1)) < 1e-15);
        let r = bell.to_density().partial_trace(&[0]).unwrap();
        assert!(r.max_abs_diff(&DensityMatrix::maximally_mixed(1)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_empty_keep() {
        let psi = PureState::basis(2, 0);
        assert!(psi.reduced(&[]).is_err());
        assert!(psi.to_density().partial_trace(&[]).is_err());
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&DensityMatrix::projector(1)) - 1.0).abs() < 1e-15);
        assert!((purity(&DensityMatrix::maximally_mixed(1)) - 0.5).abs() < 1e-15);
        let xi = DensityMatrix::diagonal(&[0.8, 0.2]).unwrap();
        assert!((purity(&xi) - 0.68).abs() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let p0 = DensityMatrix::projector(0);
        let p1 = DensityMatrix::projector(1);
        assert!((fidelity(&p0, &p0).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&p0, &p1).unwrap().abs() < 1e-12);
        for p in [0.0, 0.3, 0.8, 1.0] {
            let xi = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
            assert!((fidelity(&p0, &xi).unwrap() - p.sqrt()).abs() < 1e-12);
        }
        let two = DensityMatrix::maximally_mixed(2);
        assert!(matches!(fidelity(&p0, &two), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn density_validation() {
        let bad_trace = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5, 0.0), c(0.4, 0.0)]));
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.2, 0.0), c(-0.2, 0.0)]));
        assert!(DensityMatrix::new(negative).is_err());
        let non_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(non_herm).is_err());
        assert!(PureState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    fn arb_state(max_qubits: usize) -> impl Strategy<Value = PureState> {
        (1..=max_qubits).prop_flat_map(|n| {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("zero vector", |v| {
                let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
                (norm > 1e-3).then(|| {
                    PureState::new(v.into_iter().map(|(a, b)| c(a / norm, b / norm)).collect()).unwrap()
                })
            })
        })
    }

    fn arb_unitary() -> impl Strategy<Value = TwoQubitUnitary> {
        prop::collection::vec(-3.2f64..3.2, 6).prop_map(|a| {
            let rot = |x: f64, y: f64, z: f64| {
                let (s, cz) = (x.sin(), x.cos());
                Matrix2::new(
                    C64::from_polar(cz, y),
                    C64::from_polar(s, z),
                    -C64::from_polar(s, -z),
                    C64::from_polar(cz, -y),
                )
            };
            let local = kron2(&rot(a[0], a[1], a[2]), &rot(a[3], a[4], a[5]));
            let entangler = TwoQubitUnitary::swap().matrix() * C64::from_polar(1.0, a[0] * a[5]);
            let mut m = local * entangler;
            let phase = C64::from_polar(1.0, a[2]);
            m.column_mut(3).iter_mut().for_each(|z| *z *= phase);
            TwoQubitUnitary::new(m).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unitary_preserves_norm_and_density_invariants(psi in arb_state(4), u in arb_unitary(), a in 0usize..4, b in 0usize..4) {
            let n = psi.num_qubits();
            prop_assume!(n >= 2 && a < n && b < n && a != b);
            let mut phi = psi.clone();
            phi.apply_two_qubit(&u, (a, b)).unwrap();
            prop_assert!((phi.norm_sqr() - 1.0).abs() < TOL_VALIDATE);

            let mut rho = DensityMatrix::new(psi.to_density().matrix().clone()).unwrap();
            rho.apply_two_qubit(&u, (a, b)).unwrap();
            prop_assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
        }

        #[test]
        fn partial_trace_inverts_tensor(a in arb_state(2), b in arb_state(2)) {
            let ra = a.to_density();
            let joint = ra.tensor(&b.to_density());
            let keep: Vec<usize> = (0..a.num_qubits()).collect();
            prop_assert!(joint.partial_trace(&keep).unwrap().max_abs_diff(&ra) < TOL_VALIDATE);
        }

        #[test]
        fn complementary_purities_agree(psi in arb_state(6), mask in 1usize..63) {
            let n = psi.num_qubits();
            prop_assume!(n >= 2);
            let mask = mask % ((1 << n) - 1);
            prop_assume!(mask != 0);
            let keep: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
            let rest: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 0).collect();
            let p1 = purity(&psi.reduced(&keep).unwrap());
            let p2 = purity(&psi.reduced(&rest).unwrap());
            prop_assert!((p1 - p2).abs() < TOL_VALIDATE);
            prop_assert!((psi.subset_purity(&keep).unwrap() - p1).abs() < TOL_VALIDATE);
        }

        #[test]
        fn fidelity_of_pure_states_is_overlap(psi in arb_state(2), seed in prop::collection::vec(0.0f64..1.0, 8)) {
            let phi = random_state(psi.num_qubits(), &seed);
            let overlap = psi.inner(&phi).unwrap().norm();
            let f = fidelity(&psi.to_density(), &phi.to_density()).unwrap();
            prop_assert!((f - overlap).abs() < 1e-6, "f={} overlap={}", f, overlap);
            let g = fidelity(&phi.to_density(), &psi.to_density()).unwrap();
            prop_assert!((f - g).abs() < 1e-6);
        }
    }
}
