//! Many-qubit simulation of the collision process.
//!
//! [`simulate_dense`] keeps the full register (system plus `n` bath qubits)
//! and works at any temperature for small `n`. At zero temperature a pure
//! input never leaves the span of `|0>|0^n>`, `|1>|0^n>` and the `n` states
//! `|0>|1_k>`, which [`SparseThermalState`] stores in `O(n)` memory.

use crate::channel::{BathSpec, CanonicalChannelParams, Interaction, QubitState};
use crate::error::{Error, Result};
use crate::quantum::{fidelity, DensityMatrix, PureState, QuantumState, C64, TOL_VALIDATE};

/// Largest `n` for a dense pure-state run (`2^(n+1)` amplitudes).
pub const DENSE_PURE_LIMIT: usize = 12;
/// Largest `n` for a dense density-matrix run.
pub const DENSE_MIXED_LIMIT: usize = 10;
/// Largest register a sparse state may be expanded into.
pub const EMBED_QUBIT_LIMIT: usize = 24;

/// Amplitudes of the zero-temperature collision state after `n` collisions:
///
/// ```text
/// a0 |0>|0^n> + a1 |1>|0^n> + sum_k b[k-1] |0>|1_k>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SparseThermalState {
    pub n: usize,
    pub a0: C64,
    pub a1: C64,
    pub b: Vec<C64>,
}

impl SparseThermalState {
    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr() + self.b.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Dense `(n+1)`-qubit amplitudes, system on qubit 0.
    pub fn to_dense(&self) -> Result<PureState> {
        let qubits = self.n + 1;
        if qubits > EMBED_QUBIT_LIMIT {
            return Err(Error::LimitExceeded { what: "qubits", limit: EMBED_QUBIT_LIMIT, got: qubits });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubits];
        amps[0] = self.a0;
        amps[1 << self.n] = self.a1;
        for (k, &bk) in self.b.iter().enumerate() {
            amps[1 << (self.n - 1 - k)] = bk;
        }
        Ok(PureState::from_vec_unchecked(amps))
    }

    /// Reduced state of every qubit: the system first, then bath qubits in
    /// collision order.
    pub fn reduced_states(&self) -> Vec<QubitState> {
        let mut out = Vec::with_capacity(self.n + 1);
        let excited_bath: f64 = self.b.iter().map(|z| z.norm_sqr()).sum();
        out.push(QubitState::from_parts_unchecked(self.a0.norm_sqr() + excited_bath, self.a0 * self.a1.conj()));
        for bk in &self.b {
            out.push(QubitState::from_parts_unchecked(1.0 - bk.norm_sqr(), self.a0 * bk.conj()));
        }
        out
    }

    /// Applies one more collision with a fresh `|0>` bath qubit.
    fn collide(&mut self, cos_phi: f64, sin_phi: f64, phase: C64) {
        self.a0 *= phase;
        self.b.iter_mut().for_each(|z| *z *= phase);
        self.b.push(self.a1 * C64::new(0.0, sin_phi));
        self.a1 *= cos_phi;
        self.n += 1;
    }
}

fn check_amplitudes(c0: C64, c1: C64) -> Result<()> {
    let norm = c0.norm_sqr() + c1.norm_sqr();
    if !norm.is_finite() || (norm - 1.0).abs() > TOL_VALIDATE {
        return Err(Error::InvalidState(format!("|c0|^2 + |c1|^2 = {norm}")));
    }
    Ok(())
}

/// Zero-temperature evolution of `c0|0> + c1|1>`, one collision at a time.
pub fn simulate_sparse_t0(c0: C64, c1: C64, params: &CanonicalChannelParams, n: usize) -> Result<SparseThermalState> {
    check_amplitudes(c0, c1)?;
    let (s, c) = params.phi().sin_cos();
    let phase = C64::from_polar(1.0, params.theta());
    let mut state = SparseThermalState { n: 0, a0: c0, a1: c1, b: Vec::with_capacity(n) };
    for _ in 0..n {
        state.collide(c, s, phase);
    }
    Ok(state)
}

/// Same state, evaluated directly:
/// `a0 = c0 e^{i n theta}`, `a1 = c1 c^n`, `b[k] = i s c1 c^{k-1} e^{i (n-k) theta}`.
pub fn sparse_t0_closed_form(c0: C64, c1: C64, params: &CanonicalChannelParams, n: usize) -> Result<SparseThermalState> {
    check_amplitudes(c0, c1)?;
    let (s, c) = params.phi().sin_cos();
    let theta = params.theta();
    let b = (1..=n)
        .map(|k| c1 * C64::new(0.0, s) * c.powi(k as i32 - 1) * C64::from_polar(1.0, (n - k) as f64 * theta))
        .collect();
    Ok(SparseThermalState {
        n,
        a0: c0 * C64::from_polar(1.0, n as f64 * theta),
        a1: c1 * c.powi(n as i32),
        b,
    })
}

// ---------------------------------------------------------------------------

/// Joint output of a collision run.
#[derive(Debug, Clone, PartialEq)]
pub enum JointState {
    Pure(PureState),
    Mixed(DensityMatrix),
    Sparse(SparseThermalState),
}

/// Joint state plus the per-qubit reduced states (system first) and their
/// fidelities with the thermal state.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub joint: JointState,
    pub reduced: Vec<QubitState>,
    pub fidelity_to_thermal: Vec<f64>,
}

impl CollisionReport {
    fn new(joint: JointState, reduced: Vec<QubitState>, bath: &BathSpec) -> Self {
        let xi = bath.xi();
        let fidelity_to_thermal = reduced
            .iter()
            .map(|r| fidelity(&xi, &r.to_density()).expect("single-qubit states"))
            .collect();
        Self { joint, reduced, fidelity_to_thermal }
    }

    pub fn system(&self) -> &QubitState {
        &self.reduced[0]
    }

    pub fn bath_qubits(&self) -> &[QubitState] {
        &self.reduced[1..]
    }
}

pub fn sparse_report(state: SparseThermalState) -> CollisionReport {
    let reduced = state.reduced_states();
    CollisionReport::new(JointState::Sparse(state), reduced, &BathSpec::zero_temperature())
}

/// Applies `U` to (system, bath k) for `k = 1..=n`, every bath qubit starting
/// in `xi`. Pure inputs with a pure bath (`p` = 0 or 1) run as a state vector;
/// everything else as a density matrix.
pub fn simulate_dense(
    input: &QuantumState,
    params: &CanonicalChannelParams,
    bath: &BathSpec,
    n: usize,
) -> Result<CollisionReport> {
    if input.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, got: 1 << input.num_qubits() });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("at least one collision is required".into()));
    }
    let u = params.unitary();
    let keep_each = |q: usize| [q];

    match input {
        QuantumState::Pure(psi) if bath.p() == 1.0 || bath.p() == 0.0 => {
            if n > DENSE_PURE_LIMIT {
                return Err(Error::LimitExceeded { what: "collisions", limit: DENSE_PURE_LIMIT, got: n });
            }
            let bath_bit = usize::from(bath.p() == 0.0);
            let mut state = psi.clone();
            for _ in 0..n {
                state = state.tensor(&PureState::basis(1, bath_bit));
            }
            for k in 1..=n {
                state.apply_two_qubit(&u, (0, k))?;
            }
            let reduced = (0..=n)
                .map(|q| QubitState::from_density(&state.reduced(&keep_each(q))?))
                .collect::<Result<Vec<_>>>()?;
            Ok(CollisionReport::new(JointState::Pure(state), reduced, bath))
        }
        _ => {
            if n > DENSE_MIXED_LIMIT {
                return Err(Error::LimitExceeded { what: "collisions", limit: DENSE_MIXED_LIMIT, got: n });
            }
            let xi = bath.xi();
            let mut rho = input.to_density();
            for _ in 0..n {
                rho = rho.tensor(&xi);
            }
            for k in 1..=n {
                rho.apply_two_qubit(&u, (0, k))?;
            }
            let reduced = (0..=n)
                .map(|q| QubitState::from_density(&rho.partial_trace(&keep_each(q))?))
                .collect::<Result<Vec<_>>>()?;
            Ok(CollisionReport::new(JointState::Mixed(rho), reduced, bath))
        }
    }
}

/// Trace distance of each qubit's reduced state from `xi`, system first.
pub fn thermalization_errors(report: &CollisionReport, bath: &BathSpec) -> Vec<f64> {
    let xi = bath.thermal_state();
    report.reduced.iter().map(|r| r.trace_distance(&xi)).collect()
}

/// Largest trace distance from `xi` over all qubits.
pub fn thermalization_error(report: &CollisionReport, bath: &BathSpec) -> f64 {
    thermalization_errors(report, bath).into_iter().fold(0.0, f64::max)
}
