//! Thermalizing two-qubit interactions and the single-qubit CP map they induce.
//!
//! A bath qubit in the thermal state `xi = p|0><0| + q|1><1|` collides once
//! with the system. Every interaction that leaves `xi (x) xi` untouched for
//! all `p` keeps span{|00>}, span{|11>} and span{|01>,|10>} invariant, and
//! the resulting map acts on `(d, k)` as
//!
//! ```text
//! d' = d cos^2(phi) + p sin^2(phi)
//! k' = cos(phi) * lambda * k
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::quantum::{fidelity, DensityMatrix, TwoQubitUnitary, C64, TOL_VALIDATE};

// ---------------------------------------------------------------------------
// Bath and qubit states

/// Temperature of the bath, stored as the ground-state weight `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    p: f64,
    beta_e: Option<f64>,
}

impl BathSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} is not in [0, 1]")));
        }
        Ok(Self { p, beta_e: None })
    }

    /// `p = (1 + tanh(beta E)) / 2`.
    pub fn from_beta_e(beta_e: f64) -> Result<Self> {
        if beta_e.is_nan() {
            return Err(Error::InvalidParameter("beta*E is NaN".into()));
        }
        let p = 0.5 * (1.0 + beta_e.tanh());
        Ok(Self { p, beta_e: Some(beta_e) })
    }

    pub fn zero_temperature() -> Self {
        Self { p: 1.0, beta_e: None }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn beta_e(&self) -> Option<f64> {
        self.beta_e
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.p == 1.0
    }

    /// The single-qubit thermal state.
    pub fn thermal_state(&self) -> QubitState {
        QubitState { d: self.p, k: C64::new(0.0, 0.0) }
    }

    pub fn xi(&self) -> DensityMatrix {
        self.thermal_state().to_density()
    }
}

/// Single-qubit state `d|0><0| + (1-d)|1><1| + k|0><1| + k*|1><0|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    d: f64,
    k: C64,
}

impl QubitState {
    pub fn new(d: f64, k: C64) -> Result<Self> {
        if !d.is_finite() || !k.re.is_finite() || !k.im.is_finite() {
            return Err(Error::InvalidState("non-finite (d, k)".into()));
        }
        if !(-TOL_VALIDATE..=1.0 + TOL_VALIDATE).contains(&d) {
            return Err(Error::InvalidState(format!("population d = {d} is not in [0, 1]")));
        }
        if k.norm_sqr() > d * (1.0 - d) + TOL_VALIDATE {
            return Err(Error::InvalidState(format!(
                "|k|^2 = {} exceeds d(1-d) = {}",
                k.norm_sqr(),
                d * (1.0 - d)
            )));
        }
        Ok(Self { d, k })
    }

    pub(crate) fn from_parts_unchecked(d: f64, k: C64) -> Self {
        Self { d, k }
    }

    pub fn ground() -> Self {
        Self { d: 1.0, k: C64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        Self { d: 0.0, k: C64::new(0.0, 0.0) }
    }

    /// State of `c0|0> + c1|1>`; the amplitudes must be normalized.
    pub fn from_amplitudes(c0: C64, c1: C64) -> Result<Self> {
        let norm = c0.norm_sqr() + c1.norm_sqr();
        if (norm - 1.0).abs() > TOL_VALIDATE {
            return Err(Error::InvalidState(format!("|c0|^2 + |c1|^2 = {norm}")));
        }
        Ok(Self { d: c0.norm_sqr(), k: c0 * c1.conj() })
    }

    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: rho.dim() });
        }
        Self::new(rho.get(0, 0).re, rho.get(0, 1))
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn k(&self) -> C64 {
        self.k
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(self.d, 0.0), self.k, self.k.conj(), C64::new(1.0 - self.d, 0.0)],
        );
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Trace distance `sqrt((d - d')^2 + |k - k'|^2)`.
    pub fn trace_distance(&self, other: &QubitState) -> f64 {
        ((self.d - other.d).powi(2) + (self.k - other.k).norm_sqr()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &QubitState) -> f64 {
        (self.d - other.d).abs().max((self.k - other.k).norm())
    }
}

// ---------------------------------------------------------------------------
// Interaction parameters

/// Six-angle family of thermalizing unitaries:
///
/// ```text
/// |00> -> e^{i chi0} |00>
/// |11> -> e^{i chi1} |11>
/// |01> -> e^{i chi2} [cos(phi)|01> + e^{ i varphi2} sin(phi)|10>]
/// |10> -> e^{i chi3} [cos(phi)|10> - e^{-i varphi2} sin(phi)|01>]
/// ```
///
/// `phi` is folded into `[0, pi/2]`; the displaced signs are absorbed into
/// `chi2`, `chi3` and `varphi2`, so the unitary itself is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralUnitaryParams {
    pub chi0: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    phi: f64,
    pub varphi2: f64,
}

impl GeneralUnitaryParams {
    pub fn new(chi0: f64, chi1: f64, chi2: f64, chi3: f64, phi: f64, varphi2: f64) -> Result<Self> {
        if [chi0, chi1, chi2, chi3, phi, varphi2].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        let mut p = Self { chi0, chi1, chi2, chi3, phi: phi.rem_euclid(TAU), varphi2 };
        // phi -> phi - pi flips the sign of the whole off-diagonal block.
        if p.phi >= PI {
            p.phi -= PI;
            p.chi2 += PI;
            p.chi3 += PI;
        }
        // phi -> pi - phi flips cos(phi) only.
        if p.phi > FRAC_PI_2 {
            p.phi = PI - p.phi;
            p.chi2 += PI;
            p.chi3 += PI;
            p.varphi2 += PI;
        }
        Ok(p)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Two-parameter representative `V_z(phi, theta)` of the thermalizing family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalChannelParams {
    phi: f64,
    theta: f64,
}

impl CanonicalChannelParams {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        if !phi.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        if !(0.0..=FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidParameter(format!("phi = {phi} is not in [0, pi/2]")));
        }
        Ok(Self { phi, theta })
    }

    /// The partial swap `V(phi) = V_z(phi, phi)`.
    pub fn partial_swap(phi: f64) -> Result<Self> {
        Self::new(phi, phi)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Common view of both parametrizations.
pub trait Interaction {
    fn general(&self) -> GeneralUnitaryParams;
    fn unitary(&self) -> TwoQubitUnitary;

    fn cos_phi(&self) -> f64 {
        self.general().phi.cos()
    }

    fn sin_phi(&self) -> f64 {
        self.general().phi.sin()
    }
}

impl Interaction for GeneralUnitaryParams {
    fn general(&self) -> GeneralUnitaryParams {
        *self
    }

    fn unitary(&self) -> TwoQubitUnitary {
        build_general_unitary(self)
    }
}

impl Interaction for CanonicalChannelParams {
    fn general(&self) -> GeneralUnitaryParams {
        GeneralUnitaryParams {
            chi0: self.theta,
            chi1: self.theta,
            chi2: 0.0,
            chi3: 0.0,
            phi: self.phi,
            varphi2: FRAC_PI_2,
        }
    }

    fn unitary(&self) -> TwoQubitUnitary {
        build_canonical(self)
    }

    fn cos_phi(&self) -> f64 {
        self.phi.cos()
    }

    fn sin_phi(&self) -> f64 {
        self.phi.sin()
    }
}

// ---------------------------------------------------------------------------
// Unitaries and generator

pub fn build_general_unitary(params: &GeneralUnitaryParams) -> TwoQubitUnitary {
    let (s, c) = params.phi.sin_cos();
    let e = |x: f64| C64::from_polar(1.0, x);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = e(params.chi0);
    m[(3, 3)] = e(params.chi1);
    m[(1, 1)] = e(params.chi2) * c;
    m[(2, 1)] = e(params.chi2 + params.varphi2) * s;
    m[(2, 2)] = e(params.chi3) * c;
    m[(1, 2)] = -e(params.chi3 - params.varphi2) * s;
    TwoQubitUnitary::from_matrix_unchecked(m)
}

/// `V_z(phi, theta)`: phase `e^{i theta}` on |00> and |11>, partial swap on
/// the one-excitation block.
pub fn build_canonical(params: &CanonicalChannelParams) -> TwoQubitUnitary {
    let (s, c) = params.phi.sin_cos();
    let phase = C64::from_polar(1.0, params.theta);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = phase;
    m[(3, 3)] = phase;
    m[(1, 1)] = C64::new(c, 0.0);
    m[(2, 2)] = C64::new(c, 0.0);
    m[(1, 2)] = C64::new(0.0, s);
    m[(2, 1)] = C64::new(0.0, s);
    TwoQubitUnitary::from_matrix_unchecked(m)
}

/// `H = [phi (XX + YY) + theta ZZ] / 2`.
pub fn build_hamiltonian(params: &CanonicalChannelParams) -> Matrix4<C64> {
    let half_theta = C64::new(params.theta / 2.0, 0.0);
    let phi = C64::new(params.phi, 0.0);
    let mut h = Matrix4::zeros();
    h[(0, 0)] = half_theta;
    h[(3, 3)] = half_theta;
    h[(1, 1)] = -half_theta;
    h[(2, 2)] = -half_theta;
    h[(1, 2)] = phi;
    h[(2, 1)] = phi;
    h
}

/// `exp(i H(phi, theta))`, evaluated on the invariant blocks of `H`.
///
/// The one-excitation block is `-theta/2 + phi * X`, whose exponential is
/// `e^{-i theta/2} (cos(phi) + i sin(phi) X)`.
pub fn exp_i_hamiltonian(params: &CanonicalChannelParams) -> TwoQubitUnitary {
    let (s, c) = params.phi.sin_cos();
    let outer = C64::from_polar(1.0, params.theta / 2.0);
    let inner = C64::from_polar(1.0, -params.theta / 2.0);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = outer;
    m[(3, 3)] = outer;
    m[(1, 1)] = inner * c;
    m[(2, 2)] = inner * c;
    m[(1, 2)] = inner * C64::new(0.0, s);
    m[(2, 1)] = inner * C64::new(0.0, s);
    TwoQubitUnitary::from_matrix_unchecked(m)
}

/// Factors of `V_z(phi, theta) = V_z(0, theta - phi) V(phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSwapDecomposition {
    /// `V_z(0, theta - phi)`, applied second.
    pub dephasing: TwoQubitUnitary,
    /// `V(phi) = cos(phi) 1 + i sin(phi) SWAP`, applied first.
    pub partial_swap: TwoQubitUnitary,
    /// `max |V_z(0, theta-phi) V(phi) - V_z(phi, theta)|`.
    pub product_residual: f64,
    /// `max |[V_z(phi, 0), V_z(0, theta)]|`.
    pub commutation_residual: f64,
}

pub fn decompose_partial_swap(params: &CanonicalChannelParams) -> PartialSwapDecomposition {
    let target = build_canonical(params);
    let dephasing = build_canonical(&CanonicalChannelParams { phi: 0.0, theta: params.theta - params.phi });
    let partial_swap = build_canonical(&CanonicalChannelParams { phi: params.phi, theta: params.phi });
    let product_residual = dephasing.compose(&partial_swap).max_abs_diff(&target);

    let swap_part = build_canonical(&CanonicalChannelParams { phi: params.phi, theta: 0.0 });
    let phase_part = build_canonical(&CanonicalChannelParams { phi: 0.0, theta: params.theta });
    let commutation_residual = swap_part.compose(&phase_part).max_abs_diff(&phase_part.compose(&swap_part));

    PartialSwapDecomposition { dephasing, partial_swap, product_residual, commutation_residual }
}

// ---------------------------------------------------------------------------
// The CP map

/// Coherence multiplier `lambda = p e^{i(chi0 - chi3)} + q e^{i(chi2 - chi1)}`.
pub fn lambda_of<P: Interaction + ?Sized>(params: &P, bath: &BathSpec) -> C64 {
    let g = params.general();
    C64::from_polar(bath.p(), g.chi0 - g.chi3) + C64::from_polar(bath.q(), g.chi2 - g.chi1)
}

/// One collision, closed form.
pub fn apply_channel_once<P: Interaction + ?Sized>(state: &QubitState, params: &P, bath: &BathSpec) -> QubitState {
    let c = params.cos_phi();
    let s = params.sin_phi();
    QubitState {
        d: state.d * c * c + bath.p() * s * s,
        k: lambda_of(params, bath) * c * state.k,
    }
}

/// One collision, `Tr_B[U (rho (x) xi) U^dag]`.
pub fn apply_channel_via_trace(rho: &DensityMatrix, u: &TwoQubitUnitary, bath: &BathSpec) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.dim() });
    }
    let mut joint = rho.tensor(&bath.xi());
    joint.apply_two_qubit(u, (0, 1))?;
    joint.partial_trace(&[0])
}

/// State after `n` collisions from the closed forms
/// `d_n = (1 - c^{2n}) p + c^{2n} d_0` and `k_n = k_0 (lambda c)^n`.
pub fn closed_form_state<P: Interaction + ?Sized>(
    state: &QubitState,
    params: &P,
    bath: &BathSpec,
    n: usize,
) -> QubitState {
    let c = params.cos_phi();
    let c2n = c.powi(2 * n as i32);
    QubitState {
        d: (1.0 - c2n) * bath.p() + c2n * state.d,
        k: state.k * (lambda_of(params, bath) * c).powi(n as i32),
    }
}

/// `(n, state)` pairs for `n = 0, 1, ..., steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    entries: Vec<(usize, QubitState)>,
}

impl Trajectory {
    pub fn entries(&self) -> &[(usize, QubitState)] {
        &self.entries
    }

    pub fn last(&self) -> &QubitState {
        &self.entries.last().expect("trajectory always holds the initial state").1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Step-wise iteration of the closed-form single collision.
pub fn iterate_channel<P: Interaction + ?Sized>(state: &QubitState, params: &P, bath: &BathSpec, steps: usize) -> Trajectory {
    let mut entries = Vec::with_capacity(steps + 1);
    let mut current = *state;
    entries.push((0, current));
    for n in 1..=steps {
        current = apply_channel_once(&current, params, bath);
        entries.push((n, current));
    }
    Trajectory { entries }
}

/// `max |U (xi (x) xi) U^dag - xi (x) xi|`.
pub fn verify_fixed_point(u: &TwoQubitUnitary, bath: &BathSpec) -> f64 {
    let xi = bath.xi();
    let pair = xi.tensor(&xi);
    let mut out = pair.clone();
    out.apply_two_qubit(u, (0, 1)).expect("two-qubit register");
    out.max_abs_diff(&pair)
}

/// Reduced state of the bath qubit after one collision with `state`.
pub fn bath_qubit_state<P: Interaction + ?Sized>(state: &QubitState, params: &P, bath: &BathSpec) -> QubitState {
    let mut joint = state.to_density().tensor(&bath.xi());
    joint.apply_two_qubit(&params.unitary(), (0, 1)).expect("two-qubit register");
    let rho = joint.partial_trace(&[1]).expect("valid qubit");
    QubitState { d: rho.get(0, 0).re, k: rho.get(0, 1) }
}

/// Fidelity of the post-collision bath qubit with `xi`; never below `cos(phi)`.
pub fn bath_qubit_fidelity<P: Interaction + ?Sized>(state: &QubitState, params: &P, bath: &BathSpec) -> f64 {
    let sigma = bath_qubit_state(state, params, bath).to_density();
    fidelity(&bath.xi(), &sigma).expect("both single-qubit")
}

// ---------------------------------------------------------------------------
// Continuous-time limit

/// Relaxation times of the continuous-time limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRates {
    pub tau0: f64,
    pub t1: f64,
    pub t_pf: f64,
    pub t2: f64,
}

impl RelaxationRates {
    /// `1/T2 - (1/(2 T1) + p q / T_pf)`.
    pub fn identity_residual(&self, bath: &BathSpec) -> f64 {
        1.0 / self.t2 - (0.5 / self.t1 + bath.p() * bath.q() / self.t_pf)
    }
}

fn t2_from(t1: f64, t_pf: f64, bath: &BathSpec) -> f64 {
    1.0 / (0.5 / t1 + bath.p() * bath.q() / t_pf)
}

/// Interaction angles for a time step `tau0` plus the exponential evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousTimeLimit {
    pub rates: RelaxationRates,
    pub params: CanonicalChannelParams,
    pub bath: BathSpec,
}

impl ContinuousTimeLimit {
    /// `d(t) = e^{-t/T1} d(0) + (1 - e^{-t/T1}) p`
    pub fn population_at(&self, t: f64, d0: f64) -> f64 {
        let decay = (-t / self.rates.t1).exp();
        decay * d0 + (1.0 - decay) * self.bath.p()
    }

    /// `|k|(t) = e^{-t/T2} |k|(0)`
    pub fn coherence_abs_at(&self, t: f64, k0_abs: f64) -> f64 {
        (-t / self.rates.t2).exp() * k0_abs
    }

    /// Number of collisions `t / tau0`, rounded to the nearest step.
    pub fn steps_for(&self, t: f64) -> usize {
        (t / self.rates.tau0).round() as usize
    }
}

/// Angles `phi = sqrt(tau0/T1)`, `theta = sqrt(tau0/(2 T_pf))` and the derived
/// `1/T2 = 1/(2 T1) + p q / T_pf`. `T_pf` may be infinite (no dephasing).
pub fn continuous_time(t1: f64, t_pf: f64, bath: &BathSpec, tau0: f64) -> Result<ContinuousTimeLimit> {
    for (name, v) in [("T1", t1), ("T_pf", t_pf), ("tau0", tau0)] {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
        }
    }
    if !t1.is_finite() || !tau0.is_finite() {
        return Err(Error::InvalidParameter("T1 and tau0 must be finite".into()));
    }
    let phi = (tau0 / t1).sqrt();
    let theta = (tau0 / (2.0 * t_pf)).sqrt();
    let params = CanonicalChannelParams::new(phi, theta)
        .map_err(|_| Error::InvalidParameter(format!("tau0/T1 = {} gives phi > pi/2", tau0 / t1)))?;
    let rates = RelaxationRates { tau0, t1, t_pf, t2: t2_from(t1, t_pf, bath) };
    Ok(ContinuousTimeLimit { rates, params, bath: *bath })
}

/// Relaxation times implied by given angles and time step: `T1 = tau0/phi^2`,
/// `T_pf = tau0/(2 theta^2)`. Zero angles give infinite times.
pub fn rates_from_params(params: &CanonicalChannelParams, bath: &BathSpec, tau0: f64) -> Result<RelaxationRates> {
    if tau0.is_nan() || tau0 <= 0.0 || tau0.is_infinite() {
        return Err(Error::InvalidParameter(format!("tau0 = {tau0} must be positive")));
    }
    let t1 = tau0 / (params.phi * params.phi);
    let t_pf = tau0 / (2.0 * params.theta * params.theta);
    Ok(RelaxationRates { tau0, t1, t_pf, t2: t2_from(t1, t_pf, bath) })
}
