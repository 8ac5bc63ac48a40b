//! Irreversibility from losing the labels of the bath qubits.
//!
//! At zero temperature the system `c0|0> + c1|1>` collides with `n` bath
//! qubits, the bath qubits are relabelled by a permutation `pi`, and the
//! collisions are undone in reverse order. The reconstructed system state
//! depends on `pi` only through the amplitude factor
//!
//! ```text
//! f_pi = c^{2n} + s^2 sum_k c^{k + pi^{-1}(k) - 2}        (theta = 0)
//! ```
//!
//! and its fidelity with the input is
//! `F = |c0|^2 + |c1|^2 [|f|^2 + 2|c0|^2 (Re f - |f|^2)]`.
//!
//! Relabelling convention: the bath qubit at position `j` is moved to
//! position `pi(j)`, so `|1_j> -> |1_{pi(j)}>`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bath_sim::DENSE_PURE_LIMIT;
use crate::channel::{CanonicalChannelParams, Interaction};
use crate::entanglement::geometric_pair_sum;
use crate::error::{Error, Result};
use crate::quantum::{PureState, C64, TOL_VALIDATE};
use crate::sum::{compensated_sum, NeumaierSum};

/// Largest `n` for averages by full enumeration of `n!` permutations.
pub const ENUMERATION_LIMIT: usize = 8;

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// A bijection of the bath labels `{1, ..., n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    /// `image[k - 1] = pi(k)`, one-based.
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &v in &image {
            if v == 0 || v > n || std::mem::replace(&mut seen[v - 1], true) {
                return Err(Error::InvalidParameter(format!("{image:?} is not a permutation of 1..={n}")));
            }
        }
        Ok(Self { image })
    }

    pub fn identity(n: usize) -> Self {
        Self { image: (1..=n).collect() }
    }

    /// The `rank`-th permutation of `1..=n` in lexicographic order.
    pub fn from_rank(n: usize, mut rank: usize) -> Result<Self> {
        if rank >= factorial(n) {
            return Err(Error::InvalidParameter(format!("rank {rank} >= {n}!")));
        }
        let mut pool: Vec<usize> = (1..=n).collect();
        let mut image = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let block = factorial(i);
            image.push(pool.remove(rank / block));
            rank %= block;
        }
        Ok(Self { image })
    }

    /// Inverse of [`Permutation::from_rank`].
    pub fn rank(&self) -> usize {
        let n = self.image.len();
        (0..n)
            .map(|i| {
                let smaller_later = self.image[i + 1..].iter().filter(|&&v| v < self.image[i]).count();
                smaller_later * factorial(n - 1 - i)
            })
            .sum()
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut image: Vec<usize> = (1..=n).collect();
        image.shuffle(rng);
        Self { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// `pi(k)` for one-based `k`.
    pub fn apply(&self, k: usize) -> usize {
        self.image[k - 1]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn inverse(&self) -> Self {
        let mut image = vec![0; self.image.len()];
        for (k, &v) in self.image.iter().enumerate() {
            image[v - 1] = k + 1;
        }
        Self { image }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(k, &v)| v == k + 1)
    }
}

/// Permutation used by Monte Carlo sample `index`: stream `index` of a
/// ChaCha8 generator seeded with `seed`.
pub fn sample_permutation(n: usize, seed: u64, index: u64) -> Permutation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Permutation::random(n, &mut rng)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ScrambleResult {
    pub f_pi: C64,
    pub fidelity: f64,
    pub permutation: Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMethod {
    ExactEnumeration,
    SimulatedEnumeration,
    ClosedForm,
    Asymptotic,
    MonteCarlo,
}

impl AverageMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AverageMethod::ExactEnumeration => "exact",
            AverageMethod::SimulatedEnumeration => "simulate",
            AverageMethod::ClosedForm => "closed",
            AverageMethod::Asymptotic => "asymptotic",
            AverageMethod::MonteCarlo => "montecarlo",
        }
    }
}

/// Permutation-averaged reconstruction fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageFidelity {
    pub mean: f64,
    pub method: AverageMethod,
    /// Monte Carlo only.
    pub samples: Option<usize>,
    /// Monte Carlo only.
    pub std_error: Option<f64>,
}

impl AverageFidelity {
    fn deterministic(mean: f64, method: AverageMethod) -> Self {
        Self { mean, method, samples: None, std_error: None }
    }
}

fn check_amplitudes(c0: C64, c1: C64) -> Result<()> {
    let norm = c0.norm_sqr() + c1.norm_sqr();
    if !norm.is_finite() || (norm - 1.0).abs() > TOL_VALIDATE {
        return Err(Error::InvalidState(format!("|c0|^2 + |c1|^2 = {norm}")));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!("c = {c} is not in [0, 1]")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// `f_pi` for `theta = 0`, `c = cos(phi)`.
pub fn f_pi_closed(pi: &Permutation, c: f64, theta: f64, n: usize) -> Result<C64> {
    if theta != 0.0 {
        return Err(Error::Unsupported(
            "closed-form f_pi requires theta = 0; use scramble_simulate".into(),
        ));
    }
    check_c(c)?;
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.len() });
    }
    let inv = pi.inverse();
    let s2 = 1.0 - c * c;
    let sum = compensated_sum((1..=n).map(|k| c.powi((k + inv.apply(k) - 2) as i32)));
    Ok(C64::new(c.powi(2 * n as i32) + s2 * sum, 0.0))
}

/// `<psi| rho_S |psi>` of the reconstructed system state.
pub fn fidelity_of(c0: C64, c1: C64, f_pi: C64) -> Result<f64> {
    check_amplitudes(c0, c1)?;
    let (p0, p1) = (c0.norm_sqr(), c1.norm_sqr());
    let f2 = f_pi.norm_sqr();
    Ok(p0 + p1 * (f2 + 2.0 * p0 * (f_pi.re - f2)))
}

/// Forward collisions, relabelling of the bath by `pi`, reversed collisions.
fn forward_permute_reverse(input: PureState, params: &CanonicalChannelParams, pi: &Permutation) -> Result<PureState> {
    let n = pi.len();
    let u = params.unitary();
    let mut state = input;
    for _ in 0..n {
        state = state.tensor(&PureState::basis(1, 0));
    }
    for k in 1..=n {
        state.apply_two_qubit(&u, (0, k))?;
    }
    // qubit q sits at bit n - q
    let old = state.into_amplitudes();
    let mut relabelled = vec![C64::new(0.0, 0.0); old.len()];
    for (idx, amp) in old.into_iter().enumerate() {
        let mut target = idx & (1 << n);
        for j in 1..=n {
            if idx >> (n - j) & 1 == 1 {
                target |= 1 << (n - pi.apply(j));
            }
        }
        relabelled[target] = amp;
    }
    let mut state = PureState::from_vec_unchecked(relabelled);
    let u_dag = u.adjoint();
    for k in (1..=n).rev() {
        state.apply_two_qubit(&u_dag, (0, k))?;
    }
    Ok(state)
}

/// Full state-vector run of the scrambling experiment; valid for any `theta`.
pub fn scramble_simulate(
    c0: C64,
    c1: C64,
    params: &CanonicalChannelParams,
    pi: &Permutation,
    n: usize,
) -> Result<ScrambleResult> {
    check_amplitudes(c0, c1)?;
    check_n(n)?;
    if n > DENSE_PURE_LIMIT {
        return Err(Error::LimitExceeded { what: "collisions", limit: DENSE_PURE_LIMIT, got: n });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.len() });
    }
    let excited = forward_permute_reverse(PureState::basis(1, 1), params, pi)?;
    let f_pi = excited.amplitudes()[1 << n];

    let out = forward_permute_reverse(PureState::qubit(c0, c1)?, params, pi)?;
    let rho = out.reduced(&[0])?;
    let psi = [c0, c1];
    let mut overlap = C64::new(0.0, 0.0);
    for (a, &ca) in psi.iter().enumerate() {
        for (b, &cb) in psi.iter().enumerate() {
            overlap += ca.conj() * rho.get(a, b) * cb;
        }
    }
    Ok(ScrambleResult { f_pi, fidelity: overlap.re, permutation: pi.clone() })
}

/// Mean of `F(pi)` over all `n!` permutations, `theta = 0`.
pub fn average_fidelity_exact(c0: C64, c1: C64, c: f64, n: usize) -> Result<AverageFidelity> {
    check_amplitudes(c0, c1)?;
    check_c(c)?;
    check_n(n)?;
    if n > ENUMERATION_LIMIT {
        return Err(Error::LimitExceeded { what: "n", limit: ENUMERATION_LIMIT, got: n });
    }
    if c == 1.0 {
        return Ok(AverageFidelity::deterministic(1.0, AverageMethod::ExactEnumeration));
    }
    let count = factorial(n);
    let values = (0..count)
        .into_par_iter()
        .map(|rank| {
            let pi = Permutation::from_rank(n, rank)?;
            fidelity_of(c0, c1, f_pi_closed(&pi, c, 0.0, n)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AverageFidelity::deterministic(compensated_sum(values) / count as f64, AverageMethod::ExactEnumeration))
}

/// Mean of `F(pi)` over all `n!` permutations by state-vector simulation;
/// valid for any `theta`.
pub fn average_fidelity_simulated(c0: C64, c1: C64, params: &CanonicalChannelParams, n: usize) -> Result<AverageFidelity> {
    check_amplitudes(c0, c1)?;
    check_n(n)?;
    if n > ENUMERATION_LIMIT {
        return Err(Error::LimitExceeded { what: "n", limit: ENUMERATION_LIMIT, got: n });
    }
    let count = factorial(n);
    let values = (0..count)
        .into_par_iter()
        .map(|rank| scramble_simulate(c0, c1, params, &Permutation::from_rank(n, rank)?, n).map(|r| r.fidelity))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AverageFidelity::deterministic(compensated_sum(values) / count as f64, AverageMethod::SimulatedEnumeration))
}

/// Permutation averages `(I1, I2)` of `sum_k c^{k+pi~(k)-2}` and of its square.
pub fn permutation_moments(c: f64, n: usize) -> Result<(f64, f64)> {
    check_c(c)?;
    check_n(n)?;
    let nf = n as f64;
    if c == 1.0 {
        return Ok((nf, nf * nf));
    }
    let i1 = ((1.0 - c.powi(n as i32)) / (1.0 - c)).powi(2) / nf;
    let diagonal = ((1.0 - c.powi(2 * n as i32)) / (1.0 - c * c)).powi(2) / nf;
    let cross = if n == 1 { 0.0 } else { geometric_pair_sum(c, n)?.powi(2) / (nf * (nf - 1.0)) };
    Ok((i1, diagonal + cross))
}

/// Closed-form permutation average at `theta = 0`.
pub fn average_fidelity_closed(c0: C64, c1: C64, c: f64, n: usize) -> Result<AverageFidelity> {
    check_amplitudes(c0, c1)?;
    check_c(c)?;
    check_n(n)?;
    if c == 1.0 {
        return Ok(AverageFidelity::deterministic(1.0, AverageMethod::ClosedForm));
    }
    let (i1, i2) = permutation_moments(c, n)?;
    let s2 = 1.0 - c * c;
    let c2n = c.powi(2 * n as i32);
    let f_mean = c2n + s2 * i1;
    let f2_mean = c2n * c2n + 2.0 * c2n * s2 * i1 + s2 * s2 * i2;
    let (p0, p1) = (c0.norm_sqr(), c1.norm_sqr());
    let mean = p0 + p1 * (f2_mean + 2.0 * p0 * (f_mean - f2_mean));
    Ok(AverageFidelity::deterministic(mean, AverageMethod::ClosedForm))
}

/// Large-`n` form for input `|1>`: `1/n + 4 [c/(1-c)]^2 / (n(n-1))`.
/// Accurate once `c^n` is negligible.
pub fn average_fidelity_asymptotic(c: f64, n: usize) -> Result<AverageFidelity> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!("c = {c} is not in [0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("asymptotic form needs n >= 2".into()));
    }
    let nf = n as f64;
    let ratio = c / (1.0 - c);
    Ok(AverageFidelity::deterministic(1.0 / nf + 4.0 * ratio * ratio / (nf * (nf - 1.0)), AverageMethod::Asymptotic))
}

/// Monte Carlo average over uniformly random permutations.
///
/// Sample `i` draws its permutation from [`sample_permutation`]`(n, seed, i)`
/// and the reduction runs in sample order, so the result does not depend on
/// the number of worker threads. `theta = 0` uses the closed-form `f_pi`;
/// otherwise each sample is a state-vector run (`n <= DENSE_PURE_LIMIT`).
pub fn average_fidelity_montecarlo(
    c0: C64,
    c1: C64,
    params: &CanonicalChannelParams,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<AverageFidelity> {
    check_amplitudes(c0, c1)?;
    check_n(n)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let theta = params.theta();
    if theta != 0.0 && n > DENSE_PURE_LIMIT {
        return Err(Error::LimitExceeded { what: "collisions", limit: DENSE_PURE_LIMIT, got: n });
    }
    let c = params.cos_phi();
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let pi = sample_permutation(n, seed, i);
            if theta == 0.0 {
                fidelity_of(c0, c1, f_pi_closed(&pi, c, 0.0, n)?)
            } else {
                scramble_simulate(c0, c1, params, &pi, n).map(|r| r.fidelity)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = compensated_sum(values.iter().copied()) / samples as f64;
    let std_error = if samples > 1 {
        let mut acc = NeumaierSum::new();
        acc.extend(values.iter().map(|v| (v - mean) * (v - mean)));
        (acc.value() / (samples - 1) as f64 / samples as f64).sqrt()
    } else {
        0.0
    };
    Ok(AverageFidelity { mean, method: AverageMethod::MonteCarlo, samples: Some(samples), std_error: Some(std_error) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::TwoQubitUnitary;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_amplitudes(rng: &mut ChaCha8Rng) -> (C64, C64) {
        let r: f64 = rng.random();
        (C64::from_polar(r.sqrt(), rng.random_range(-PI..PI)), C64::from_polar((1.0 - r).sqrt(), rng.random_range(-PI..PI)))
    }

    #[test]
    fn permutation_basics() {
        let pi = Permutation::new(vec![3, 1, 2]).unwrap();
        assert_eq!(pi.apply(1), 3);
        assert_eq!(pi.inverse().image(), &[2, 3, 1]);
        assert!(Permutation::identity(4).is_identity());
        assert!(Permutation::new(vec![1, 1, 2]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![1, 3]).is_err());
        for rank in 0..factorial(5) {
            let p = Permutation::from_rank(5, rank).unwrap();
            assert_eq!(p.rank(), rank);
        }
        assert!(Permutation::from_rank(3, 6).is_err());
        assert!(Permutation::from_rank(4, 0).unwrap().is_identity());
    }

    #[test]
    fn identity_permutation_reconstructs_perfectly() {
        for &cv in &[0.0, 0.3, 0.9, 1.0] {
            for n in 1..10 {
                let f = f_pi_closed(&Permutation::identity(n), cv, 0.0, n).unwrap();
                assert!((f - c(1., 0.)).norm() < 1e-14, "c={cv} n={n}: {f}");
            }
        }
    }

    #[test]
    fn full_swap_transposition() {
        let n = 4;
        let swap12 = Permutation::new(vec![2, 1, 3, 4]).unwrap();
        assert_eq!(f_pi_closed(&swap12, 0.0, 0.0, n).unwrap(), c(0., 0.));
        let swap23 = Permutation::new(vec![1, 3, 2, 4]).unwrap();
        assert_eq!(f_pi_closed(&swap23, 0.0, 0.0, n).unwrap(), c(1., 0.));
    }

    #[test]
    fn closed_form_requires_theta_zero() {
        assert!(matches!(f_pi_closed(&Permutation::identity(3), 0.5, 0.1, 3), Err(Error::Unsupported(_))));
        assert!(f_pi_closed(&Permutation::identity(3), 0.5, 0.0, 4).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let (c0, c1) = (c(0.6, 0.), c(0., 0.8));
        assert!((fidelity_of(c0, c1, c(1., 0.)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity_of(c(1., 0.), c(0., 0.), c(0.3, 0.)).unwrap(), 1.0);
        assert!((fidelity_of(c(0., 0.), c(1., 0.), c(0.42, 0.)).unwrap() - 0.42 * 0.42).abs() < 1e-15);
        assert!(fidelity_of(c(1., 0.), c(1., 0.), c(0.3, 0.)).is_err());
    }

    #[test]
    fn simulation_matches_closed_form_f_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 1..=8 {
            for _ in 0..4 {
                let phi = rng.random_range(0.0..FRAC_PI_2);
                let params = CanonicalChannelParams::new(phi, 0.0).unwrap();
                let pi = Permutation::random(n, &mut rng);
                let (c0, c1) = random_amplitudes(&mut rng);
                let sim = scramble_simulate(c0, c1, &params, &pi, n).unwrap();
                let closed = f_pi_closed(&pi, phi.cos(), 0.0, n).unwrap();
                assert!((sim.f_pi - closed).norm() < 1e-12);
                assert!((sim.fidelity - fidelity_of(c0, c1, closed).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simulation_trivial_cases() {
        let params = CanonicalChannelParams::new(0.5, 0.4).unwrap();
        let (c0, c1) = (c(0.6, 0.), c(0., 0.8));
        for n in 1..=5 {
            let r = scramble_simulate(c0, c1, &params, &Permutation::identity(n), n).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-12);
        }
    }

    /// Independent oracle: explicit 2^(n+1) matrices for every gate and the
    /// relabelling, multiplied out.
    fn dense_scramble_fidelity(c0: C64, c1: C64, u: &TwoQubitUnitary, pi: &Permutation) -> f64 {
        let n = pi.len();
        let m = n + 1;
        let dim = 1usize << m;
        let bit = |idx: usize, q: usize| idx >> (m - 1 - q) & 1;
        let gate = |k: usize, g: &TwoQubitUnitary| {
            DMatrix::from_fn(dim, dim, |r, col| {
                let others_equal = (0..m).filter(|&q| q != 0 && q != k).all(|q| bit(r, q) == bit(col, q));
                if !others_equal {
                    return c(0., 0.);
                }
                g.matrix()[(2 * bit(r, 0) + bit(r, k), 2 * bit(col, 0) + bit(col, k))]
            })
        };
        let perm = DMatrix::from_fn(dim, dim, |r, col| {
            let ok = bit(r, 0) == bit(col, 0) && (1..=n).all(|j| bit(col, j) == bit(r, pi.apply(j)));
            if ok { c(1., 0.) } else { c(0., 0.) }
        });
        let mut forward = DMatrix::<C64>::identity(dim, dim);
        for k in 1..=n {
            forward = gate(k, u) * forward;
        }
        let total = forward.adjoint() * perm * &forward;
        let mut input = DVector::from_element(dim, c(0., 0.));
        input[0] = c0;
        input[1 << n] = c1;
        let out = total * &input;
        // <psi|rho_S|psi> = sum over bath configs |c0* out[0,b] + c1* out[1,b]|^2
        (0..1usize << n).map(|b| (c0.conj() * out[b] + c1.conj() * out[(1 << n) | b]).norm_sqr()).sum()
    }

    #[test]
    fn simulation_matches_dense_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = CanonicalChannelParams::new(0.5, 0.4).unwrap();
        for _ in 0..5 {
            let pi = Permutation::random(5, &mut rng);
            let (c0, c1) = random_amplitudes(&mut rng);
            let sim = scramble_simulate(c0, c1, &params, &pi, 5).unwrap();
            let dense = dense_scramble_fidelity(c0, c1, &params.unitary(), &pi);
            assert!((sim.fidelity - dense).abs() < 1e-12, "{} vs {}", sim.fidelity, dense);
            assert!((0.0..=1.0 + 1e-12).contains(&sim.fidelity));
        }
    }

    #[test]
    fn exact_average_examples() {
        let one = average_fidelity_exact(c(0.6, 0.), c(0.8, 0.), 0.4, 1).unwrap();
        assert!((one.mean - 1.0).abs() < 1e-15);

        let cv = FRAC_PI_4.cos();
        let exact = average_fidelity_exact(c(0., 0.), c(1., 0.), cv, 4).unwrap().mean;
        let closed = average_fidelity_closed(c(0., 0.), c(1., 0.), cv, 4).unwrap().mean;
        assert!((exact - closed).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c0, c1) = random_amplitudes(&mut rng);
        let cv = rng.random_range(0.0..1.0);
        let exact = average_fidelity_exact(c0, c1, cv, 7).unwrap().mean;
        let closed = average_fidelity_closed(c0, c1, cv, 7).unwrap().mean;
        assert!((exact - closed).abs() < 1e-10);

        assert!(matches!(
            average_fidelity_exact(c0, c1, 0.5, ENUMERATION_LIMIT + 1),
            Err(Error::LimitExceeded { .. })
        ));
        assert_eq!(average_fidelity_exact(c0, c1, 1.0, 6).unwrap().mean, 1.0);
    }

    #[test]
    fn closed_average_examples() {
        assert!((average_fidelity_closed(c(1., 0.), c(0., 0.), 0.3, 12).unwrap().mean - 1.0).abs() < 1e-15);
        for &cv in &[0.0, 0.4, 0.99] {
            let one = average_fidelity_closed(c(0.6, 0.), c(0., 0.8), cv, 1).unwrap().mean;
            assert!((one - 1.0).abs() < 1e-12);
        }
        let closed = average_fidelity_closed(c(0., 0.), c(1., 0.), 0.5, 40).unwrap().mean;
        let asym = average_fidelity_asymptotic(0.5, 40).unwrap().mean;
        assert!(((closed - asym) / closed).abs() < 1e-9);
    }

    #[test]
    fn moments_match_enumeration() {
        for n in 1..=6 {
            let cv = 0.73;
            let (i1, i2) = permutation_moments(cv, n).unwrap();
            let sums: Vec<f64> = (0..factorial(n))
                .map(|r| {
                    let inv = Permutation::from_rank(n, r).unwrap().inverse();
                    (1..=n).map(|k| cv.powi((k + inv.apply(k) - 2) as i32)).sum()
                })
                .collect();
            let e1 = sums.iter().sum::<f64>() / factorial(n) as f64;
            let e2 = sums.iter().map(|s| s * s).sum::<f64>() / factorial(n) as f64;
            assert!((i1 - e1).abs() < 1e-12 && (i2 - e2).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_behaviour() {
        let mut prev = f64::INFINITY;
        for n in 2..500 {
            let f = average_fidelity_asymptotic(0.9, n).unwrap().mean;
            assert!(f < prev);
            prev = f;
        }
        assert!(prev < 0.7);
        let at10 = average_fidelity_asymptotic(0.5, 10).unwrap().mean;
        assert!(at10 > 1e4 / factorial(10) as f64);
        assert!(average_fidelity_asymptotic(1.0, 10).is_err());
        assert!(average_fidelity_asymptotic(0.5, 1).is_err());
    }

    #[test]
    fn closed_average_decreases_with_n() {
        for &cv in &[0.1, 0.5, 0.9, 0.99] {
            let mut prev = f64::INFINITY;
            for n in 1..200 {
                let f = average_fidelity_closed(c(0., 0.), c(1., 0.), cv, n).unwrap().mean;
                assert!(f <= prev + 1e-15, "c={cv} n={n}");
                assert!((0.0..=1.0).contains(&f));
                prev = f;
            }
        }
    }

    #[test]
    fn every_permutation_gives_valid_fidelity() {
        let (c0, c1) = (c(0.3, 0.1), C64::from_polar((1.0f64 - 0.1).sqrt(), 0.7));
        for rank in 0..factorial(5) {
            let pi = Permutation::from_rank(5, rank).unwrap();
            let f = fidelity_of(c0, c1, f_pi_closed(&pi, 0.6, 0.0, 5).unwrap()).unwrap();
            assert!((-1e-15..=1.0 + 1e-15).contains(&f));
        }
    }

    #[test]
    fn montecarlo_examples() {
        let params = CanonicalChannelParams::new(0.6, 0.0).unwrap();
        let (c0, c1) = (c(0.6, 0.), c(0., 0.8));
        let one = average_fidelity_montecarlo(c0, c1, &params, 1, 100, 7).unwrap();
        assert!((one.mean - 1.0).abs() < 1e-15);
        assert_eq!(one.std_error, Some(0.0));

        let exact = average_fidelity_exact(c0, c1, params.cos_phi(), 6).unwrap().mean;
        let mc = average_fidelity_montecarlo(c0, c1, &params, 6, 100_000, 42).unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.std_error.unwrap());

        let params = CanonicalChannelParams::new(0.9f64.acos(), 0.0).unwrap();
        let closed = average_fidelity_closed(c(0., 0.), c(1., 0.), 0.9, 20).unwrap().mean;
        let mc = average_fidelity_montecarlo(c(0., 0.), c(1., 0.), &params, 20, 100_000, 3).unwrap();
        assert!((mc.mean - closed).abs() <= 4.0 * mc.std_error.unwrap());

        assert!(average_fidelity_montecarlo(c0, c1, &params, 4, 0, 1).is_err());
        let twisted = CanonicalChannelParams::new(0.6, 0.3).unwrap();
        assert!(matches!(
            average_fidelity_montecarlo(c0, c1, &twisted, DENSE_PURE_LIMIT + 1, 10, 1),
            Err(Error::LimitExceeded { .. })
        ));
    }

    #[test]
    fn montecarlo_with_theta_matches_simulated_enumeration() {
        let params = CanonicalChannelParams::new(0.7, 0.5).unwrap();
        let (c0, c1) = (c(0.6, 0.), c(0., 0.8));
        let exact = average_fidelity_simulated(c0, c1, &params, 4).unwrap().mean;
        let mc = average_fidelity_montecarlo(c0, c1, &params, 4, 4000, 11).unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.std_error.unwrap());
    }

    #[test]
    fn montecarlo_is_independent_of_worker_count() {
        let params = CanonicalChannelParams::new(0.4, 0.0).unwrap();
        let (c0, c1) = (c(0.6, 0.), c(0., 0.8));
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| average_fidelity_montecarlo(c0, c1, &params, 9, 20_000, 5).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.unwrap().to_bits(), b.std_error.unwrap().to_bits());
    }

    #[test]
    fn sampling_is_uniform() {
        let samples = 100_000u64;
        let mut counts = [0usize; 24];
        for i in 0..samples {
            counts[sample_permutation(4, 2024, i).rank()] += 1;
        }
        let p = 1.0 / 24.0;
        let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
        for count in counts {
            assert!((count as f64 - samples as f64 * p).abs() <= 5.0 * sigma);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_amplitudes() -> impl Strategy<Value = (C64, C64)> {
            (0.0f64..=1.0, -PI..PI, -PI..PI)
                .prop_map(|(r, a, b)| (C64::from_polar(r.sqrt(), a), C64::from_polar((1.0 - r).sqrt(), b)))
        }

        fn arb_permutation(max_n: usize) -> impl Strategy<Value = Permutation> {
            (1..=max_n).prop_flat_map(|n| Just((1..=n).collect::<Vec<_>>()).prop_shuffle()).prop_map(|v| Permutation::new(v).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn fidelity_is_a_probability((c0, c1) in arb_amplitudes(), pi in arb_permutation(12), c in 0.0f64..=1.0) {
                let n = pi.len();
                let f = fidelity_of(c0, c1, f_pi_closed(&pi, c, 0.0, n).unwrap()).unwrap();
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
                let id = fidelity_of(c0, c1, f_pi_closed(&Permutation::identity(n), c, 0.0, n).unwrap()).unwrap();
                prop_assert!((id - 1.0).abs() < 1e-12);
            }

            #[test]
            fn closed_f_pi_matches_simulation((c0, c1) in arb_amplitudes(), pi in arb_permutation(8), phi in 0.0..=FRAC_PI_2) {
                let n = pi.len();
                let params = CanonicalChannelParams::new(phi, 0.0).unwrap();
                let sim = scramble_simulate(c0, c1, &params, &pi, n).unwrap();
                prop_assert!((sim.f_pi - f_pi_closed(&pi, phi.cos(), 0.0, n).unwrap()).norm() < 1e-12);
            }

            #[test]
            fn simulated_fidelity_is_a_probability((c0, c1) in arb_amplitudes(), pi in arb_permutation(7), phi in 0.0..=FRAC_PI_2, theta in -PI..PI) {
                let params = CanonicalChannelParams::new(phi, theta).unwrap();
                let f = scramble_simulate(c0, c1, &params, &pi, pi.len()).unwrap().fidelity;
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            }

            #[test]
            fn rank_round_trips(pi in arb_permutation(9)) {
                prop_assert_eq!(Permutation::from_rank(pi.len(), pi.rank()).unwrap(), pi.clone());
                prop_assert!(pi.inverse().inverse() == pi);
            }

            #[test]
            fn exact_average_matches_closed_form((c0, c1) in arb_amplitudes(), c in 0.0f64..=1.0, n in 1usize..=7) {
                let exact = average_fidelity_exact(c0, c1, c, n).unwrap().mean;
                let closed = average_fidelity_closed(c0, c1, c, n).unwrap().mean;
                prop_assert!((exact - closed).abs() < 1e-10);
            }
        }
    }
}
