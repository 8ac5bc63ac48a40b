//! Multipartite entanglement of pure multi-qubit states,
//!
//! ```text
//! E_m = 2^{1 - m/2} sqrt(2^m - 2 - S_m)
//! ```
//!
//! where `S_m` sums `Tr(rho_b^2)` over every nonempty proper subset `b` of the
//! `m` qubits. A product state has every purity equal to one and `E_m = 0`.
//!
//! For the zero-temperature collision state with input `c0|0> + c1|1>` there
//! are two closed forms here:
//!
//! * [`entanglement_closed_form`],
//!   `2|c1| sqrt((1 - c^{2n}) (1 - |c1|^2 (1 - c^{2(n+1)}) / (1 + c^2)))`;
//! * [`entanglement_closed_form_corrected`], `2|c1|^2 c sqrt((1 - c^{4n}) / (1 + c^2))`.
//!
//! The two coincide for `|c1|` in {0, 1}. For `0 < |c1| < 1` only the
//! corrected one agrees with [`entanglement_bruteforce`]: each reduced state
//! `rho_{S,b} = |v><v| + x_b |0..0><0..0|` has purity
//! `(1 - x_b)^2 + x_b^2 + 2 x_b |c0|^2`, because `|v>` overlaps `|0..0>` with
//! amplitude `c0 e^{i n theta}`; the first form omits the last term.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::{PureState, C64, TOL_VALIDATE};
use crate::sum::compensated_sum;

/// Largest register accepted by [`entanglement_bruteforce`].
pub const BRUTE_FORCE_QUBIT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntanglementMethod {
    BruteForce,
    ClosedForm,
    CorrectedClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementResult {
    pub value: f64,
    pub num_qubits: usize,
    pub method: EntanglementMethod,
}

/// `2^{1 - m/2} sqrt(2^m - 2 - S_m)`, clamped at zero against rounding.
pub fn measure_from_purity_sum(num_qubits: usize, purity_sum: f64) -> f64 {
    let m = num_qubits as i32;
    let deficit = (2f64.powi(m) - 2.0 - purity_sum).max(0.0);
    2f64.powf(1.0 - m as f64 / 2.0) * deficit.sqrt()
}

/// `S_m`: purities of all `2^m - 2` nonempty proper subsets.
///
/// Subsets come in complementary pairs with equal purity, so only the
/// `2^{m-1} - 1` subsets containing qubit 0 are evaluated, each from the
/// smaller side of its bipartition. Terms are reduced in mask order.
pub fn subset_purity_sum(psi: &PureState) -> Result<f64> {
    let m = psi.num_qubits();
    if m > BRUTE_FORCE_QUBIT_LIMIT {
        return Err(Error::LimitExceeded { what: "qubits", limit: BRUTE_FORCE_QUBIT_LIMIT, got: m });
    }
    if m < 2 {
        return Ok(0.0);
    }
    let bath_masks = 0..(1usize << (m - 1)) - 1;
    let terms: Vec<f64> = bath_masks
        .into_par_iter()
        .map(|mask| {
            let side: Vec<usize> = std::iter::once(0)
                .chain((1..m).filter(|q| mask >> (q - 1) & 1 == 1))
                .collect();
            psi.subset_purity(&side).expect("valid subset")
        })
        .collect();
    Ok(2.0 * compensated_sum(terms))
}

/// Brute-force evaluation over all bipartitions.
pub fn entanglement_bruteforce(psi: &PureState) -> Result<EntanglementResult> {
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > TOL_VALIDATE {
        return Err(Error::InvalidState(format!("squared norm {norm} differs from 1")));
    }
    let m = psi.num_qubits();
    let s = subset_purity_sum(psi)?;
    Ok(EntanglementResult { value: measure_from_purity_sum(m, s), num_qubits: m, method: EntanglementMethod::BruteForce })
}

fn check_closed_form_inputs(c1_abs: f64, c: f64, n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&c1_abs) {
        return Err(Error::InvalidParameter(format!("|c1| = {c1_abs} is not in [0, 1]")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!("c = {c} is not in [0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// Closed form for the state after `n` zero-temperature collisions,
/// `c = cos(phi)`. Exact only for `|c1|` in {0, 1}; see the module docs.
pub fn entanglement_closed_form(c1_abs: f64, c: f64, n: usize) -> Result<EntanglementResult> {
    check_closed_form_inputs(c1_abs, c, n)?;
    let c2 = c * c;
    let c2n = c2.powi(n as i32);
    let weight = 1.0 - c1_abs * c1_abs * (1.0 - c2n * c2) / (1.0 + c2);
    let value = 2.0 * c1_abs * ((1.0 - c2n) * weight).max(0.0).sqrt();
    Ok(EntanglementResult { value, num_qubits: n + 1, method: EntanglementMethod::ClosedForm })
}

/// Closed form including the `2 x_b |c0|^2` purity term:
/// `E_{n+1} = 2 |c1|^2 c sqrt((1 - c^{4n}) / (1 + c^2))`.
pub fn entanglement_closed_form_corrected(c1_abs: f64, c: f64, n: usize) -> Result<EntanglementResult> {
    check_closed_form_inputs(c1_abs, c, n)?;
    let c2 = c * c;
    let value = 2.0 * c1_abs * c1_abs * c * ((1.0 - c2.powi(2 * n as i32)) / (1.0 + c2)).max(0.0).sqrt();
    Ok(EntanglementResult { value, num_qubits: n + 1, method: EntanglementMethod::CorrectedClosedForm })
}

/// `sum_{k=0}^{n-1} sum_{k' != k} x^{k+k'} = 2x(1 - x^{n-1})(1 - x^n) / ((1-x)^2 (1+x))`.
///
/// Requires `0 <= x < 1`; at `x = 1` the sum is `n(n-1)`.
pub fn geometric_pair_sum(x: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "x = {x} is outside [0, 1); at x = 1 the sum is n(n-1)"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let n = n as i32;
    Ok(2.0 * x * (1.0 - x.powi(n - 1)) * (1.0 - x.powi(n)) / ((1.0 - x).powi(2) * (1.0 + x)))
}

/// Value of the measure on the `(n+1)`-qubit GHZ state, `sqrt(2) sqrt(1 - 2^{-n})`.
pub fn ghz_reference(n: usize) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 - 0.5f64.powi(n as i32)).sqrt()
}

/// `(|0...0> + |1...1>) / sqrt(2)`.
pub fn ghz_state(num_qubits: usize) -> PureState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << num_qubits];
    amps[0] = C64::new(h, 0.0);
    amps[(1 << num_qubits) - 1] = C64::new(h, 0.0);
    PureState::new(amps).expect("normalized")
}
