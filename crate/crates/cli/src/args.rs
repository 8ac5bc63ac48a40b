//! Argument groups shared by several subcommands and their resolution into
//! validated library types.

use clap::Args;
use collision_core::channel::{BathSpec, CanonicalChannelParams, QubitState};
use collision_core::quantum::C64;
use serde_json::{Map, Value};

use crate::Failure;

/// Tolerance on user-supplied normalization and positivity.
pub const INPUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Args)]
pub struct AngleArgs {
    /// Swap angle phi in [0, pi/2]
    #[arg(long)]
    pub phi: f64,
    /// Phase angle theta
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
}

impl AngleArgs {
    pub fn resolve(&self) -> Result<CanonicalChannelParams, Failure> {
        Ok(CanonicalChannelParams::new(self.phi, self.theta)?)
    }

    pub fn record(&self, params: &mut Map<String, Value>) {
        params.insert("phi".into(), self.phi.into());
        params.insert("theta".into(), self.theta.into());
    }
}

/// Bath temperature, as the ground-state weight or as beta*E. Defaults to
/// zero temperature (p = 1).
#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct TemperatureArgs {
    /// Ground-state population of each bath qubit
    #[arg(long)]
    pub p: Option<f64>,
    /// Inverse temperature times the level splitting; p = (1 + tanh(beta_e)) / 2
    #[arg(long, allow_negative_numbers = true)]
    pub beta_e: Option<f64>,
}

impl TemperatureArgs {
    pub fn resolve(&self) -> Result<BathSpec, Failure> {
        Ok(match (self.p, self.beta_e) {
            (Some(p), _) => BathSpec::new(p)?,
            (None, Some(b)) => BathSpec::from_beta_e(b)?,
            (None, None) => BathSpec::zero_temperature(),
        })
    }

    pub fn record(bath: &BathSpec, params: &mut Map<String, Value>) {
        params.insert("p".into(), bath.p().into());
        if let Some(b) = bath.beta_e() {
            params.insert("beta_e".into(), b.into());
        }
    }
}

/// Pure input `c0|0> + c1|1>`. A missing amplitude is taken real and
/// non-negative so that the state is normalized; with neither given the
/// input is `|1>`.
#[derive(Debug, Clone, Args)]
pub struct AmplitudeArgs {
    /// Real amplitude of |0> (same as --c0-re with --c0-im 0)
    #[arg(long, conflicts_with_all = ["c0_re", "c0_im"], allow_negative_numbers = true)]
    pub c0: Option<f64>,
    /// Real amplitude of |1> (same as --c1-re with --c1-im 0)
    #[arg(long, conflicts_with_all = ["c1_re", "c1_im"], allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0_im: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1_im: Option<f64>,
}

fn complex_from(short: Option<f64>, re: Option<f64>, im: Option<f64>) -> Option<C64> {
    if short.is_none() && re.is_none() && im.is_none() {
        return None;
    }
    Some(C64::new(short.or(re).unwrap_or(0.0), im.unwrap_or(0.0)))
}

fn complement(z: C64, name: &str) -> Result<f64, Failure> {
    let w = z.norm_sqr();
    if w.is_nan() || w > 1.0 + INPUT_TOL {
        return Err(Failure::Usage(format!("|{name}|^2 = {w} exceeds 1")));
    }
    Ok((1.0 - w).max(0.0).sqrt())
}

impl AmplitudeArgs {
    pub fn resolve(&self) -> Result<(C64, C64), Failure> {
        let c0 = complex_from(self.c0, self.c0_re, self.c0_im);
        let c1 = complex_from(self.c1, self.c1_re, self.c1_im);
        let (c0, c1) = match (c0, c1) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, C64::new(complement(a, "c0")?, 0.0)),
            (None, Some(b)) => (C64::new(complement(b, "c1")?, 0.0), b),
            (None, None) => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        };
        let norm = c0.norm_sqr() + c1.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > INPUT_TOL {
            return Err(Failure::Usage(format!("|c0|^2 + |c1|^2 = {norm} differs from 1 by more than {INPUT_TOL}")));
        }
        let scale = norm.sqrt();
        Ok((c0 / scale, c1 / scale))
    }

    pub fn record(c0: C64, c1: C64, params: &mut Map<String, Value>) {
        params.insert("c0_re".into(), c0.re.into());
        params.insert("c0_im".into(), c0.im.into());
        params.insert("c1_re".into(), c1.re.into());
        params.insert("c1_im".into(), c1.im.into());
    }
}

/// Mixed input through the population `d` of |0> and the coherence `k`.
#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    /// Population of |0>
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Real part of the coherence <0|rho|1>
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub k_re: f64,
    /// Imaginary part of the coherence <0|rho|1>
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub k_im: f64,
}

impl DensityArgs {
    pub fn resolve(&self) -> Result<QubitState, Failure> {
        let (d, k) = (self.d, C64::new(self.k_re, self.k_im));
        if !(-INPUT_TOL..=1.0 + INPUT_TOL).contains(&d) {
            return Err(Failure::Usage(format!("d = {d} is not in [0, 1]")));
        }
        let d = d.clamp(0.0, 1.0);
        let bound = d * (1.0 - d);
        if k.norm_sqr().is_nan() || k.norm_sqr() > bound + INPUT_TOL {
            return Err(Failure::Usage(format!("|k|^2 = {} exceeds d(1-d) = {bound}", k.norm_sqr())));
        }
        let k = if k.norm_sqr() > bound { k * (bound.sqrt() / k.norm()) } else { k };
        Ok(QubitState::new(d, k)?)
    }

    pub fn record(state: &QubitState, params: &mut Map<String, Value>) {
        params.insert("d".into(), state.d().into());
        params.insert("k_re".into(), state.k().re.into());
        params.insert("k_im".into(), state.k().im.into());
    }
}

/// Inclusive range `A..B` (or `A..=B`), or a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

impl NRange {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }
}

impl std::fmt::Display for NRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

pub fn parse_n_range(s: &str) -> Result<NRange, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (start, end) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if start == 0 || end < start {
        return Err(format!("need 1 <= start <= end, got {start}..{end}"));
    }
    Ok(NRange { start, end })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amps(c0: Option<f64>, c1: Option<f64>) -> AmplitudeArgs {
        AmplitudeArgs { c0, c1, c0_re: None, c0_im: None, c1_re: None, c1_im: None }
    }

    #[test]
    fn amplitude_resolution() {
        assert_eq!(amps(None, None).resolve().unwrap(), (C64::new(0., 0.), C64::new(1., 0.)));
        assert_eq!(amps(Some(0.0), None).resolve().unwrap(), (C64::new(0., 0.), C64::new(1., 0.)));
        assert_eq!(amps(None, Some(0.0)).resolve().unwrap(), (C64::new(1., 0.), C64::new(0., 0.)));
        let (c0, c1) = amps(Some(0.6), Some(0.8 + 1e-10)).resolve().unwrap();
        assert!((c0.norm_sqr() + c1.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(amps(Some(0.6), Some(0.7)).resolve().is_err());
        assert!(amps(Some(1.1), None).resolve().is_err());

        let mut a = amps(None, None);
        a.c0_im = Some(0.6);
        a.c1_re = Some(-0.8);
        assert_eq!(a.resolve().unwrap(), (C64::new(0., 0.6), C64::new(-0.8, 0.)));
    }

    #[test]
    fn density_resolution() {
        let ok = DensityArgs { d: 0.5, k_re: 0.5, k_im: 0.0 }.resolve().unwrap();
        assert_eq!(ok.k().re, 0.5);
        assert!(DensityArgs { d: 0.2, k_re: 0.5, k_im: 0.0 }.resolve().is_err());
        assert!(DensityArgs { d: 1.5, k_re: 0.0, k_im: 0.0 }.resolve().is_err());
    }

    #[test]
    fn n_ranges() {
        assert_eq!(parse_n_range("6").unwrap(), NRange { start: 6, end: 6 });
        assert_eq!(parse_n_range("10..100").unwrap(), NRange { start: 10, end: 100 });
        assert_eq!(parse_n_range("2..=4").unwrap(), NRange { start: 2, end: 4 });
        assert!(parse_n_range("0..3").is_err());
        assert!(parse_n_range("5..3").is_err());
        assert!(parse_n_range("x").is_err());
    }
}
