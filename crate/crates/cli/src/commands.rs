//! The table-producing subcommands.

use clap::{Args, ValueEnum};
use collision_core::bath_sim::simulate_sparse_t0;
use collision_core::channel::{
    closed_form_state, decompose_partial_swap, iterate_channel, lambda_of, rates_from_params, verify_fixed_point,
    Interaction,
};
use collision_core::entanglement::{
    entanglement_bruteforce, entanglement_closed_form, entanglement_closed_form_corrected, ghz_reference,
    BRUTE_FORCE_QUBIT_LIMIT,
};
use collision_core::irreversibility::{
    average_fidelity_asymptotic, average_fidelity_closed, average_fidelity_exact, average_fidelity_montecarlo,
    average_fidelity_simulated, AverageFidelity,
};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::args::{parse_n_range, AmplitudeArgs, AngleArgs, DensityArgs, NRange, TemperatureArgs, INPUT_TOL};
use crate::table::{Column, ResultTable};
use crate::Failure;

/// Adds the resolved parameters to the metadata and starts the table.
fn table(mut meta: Map<String, Value>, params: Map<String, Value>) -> ResultTable {
    meta.insert("parameters".into(), Value::Object(params));
    ResultTable::new(meta)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct ThermalizeArgs {
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    #[command(flatten)]
    pub input: DensityArgs,
    /// Number of collisions; rows run from 0 to n
    #[arg(long)]
    pub n: usize,
}

/// Closed-form trajectory, cross-checked against step-by-step iteration.
pub fn thermalize(args: &ThermalizeArgs, meta: Map<String, Value>) -> Result<ResultTable, Failure> {
    let params = args.angles.resolve()?;
    let bath = args.temperature.resolve()?;
    let input = args.input.resolve()?;

    let mut recorded = Map::new();
    args.angles.record(&mut recorded);
    TemperatureArgs::record(&bath, &mut recorded);
    DensityArgs::record(&input, &mut recorded);
    recorded.insert("n".into(), args.n.into());

    let xi = bath.thermal_state();
    let steps = iterate_channel(&input, &params, &bath, args.n);
    let tol = 1e-12 + 8.0 * args.n as f64 * f64::EPSILON;
    let mut rows = Vec::with_capacity(args.n + 1);
    for &(n, stepped) in steps.entries() {
        let closed = closed_form_state(&input, &params, &bath, n);
        let gap = (closed.d() - stepped.d()).abs().max((closed.k() - stepped.k()).norm());
        if gap.is_nan() || gap > tol {
            return Err(Failure::Check(format!(
                "closed form and iteration differ by {gap:.3e} at n = {n} (tolerance {tol:.1e})"
            )));
        }
        rows.push((n, closed, closed.trace_distance(&xi)));
    }

    let mut t = table(meta, recorded);
    t.push("n", Column::Int(rows.iter().map(|r| r.0 as u64).collect()));
    t.push("d", Column::real(rows.iter().map(|r| r.1.d())));
    t.push("re_k", Column::real(rows.iter().map(|r| r.1.k().re)));
    t.push("im_k", Column::real(rows.iter().map(|r| r.1.k().im)));
    t.push("abs_k", Column::real(rows.iter().map(|r| r.1.k().norm())));
    t.push("dist_to_xi", Column::real(rows.iter().map(|r| r.2)));
    Ok(t)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct ChannelInfoArgs {
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    /// Duration of one collision, in the time unit of T1, T_pf and T2
    #[arg(long, default_value_t = 1.0)]
    pub tau0: f64,
}

/// Coherence multiplier, relaxation times and self-checks of one channel.
pub fn channel_info(args: &ChannelInfoArgs, meta: Map<String, Value>) -> Result<ResultTable, Failure> {
    let params = args.angles.resolve()?;
    let bath = args.temperature.resolve()?;
    let rates = rates_from_params(&params, &bath, args.tau0)?;

    let mut recorded = Map::new();
    args.angles.record(&mut recorded);
    TemperatureArgs::record(&bath, &mut recorded);
    recorded.insert("tau0".into(), args.tau0.into());

    let lambda = lambda_of(&params, &bath);
    let decomposition = decompose_partial_swap(&params);
    let values = [
        ("lambda_re", lambda.re),
        ("lambda_im", lambda.im),
        ("lambda_abs", lambda.norm()),
        ("T1", rates.t1),
        ("T_pf", rates.t_pf),
        ("T2", rates.t2),
        ("t2_identity_residual", rates.identity_residual(&bath)),
        ("cos_phi_bound", params.cos_phi()),
        ("decomposition_residual", decomposition.product_residual),
        ("commutation_residual", decomposition.commutation_residual),
        ("fixed_point_residual", verify_fixed_point(&params.unitary(), &bath)),
    ];
    let mut t = table(meta, recorded);
    for (name, value) in values {
        t.push(name, Column::real([value]));
    }
    Ok(t)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct EntangleArgs {
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub input: AmplitudeArgs,
    /// Bath ground-state population; the closed forms hold at p = 1 only
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Largest number of collisions
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
    /// Add a column computed from all bipartitions of the full state
    #[arg(long)]
    pub brute_force: bool,
}

/// Entanglement growth with the number of collisions at zero temperature.
pub fn entangle(args: &EntangleArgs, meta: Map<String, Value>) -> Result<ResultTable, Failure> {
    if args.p != 1.0 {
        return Err(Failure::Usage(format!("entangle requires p = 1 (zero temperature), got p = {}", args.p)));
    }
    if args.n_max == 0 {
        return Err(Failure::Usage("--n-max must be at least 1".into()));
    }
    if args.brute_force && args.n_max + 1 > BRUTE_FORCE_QUBIT_LIMIT {
        return Err(Failure::Usage(format!(
            "--brute-force handles at most {BRUTE_FORCE_QUBIT_LIMIT} qubits (n-max {}), got n-max {}",
            BRUTE_FORCE_QUBIT_LIMIT - 1,
            args.n_max
        )));
    }
    let params = args.angles.resolve()?;
    let (c0, c1) = args.input.resolve()?;
    let c = params.cos_phi();
    let c1_abs = c1.norm();

    let mut recorded = Map::new();
    args.angles.record(&mut recorded);
    recorded.insert("p".into(), args.p.into());
    AmplitudeArgs::record(c0, c1, &mut recorded);
    recorded.insert("n_max".into(), args.n_max.into());
    recorded.insert("brute_force".into(), args.brute_force.into());

    let ns: Vec<usize> = (1..=args.n_max).collect();
    let closed = ns.iter().map(|&n| entanglement_closed_form(c1_abs, c, n).map(|r| r.value)).collect::<Result<Vec<_>, _>>()?;
    let corrected = ns
        .iter()
        .map(|&n| entanglement_closed_form_corrected(c1_abs, c, n).map(|r| r.value))
        .collect::<Result<Vec<_>, _>>()?;

    let mut t = table(meta, recorded);
    t.push("n", Column::Int(ns.iter().map(|&n| n as u64).collect()));
    t.push("E_closed", Column::real(closed));
    t.push("E_corrected", Column::real(corrected));
    if args.brute_force {
        let brute = ns
            .iter()
            .map(|&n| {
                let psi = simulate_sparse_t0(c0, c1, &params, n)?.to_dense()?;
                entanglement_bruteforce(&psi).map(|r| r.value)
            })
            .collect::<Result<Vec<_>, _>>()?;
        t.push("E_bruteforce", Column::real(brute));
    }
    t.push("ghz_reference", Column::real(ns.iter().map(|&n| ghz_reference(n))));
    Ok(t)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScrambleMethod {
    /// Enumerate all n! permutations with the closed-form f_pi (theta = 0, n <= 8)
    Exact,
    /// Closed-form permutation average (theta = 0)
    Closed,
    /// Large-n form for input |1> (theta = 0, n >= 2)
    Asymptotic,
    /// Random permutations; seeded, any theta
    Montecarlo,
    /// Enumerate all n! permutations by state-vector simulation (any theta, n <= 8)
    Simulate,
}

#[derive(Debug, Clone, Args)]
pub struct ScrambleArgs {
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub input: AmplitudeArgs,
    #[arg(long, value_enum, default_value_t = ScrambleMethod::Closed)]
    pub method: ScrambleMethod,
    /// Number of bath qubits: a single value or an inclusive range A..B
    #[arg(long, value_parser = parse_n_range)]
    pub n: NRange,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

/// Permutation-averaged fidelity of the reconstructed input.
pub fn scramble(args: &ScrambleArgs, seed: u64, meta: Map<String, Value>) -> Result<ResultTable, Failure> {
    let params = args.angles.resolve()?;
    let (c0, c1) = args.input.resolve()?;
    let c = params.cos_phi();
    let method = args.method;
    let needs_theta_zero = matches!(method, ScrambleMethod::Exact | ScrambleMethod::Closed | ScrambleMethod::Asymptotic);
    if needs_theta_zero && params.theta() != 0.0 {
        return Err(Failure::Usage(format!(
            "method {} needs theta = 0; use simulate or montecarlo",
            method.to_possible_value().expect("named").get_name()
        )));
    }
    if method == ScrambleMethod::Asymptotic && c0.norm_sqr() > INPUT_TOL {
        return Err(Failure::Usage("method asymptotic describes the input |1>; pass --c0 0".into()));
    }

    let mut recorded = Map::new();
    args.angles.record(&mut recorded);
    AmplitudeArgs::record(c0, c1, &mut recorded);
    recorded.insert("method".into(), method.to_possible_value().expect("named").get_name().into());
    recorded.insert("n".into(), args.n.to_string().into());
    if method == ScrambleMethod::Montecarlo {
        recorded.insert("samples".into(), args.samples.into());
    }

    let run = |n: usize| -> Result<AverageFidelity, Failure> {
        Ok(match method {
            ScrambleMethod::Exact => average_fidelity_exact(c0, c1, c, n)?,
            ScrambleMethod::Closed => average_fidelity_closed(c0, c1, c, n)?,
            ScrambleMethod::Asymptotic => average_fidelity_asymptotic(c, n)?,
            ScrambleMethod::Montecarlo => average_fidelity_montecarlo(c0, c1, &params, n, args.samples, seed)?,
            ScrambleMethod::Simulate => average_fidelity_simulated(c0, c1, &params, n)?,
        })
    };
    // Each n is independent; results come back in n order.
    let results = args.n.iter().collect::<Vec<_>>().into_par_iter().map(run).collect::<Result<Vec<_>, _>>()?;

    let mut t = table(meta, recorded);
    t.push("n", Column::Int(args.n.iter().map(|n| n as u64).collect()));
    t.push("F_mean", Column::real(results.iter().map(|r| r.mean)));
    t.push("std_error", Column::Real(results.iter().map(|r| r.std_error).collect()));
    t.push("method", Column::Text(results.iter().map(|r| r.method.name().to_owned()).collect()));
    Ok(t)
}
