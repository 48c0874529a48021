//! Divisibility of the reduced map and its sufficient conditions.
//!
//! The residual compares `C(t,t0)` with the composition of the two segment
//! maps `C(ts,t0)·C(t,ts)` (row-vector convention, see [`crate::dynamics`]).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_map, compute_supermatrix, entangled_reduced_state, supermatrix_from_propagator};
use crate::error::{Error, Result};
use crate::linalg::{
    fro_norm, hermiticity_deviation, identity, max_abs, partial_trace, ComplexMatrix, Subsystem, ZERO,
};
use crate::model::{env_coupling_commutator, initial_density, random_model, InitialState, Propagator, SystemSpec};
use crate::parallel::{try_map, Execution};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionTag {
    SingleEnvState,
    EqualWeights,
    #[serde(rename = "commuting_HE_HSE")]
    CommutingHeHse,
    EntangledReduced,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Divisible,
    Violated,
}

impl Verdict {
    pub fn from_residual(residual: f64, threshold: f64) -> Self {
        if residual <= threshold {
            Verdict::Divisible
        } else {
            Verdict::Violated
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Divisible => "divisible",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityReport {
    pub t0: f64,
    pub ts: f64,
    pub t: f64,
    pub residual: f64,
    pub residual_fro: f64,
    pub verdict: Verdict,
    pub condition_tags: BTreeSet<ConditionTag>,
}

impl DivisibilityReport {
    fn from_difference(
        t0: f64,
        ts: f64,
        t: f64,
        diff: &ComplexMatrix,
        mut tags: BTreeSet<ConditionTag>,
        tol: &ToleranceConfig,
    ) -> Self {
        let residual = max_abs(diff);
        if tags.is_empty() {
            tags.insert(ConditionTag::None);
        }
        Self {
            t0,
            ts,
            t,
            residual,
            residual_fro: fro_norm(diff),
            verdict: Verdict::from_residual(residual, tol.divisibility_threshold),
            condition_tags: tags,
        }
    }
}

fn check_order(t0: f64, ts: f64, t: f64) -> Result<()> {
    if !(t0 <= ts && ts <= t) || ![t0, ts, t].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput(format!("times must satisfy t0 <= ts <= t, got ({t0}, {ts}, {t})")));
    }
    Ok(())
}

fn spec_tags(spec: &SystemSpec, weights: &ComplexMatrix, tol: &ToleranceConfig) -> Result<BTreeSet<ConditionTag>> {
    let mut tags = BTreeSet::new();
    if certify_single_env_state(weights) {
        tags.insert(ConditionTag::SingleEnvState);
    }
    if commutation_certificate(spec, tol)?.0 {
        tags.insert(ConditionTag::CommutingHeHse);
    }
    Ok(tags)
}

/// Residual of `C(t,t0) = C(ts,t0)·C(t,ts)` with the same weights on both segments.
pub fn composition_residual(
    spec: &SystemSpec,
    weights: &ComplexMatrix,
    t0: f64,
    ts: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<DivisibilityReport> {
    check_order(t0, ts, t)?;
    let prop = Propagator::for_spec(spec, tol)?;
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let full = supermatrix_from_propagator(&prop, d_s, d_e, weights, t0, t)?;
    let first = supermatrix_from_propagator(&prop, d_s, d_e, weights, t0, ts)?;
    let second = supermatrix_from_propagator(&prop, d_s, d_e, weights, ts, t)?;
    let composed = first.then(&second)?;
    let diff = full.matrix - composed.matrix;
    Ok(DivisibilityReport::from_difference(t0, ts, t, &diff, spec_tags(spec, weights, tol)?, tol))
}

/// Diagnostic variant: the second segment is weighted by the evolved
/// environment marginal `Tr_S ρ(ts)` instead of the initial weights.
pub fn composition_residual_evolved_env(
    spec: &SystemSpec,
    initial: &InitialState,
    t0: f64,
    ts: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<DivisibilityReport> {
    check_order(t0, ts, t)?;
    let InitialState::Product { env_weights, .. } = initial else {
        return Err(Error::NotProduct);
    };
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let prop = Propagator::for_spec(spec, tol)?;
    let rho0 = initial_density(initial, d_s, d_e, tol)?;
    let rho_ts = prop.evolve_density(&rho0, ts - t0);
    let env_ts = partial_trace(&rho_ts, d_s, d_e, Subsystem::Environment)?;
    let full = supermatrix_from_propagator(&prop, d_s, d_e, env_weights, t0, t)?;
    let first = supermatrix_from_propagator(&prop, d_s, d_e, env_weights, t0, ts)?;
    let second = supermatrix_from_propagator(&prop, d_s, d_e, &env_ts, ts, t)?;
    let diff = full.matrix - first.then(&second)?.matrix;
    Ok(DivisibilityReport::from_difference(t0, ts, t, &diff, spec_tags(spec, env_weights, tol)?, tol))
}

/// True iff `d` is a single basis projector `|η⟩⟨η|` (within 1e-12).
pub fn certify_single_env_state(d: &ComplexMatrix) -> bool {
    const TOL: f64 = 1e-12;
    if !d.is_square() {
        return false;
    }
    let n = d.nrows();
    let mut ones = 0;
    for r in 0..n {
        for c in 0..n {
            let z = d[(r, c)];
            if r != c {
                if z.norm() > TOL {
                    return false;
                }
            } else if (z - crate::linalg::ONE).norm() <= TOL {
                ones += 1;
            } else if z.norm() > TOL {
                return false;
            }
        }
    }
    ones == 1
}

/// True iff `|c_i|² = 1/n` for every system amplitude and `d = I/N` (within 1e-10).
pub fn certify_equal_weights(state: &InitialState) -> Result<bool> {
    const TOL: f64 = 1e-10;
    let InitialState::Product { amplitudes, env_weights } = state else {
        return Err(Error::WrongKind { expected: "product" });
    };
    let n = amplitudes.len() as f64;
    if amplitudes.iter().any(|c| (c.norm_sqr() - 1.0 / n).abs() > TOL) {
        return Ok(false);
    }
    let big_n = env_weights.nrows();
    let target = identity(big_n) * crate::linalg::c64(1.0 / big_n as f64, 0.0);
    Ok(env_weights.is_square() && max_abs(&(env_weights - target)) <= TOL)
}

/// `(‖[I⊗H_E, H_SE]‖_max < tol.commutator, ‖[I⊗H_E, H_SE]‖_max)`.
pub fn commutation_certificate(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<(bool, f64)> {
    let norm = env_coupling_commutator(spec, tol)?;
    Ok((norm < tol.commutator, norm))
}

/// Both sides of the equal-weight identity and their max-abs difference.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualWeightIdentity {
    pub lhs: ComplexMatrix,
    pub rhs: ComplexMatrix,
    pub residual: f64,
}

/// Evaluates, as explicit sums over unitary matrix elements,
///
/// ```text
/// LHS[k1,k2] = 1/(N n)  Σ_{i,α,γ} ⟨k1 γ|U(t,t0)|i α⟩ conj⟨k2 γ|U(t,t0)|i α⟩
/// RHS[k1,k2] = 1/(N² n) Σ_{j1,j2,β,δ} ⟨k1 δ|U(t,ts)|j1 β⟩ conj⟨k2 δ|U(t,ts)|j2 β⟩
///                       · Σ_{i,α,γ} ⟨j1 γ|U(ts,t0)|i α⟩ conj⟨j2 γ|U(ts,t0)|i α⟩
/// ```
///
/// for populations `|c_i|² = 1/n` and weights `d = I/N`. Both sides reduce to `δ_{k1 k2}/n`.
pub fn equal_weight_identity(
    spec: &SystemSpec,
    t0: f64,
    ts: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<EqualWeightIdentity> {
    check_order(t0, ts, t)?;
    let prop = Propagator::for_spec(spec, tol)?;
    let (n, big_n) = (spec.d_s(), spec.d_e());
    let idx = |s: usize, e: usize| s * big_n + e;
    let u_full = prop.unitary(t - t0);
    let u_late = prop.unitary(t - ts);
    let u_early = prop.unitary(ts - t0);

    // inner[j1,j2] = Σ_{i,α,γ} ⟨j1 γ|U|i α⟩ conj⟨j2 γ|U|i α⟩
    let inner = |u: &ComplexMatrix| {
        ComplexMatrix::from_fn(n, n, |j1, j2| {
            let mut acc = ZERO;
            for i in 0..n {
                for a in 0..big_n {
                    for g in 0..big_n {
                        acc += u[(idx(j1, g), idx(i, a))] * u[(idx(j2, g), idx(i, a))].conj();
                    }
                }
            }
            acc
        })
    };
    let scale_l = 1.0 / (big_n as f64 * n as f64);
    let lhs = inner(&u_full) * crate::linalg::c64(scale_l, 0.0);
    let mid = inner(&u_early);
    let scale_r = 1.0 / ((big_n * big_n) as f64 * n as f64);
    let rhs = ComplexMatrix::from_fn(n, n, |k1, k2| {
        let mut acc = ZERO;
        for j1 in 0..n {
            for j2 in 0..n {
                let mut outer = ZERO;
                for b in 0..big_n {
                    for dl in 0..big_n {
                        outer += u_late[(idx(k1, dl), idx(j1, b))] * u_late[(idx(k2, dl), idx(j2, b))].conj();
                    }
                }
                acc += outer * mid[(j1, j2)];
            }
        }
        acc * scale_r
    });
    let residual = max_abs(&(&lhs - &rhs));
    Ok(EqualWeightIdentity { lhs, rhs, residual })
}

/// Compares the exact `ρ_S(t)` of an initially entangled pure state with the
/// two-step route `ρ_S(ts) → C_w(t,ts)`, where `w` is the initial environment
/// marginal. When the amplitudes occupy a single environment state the report
/// carries the `entangled_reduced` tag.
pub fn entangled_divisibility_check(
    spec: &SystemSpec,
    amplitudes: &ComplexMatrix,
    t0: f64,
    ts: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<DivisibilityReport> {
    check_order(t0, ts, t)?;
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let state = InitialState::entangled(amplitudes.clone());
    state.validate(d_s, d_e, tol)?;
    let prop = Propagator::for_spec(spec, tol)?;
    let exact_t = entangled_reduced_state(&prop.unitary(t - t0), amplitudes);
    let exact_ts = entangled_reduced_state(&prop.unitary(ts - t0), amplitudes);
    let weights = state.env_density();
    let late = supermatrix_from_propagator(&prop, d_s, d_e, &weights, ts, t)?;
    let two_step = apply_map(&late, &exact_ts)?;
    let mut tags = spec_tags(spec, &weights, tol)?;
    if single_env_support(amplitudes).is_some() {
        tags.insert(ConditionTag::EntangledReduced);
    }
    Ok(DivisibilityReport::from_difference(t0, ts, t, &(two_step - exact_t), tags, tol))
}

/// The environment index `η` if all amplitudes vanish outside column `η`.
pub fn single_env_support(amplitudes: &ComplexMatrix) -> Option<usize> {
    let occupied: Vec<usize> = (0..amplitudes.ncols())
        .filter(|&a| amplitudes.column(a).iter().any(|z| z.norm() > 1e-14))
        .collect();
    match occupied.as_slice() {
        [eta] => Some(*eta),
        _ => None,
    }
}

/// `ρ_S[j1,j2] = Σ a_{i1 η} conj(a_{i2 η}) ⟨j1 η|U|i1 η⟩ conj⟨j2 η|U|i2 η⟩`.
pub fn single_env_reduced_state(
    spec: &SystemSpec,
    amplitudes: &ComplexMatrix,
    eta: usize,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    if amplitudes.shape() != (d_s, d_e) || eta >= d_e {
        return Err(Error::Shape(format!("amplitudes must be {d_s}x{d_e} and η < {d_e}")));
    }
    let u = Propagator::for_spec(spec, tol)?.unitary(t - t0);
    let idx = |s: usize, e: usize| s * d_e + e;
    Ok(ComplexMatrix::from_fn(d_s, d_s, |j1, j2| {
        let mut left = ZERO;
        let mut right = ZERO;
        for i in 0..d_s {
            left += amplitudes[(i, eta)] * u[(idx(j1, eta), idx(i, eta))];
            right += amplitudes[(i, eta)] * u[(idx(j2, eta), idx(i, eta))];
        }
        left * right.conj()
    }))
}

/// Interior points `t0 + T·{1/8, 1/4, 1/2}` over the horizon `T = t - t0`.
pub fn certification_triples(t0: f64, t: f64) -> Vec<(f64, f64, f64)> {
    let horizon = t - t0;
    [0.125, 0.25, 0.5].iter().map(|f| (t0, t0 + f * horizon, t)).collect()
}

/// Sweep request over seeded random models.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
    pub d_s: usize,
    pub d_e: usize,
    pub coupling: f64,
    pub t0: f64,
    pub t1: f64,
    pub commuting_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub d_s: usize,
    pub d_e: usize,
    pub coupling: f64,
    pub commuting: bool,
    pub report: DivisibilityReport,
}

/// One row per `(seed, commuting flag)`, keeping the worst certification triple.
/// The environment starts in the ground state of `H_E`.
pub fn divisibility_sweep(cfg: &SweepConfig, exec: Execution, tol: &ToleranceConfig) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(u64, bool)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.commuting_flags.iter().map(move |&c| (s, c)))
        .collect();
    try_map(exec, &jobs, |&(seed, commuting)| {
        let spec = random_model(seed, cfg.d_s, cfg.d_e, cfg.coupling, commuting, tol)?;
        let weights = spec.env_eigenstate_weights(0)?;
        let mut worst: Option<DivisibilityReport> = None;
        for (t0, ts, t) in certification_triples(cfg.t0, cfg.t1) {
            let rep = composition_residual(&spec, &weights, t0, ts, t, tol)?;
            if worst.as_ref().is_none_or(|w| rep.residual > w.residual) {
                worst = Some(rep);
            }
        }
        let report = worst.ok_or(Error::EmptyGrid)?;
        Ok(SweepRow { seed, d_s: cfg.d_s, d_e: cfg.d_e, coupling: cfg.coupling, commuting, report })
    })
}

pub fn sweep_table(rows: &[SweepRow]) -> CsvTable {
    let mut table = CsvTable::new([
        "seed",
        "d_S",
        "d_E",
        "coupling",
        "commuting_flag",
        "t0",
        "ts",
        "t",
        "residual",
        "verdict",
    ]);
    for row in rows {
        table.push(vec![
            row.seed.to_string(),
            row.d_s.to_string(),
            row.d_e.to_string(),
            fmt_f64(row.coupling),
            row.commuting.to_string(),
            fmt_f64(row.report.t0),
            fmt_f64(row.report.ts),
            fmt_f64(row.report.t),
            fmt_f64(row.report.residual),
            row.report.verdict.as_str().to_string(),
        ]);
    }
    table
}

/// Supermatrix at `t` for the default weights of a product state.
pub fn product_state_map(
    spec: &SystemSpec,
    initial: &InitialState,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<crate::dynamics::SuperMatrix> {
    let InitialState::Product { env_weights, .. } = initial else {
        return Err(Error::NotProduct);
    };
    if hermiticity_deviation(env_weights) > tol.normalization {
        return Err(Error::NotHermitian { deviation: hermiticity_deviation(env_weights) });
    }
    compute_supermatrix(spec, env_weights, t0, t, tol)
}
