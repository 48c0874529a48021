//! Timescales, correlations and entropy diagnostics.
//!
//! Correlations use the interaction picture of the uncoupled Hamiltonian
//! `H₀ = H_S ⊗ I + I ⊗ H_E`, `H̃(s) = e^{iH₀s} H_SE e^{-iH₀s}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, hermitian_eigenvalues, identity, max_abs, op_norm_estimate, partial_trace, ComplexMatrix, HermitianMatrix,
    SpectralDecomposition, Subsystem, C64,
};
use crate::model::{build_total_hamiltonian, initial_density, InitialState, Propagator, SystemSpec};
use crate::parallel::{try_map, Execution};
use crate::random::random_hermitian;
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

/// Default constant in the entangling-rate bound.
pub const DEFAULT_SIE_CONSTANT: f64 = 2.0;

/// Slack added to the entangling-rate bound.
const SIE_SLACK: f64 = 1e-6;

/// Trace deviation tolerated by [`von_neumann_entropy`].
const ENTROPY_TRACE_TOL: f64 = 1e-8;

/// Interaction-picture coupling correlations for one model.
#[derive(Debug, Clone)]
pub struct CorrelationEngine {
    free: SpectralDecomposition,
    coupling: ComplexMatrix,
}

impl CorrelationEngine {
    pub fn new(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<Self> {
        Ok(Self { free: spec.free_hamiltonian(tol)?.spectral()?, coupling: spec.h_se().as_matrix().clone() })
    }

    /// `H̃(s)`.
    pub fn coupling_at(&self, s: f64) -> ComplexMatrix {
        if s == 0.0 {
            return self.coupling.clone();
        }
        let u = self.free.unitary(s);
        u.adjoint() * &self.coupling * u
    }

    /// `Tr[ρ₀ H̃(t) H̃(t')]`.
    pub fn correlation(&self, rho0: &ComplexMatrix, t: f64, tprime: f64) -> Result<C64> {
        if rho0.shape() != self.coupling.shape() {
            return Err(Error::Shape("state does not match the model dimension".into()));
        }
        Ok((rho0 * self.coupling_at(t) * self.coupling_at(tprime)).trace())
    }
}

/// `C(t, t') = Tr[ρ₀ H̃(t) H̃(t')]`.
pub fn env_correlation(spec: &SystemSpec, rho0: &ComplexMatrix, t: f64, tprime: f64, tol: &ToleranceConfig) -> Result<C64> {
    let tr = rho0.trace();
    if (tr - c64(1.0, 0.0)).norm() > tol.trace {
        return Err(Error::NotAState(format!("trace {tr}")));
    }
    CorrelationEngine::new(spec, tol)?.correlation(rho0, t, tprime)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    /// False when `|C|` never fell to `e^{-1}|C(0)|`; `tau` is then the grid maximum.
    pub decayed: bool,
}

/// First `τ` with `|C(τ)| ≤ e^{-1}|C(τ₀)|`, linearly interpolated between samples.
pub fn estimate_tau_e(taus: &[f64], values: &[C64]) -> Result<TauEstimate> {
    if taus.is_empty() || values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if taus.len() != values.len() {
        return Err(Error::Shape(format!("{} times but {} samples", taus.len(), values.len())));
    }
    let c0 = values[0].norm();
    if !(c0 > 0.0) {
        return Err(Error::InvalidInput("correlation vanishes at the first grid point".into()));
    }
    let level = c0 * (-1.0f64).exp();
    for k in 1..taus.len() {
        let (a, b) = (values[k - 1].norm(), values[k].norm());
        if b <= level {
            let frac = if a == b { 0.0 } else { (a - level) / (a - b) };
            return Ok(TauEstimate { tau: taus[k - 1] + frac * (taus[k] - taus[k - 1]), decayed: true });
        }
    }
    Ok(TauEstimate { tau: *taus.last().unwrap(), decayed: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimescaleReport {
    pub tau_e: f64,
    pub tau_s: f64,
    pub coupling_norm: f64,
    pub markov_ratio: f64,
    pub decayed: bool,
}

impl TimescaleReport {
    /// `τ_S = 1/(‖H_SE‖² τ_E)` and `τ_E/τ_S = τ_E² ‖H_SE‖²`.
    pub fn from_tau(tau: TauEstimate, coupling_norm: f64) -> Self {
        let tau_s = 1.0 / (coupling_norm * coupling_norm * tau.tau);
        Self {
            tau_e: tau.tau,
            tau_s,
            coupling_norm,
            markov_ratio: tau.tau * tau.tau * coupling_norm * coupling_norm,
            decayed: tau.decayed,
        }
    }
}

/// Samples `C(τ, 0)` on the grid and derives the timescales.
pub fn timescales(
    spec: &SystemSpec,
    rho0: &ComplexMatrix,
    taus: &[f64],
    tol: &ToleranceConfig,
) -> Result<(Vec<C64>, TimescaleReport)> {
    let engine = CorrelationEngine::new(spec, tol)?;
    let values = taus.iter().map(|&tau| engine.correlation(rho0, tau, 0.0)).collect::<Result<Vec<_>>>()?;
    let tau = estimate_tau_e(taus, &values)?;
    Ok((values, TimescaleReport::from_tau(tau, op_norm_estimate(spec.h_se().as_matrix()))))
}

pub fn correlation_table(taus: &[f64], values: &[C64]) -> CsvTable {
    let mut table = CsvTable::new(["tau", "abs_C"]);
    for (t, v) in taus.iter().zip(values) {
        table.push(vec![fmt_f64(*t), fmt_f64(v.norm())]);
    }
    table
}

/// `‖ρ(t) - Tr_E ρ(t) ⊗ Tr_S ρ(t)‖_max`.
pub fn factorization_defect(
    spec: &SystemSpec,
    initial: &InitialState,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<f64> {
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let rho0 = initial_density(initial, d_s, d_e, tol)?;
    let rho = Propagator::for_spec(spec, tol)?.evolve_density(&rho0, t - t0);
    let rho_s = partial_trace(&rho, d_s, d_e, Subsystem::System)?;
    let rho_e = partial_trace(&rho, d_s, d_e, Subsystem::Environment)?;
    Ok(max_abs(&(rho - crate::linalg::kron(&rho_s, &rho_e, tol)?)))
}

/// `-Σ λ log λ` in nats, negative eigenvalues clipped to zero.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    if !rho.is_square() {
        return Err(Error::Shape("density matrix must be square".into()));
    }
    let tr = rho.trace();
    if (tr - c64(1.0, 0.0)).norm() > ENTROPY_TRACE_TOL {
        return Err(Error::NotAState(format!("trace {tr}")));
    }
    let s: f64 = hermitian_eigenvalues(rho)?
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum();
    Ok(s.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieReport {
    pub gamma0: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Initial entangling rate `Σ_S(2h)/(2h)` with `h = 1e-3/‖H‖_op`, against
/// `c ‖H_SE‖_op log min(d_S, d_E)`.
pub fn sie_rate_check(spec: &SystemSpec, initial: &InitialState, c: f64, tol: &ToleranceConfig) -> Result<SieReport> {
    if !initial.is_product() {
        return Err(Error::NotProduct);
    }
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let rho0 = initial_density(initial, d_s, d_e, tol)?;
    let h = build_total_hamiltonian(spec, tol)?;
    let norm = op_norm_estimate(h.as_matrix());
    let coupling = op_norm_estimate(spec.h_se().as_matrix());
    let delta = d_s.min(d_e) as f64;
    let bound = c * coupling * delta.ln();
    if coupling == 0.0 || norm == 0.0 {
        return Ok(SieReport { gamma0: 0.0, bound, satisfied: true });
    }
    let step = 1e-3 / norm;
    let prop = Propagator::new(&h)?;
    let rho_s = |t: f64| partial_trace(&prop.evolve_density(&rho0, t), d_s, d_e, Subsystem::System);
    let s0 = von_neumann_entropy(&rho_s(0.0)?)?;
    let s2 = von_neumann_entropy(&rho_s(2.0 * step)?)?;
    let gamma0 = (s2 - s0) / (2.0 * step);
    Ok(SieReport { gamma0, bound, satisfied: gamma0 <= bound + SIE_SLACK })
}

/// Summary written alongside diagnostics runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub tau_e: f64,
    pub tau_s: f64,
    pub markov_ratio: f64,
    pub gamma0: f64,
    pub bound: f64,
}

/// Model for the bandwidth sweep: `H_S = 0`, `H_E` a fixed GUE draw scaled by
/// `width`, random coupling of operator norm `coupling`, state `I/d`.
pub fn bandwidth_model(seed: u64, d_s: usize, d_e: usize, coupling: f64, width: f64, tol: &ToleranceConfig) -> Result<SystemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_e = random_hermitian(&mut rng, d_e).scaled(width);
    let raw = random_hermitian(&mut rng, d_s * d_e);
    let norm = op_norm_estimate(raw.as_matrix());
    let h_se = if norm > 0.0 { raw.scaled(coupling / norm) } else { raw };
    SystemSpec::new(HermitianMatrix::zeros(d_s), h_e, h_se, tol)
}

/// `τ_E` for each environment bandwidth scale.
pub fn tau_e_width_sweep(
    seed: u64,
    d_s: usize,
    d_e: usize,
    coupling: f64,
    widths: &[f64],
    taus: &[f64],
    exec: Execution,
    tol: &ToleranceConfig,
) -> Result<Vec<TimescaleReport>> {
    let d = d_s * d_e;
    let rho0 = identity(d) * c64(1.0 / d as f64, 0.0);
    try_map(exec, widths, |&w| {
        let spec = bandwidth_model(seed, d_s, d_e, coupling, w, tol)?;
        timescales(&spec, &rho0, taus, tol).map(|(_, rep)| rep)
    })
}
