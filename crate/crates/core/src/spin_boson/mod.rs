//! Spin multiplets dephased by a single bosonic mode.
//!
//! `H = ω J_z + β b†b + η (b + b†) J²` on `(⊕_j span{|j,m⟩}) ⊗ span{|0⟩..|n_max⟩}`.
//! Every `|j,m⟩` is an eigenvector of the system part of `H`, so populations
//! never change and coherences pick up a boson overlap factor.

pub mod analytic;
pub mod periodicity;
pub mod zassenhaus;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, projector, real_diagonal, ComplexMatrix, ComplexVector, HermitianMatrix, C64};
use crate::model::{pure_components, Propagator, SystemSpec};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

pub use analytic::{analytic_boson_factor, AnalyticFactors};
pub use periodicity::{common_period, periodicity_semigroup_check, PeriodicityReport};
pub use zassenhaus::{zassenhaus_product, zassenhaus_terms};

/// Extra Fock levels used to confirm cutoff convergence.
pub const CUTOFF_PROBE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    pub omega: f64,
    pub beta: f64,
    pub eta: f64,
    /// Angular momenta `j` (non-negative half-integers), one block each.
    pub multiplets: Vec<f64>,
    pub n_max: usize,
}

impl SpinBosonParams {
    pub fn validate(&self, tol: &ToleranceConfig) -> Result<()> {
        if !(self.omega >= 0.0) || !(self.beta >= 0.0) || !self.eta.is_finite() || !self.omega.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidInput("ω and β must be finite and non-negative, η finite".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidInput("n_max must be at least 1".into()));
        }
        if self.multiplets.is_empty() {
            return Err(Error::InvalidInput("at least one multiplet is required".into()));
        }
        for &j in &self.multiplets {
            let twice = 2.0 * j;
            if !(j >= 0.0) || (twice - twice.round()).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("j = {j} is not a non-negative half-integer")));
            }
        }
        let d = self.system_dim() * (self.n_max + 1);
        if d > tol.max_dim {
            return Err(Error::SizeLimit { requested: d, max: tol.max_dim });
        }
        Ok(())
    }

    pub fn system_dim(&self) -> usize {
        self.multiplets.iter().map(|&j| multiplicity(j)).sum()
    }

    /// `(j, m)` labels of the system basis, `m` descending within each multiplet.
    pub fn labels(&self) -> Vec<(f64, f64)> {
        self.multiplets
            .iter()
            .flat_map(|&j| (0..multiplicity(j)).map(move |k| (j, j - k as f64)))
            .collect()
    }

    /// Index of `|j, m⟩` in the first multiplet carrying `j`.
    pub fn index(&self, j: f64, m: f64) -> Result<usize> {
        let mut offset = 0;
        for &jj in &self.multiplets {
            let size = multiplicity(jj);
            if (jj - j).abs() < 1e-12 {
                let k = jj - m;
                if k < -1e-12 || k > (size - 1) as f64 + 1e-12 || (k - k.round()).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("m = {m} is not a projection of j = {j}")));
                }
                return Ok(offset + k.round() as usize);
            }
            offset += size;
        }
        Err(Error::InvalidInput(format!("no multiplet with j = {j}")))
    }

    /// `γ(j) = η j(j+1)`.
    pub fn gamma(&self, j: f64) -> f64 {
        self.eta * j * (j + 1.0)
    }

    pub fn with_cutoff(&self, n_max: usize) -> Self {
        Self { n_max, ..self.clone() }
    }
}

fn multiplicity(j: f64) -> usize {
    (2.0 * j).round() as usize + 1
}

/// `H_S = ω J_z`, `H_E = β b†b`, `H_SE = J² ⊗ η (b + b†)`.
pub fn build_spinboson(params: &SpinBosonParams, tol: &ToleranceConfig) -> Result<SystemSpec> {
    params.validate(tol)?;
    let labels = params.labels();
    let jz: Vec<f64> = labels.iter().map(|&(_, m)| params.omega * m).collect();
    let j2: Vec<f64> = labels.iter().map(|&(j, _)| j * (j + 1.0)).collect();
    let n_levels = params.n_max + 1;
    let number: Vec<f64> = (0..n_levels).map(|n| params.beta * n as f64).collect();
    let mut x = ComplexMatrix::zeros(n_levels, n_levels);
    for n in 0..params.n_max {
        let a = c64(((n + 1) as f64).sqrt(), 0.0);
        x[(n, n + 1)] = a;
        x[(n + 1, n)] = a;
    }
    let h_se = crate::linalg::kron(&real_diagonal(&j2), &(x * c64(params.eta, 0.0)), tol)?;
    SystemSpec::new(
        HermitianMatrix::new(real_diagonal(&jz), tol)?,
        HermitianMatrix::new(real_diagonal(&number), tol)?,
        HermitianMatrix::new(h_se, tol)?,
        tol,
    )
}

/// Initial system state; the boson always starts in the vacuum.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SpinBosonInitial {
    /// `Σ_j K^{-1/2} (2j+1)^{-1/2} Σ_m |j,m⟩` over the `K` multiplets.
    #[default]
    EqualSuperposition,
    /// `I / d_S`.
    MaximallyMixed,
    /// Any system density matrix.
    Density(ComplexMatrix),
}

impl SpinBosonInitial {
    pub fn system_density(&self, params: &SpinBosonParams) -> Result<ComplexMatrix> {
        let d = params.system_dim();
        match self {
            Self::EqualSuperposition => {
                let k = params.multiplets.len() as f64;
                let mut v = ComplexVector::zeros(d);
                for (idx, &(j, _)) in params.labels().iter().enumerate() {
                    v[idx] = c64(1.0 / (k * multiplicity(j) as f64).sqrt(), 0.0);
                }
                Ok(projector(&v))
            }
            Self::MaximallyMixed => Ok(crate::linalg::identity(d) * c64(1.0 / d as f64, 0.0)),
            Self::Density(rho) => {
                if rho.shape() != (d, d) {
                    return Err(Error::Shape(format!("system state must be {d}x{d}")));
                }
                Ok(rho.clone())
            }
        }
    }
}

/// Exact evolution on one Fock cutoff, evolving each pure component of the initial state.
#[derive(Debug, Clone)]
struct Evolver {
    d_s: usize,
    d_e: usize,
    propagator: Propagator,
    components: Vec<(f64, ComplexVector)>,
}

impl Evolver {
    fn new(params: &SpinBosonParams, rho_s: &ComplexMatrix, tol: &ToleranceConfig) -> Result<Self> {
        let spec = build_spinboson(params, tol)?;
        let (d_s, d_e) = (spec.d_s(), spec.d_e());
        let propagator = Propagator::for_spec(&spec, tol)?;
        let components = pure_components(rho_s, 1e-14)
            .into_iter()
            .map(|(w, v)| {
                let full = ComplexVector::from_fn(d_s * d_e, |k, _| if k % d_e == 0 { v[k / d_e] } else { C64::new(0.0, 0.0) });
                (w, full)
            })
            .collect();
        Ok(Self { d_s, d_e, propagator, components })
    }

    fn reduced_state(&self, t: f64) -> ComplexMatrix {
        let (d_s, d_e) = (self.d_s, self.d_e);
        let mut rho = ComplexMatrix::zeros(d_s, d_s);
        for (w, psi0) in &self.components {
            let psi = self.propagator.evolve_vector(psi0, t);
            for a in 0..d_s {
                for b in 0..d_s {
                    let mut acc = C64::new(0.0, 0.0);
                    for n in 0..d_e {
                        acc += psi[a * d_e + n] * psi[b * d_e + n].conj();
                    }
                    rho[(a, b)] += acc * *w;
                }
            }
        }
        rho
    }
}

/// Reduced spin state with a built-in Fock-cutoff convergence check.
#[derive(Debug, Clone)]
pub struct SpinBosonNumeric {
    params: SpinBosonParams,
    initial: ComplexMatrix,
    base: Evolver,
    probe: Evolver,
    drift_bound: f64,
}

impl SpinBosonNumeric {
    pub fn new(params: &SpinBosonParams, initial: &SpinBosonInitial, tol: &ToleranceConfig) -> Result<Self> {
        params.validate(tol)?;
        let rho_s = initial.system_density(params)?;
        crate::model::check_density(&rho_s, tol)?;
        let probe_tol = ToleranceConfig { max_dim: tol.max_dim.max(params.system_dim() * (params.n_max + 1 + CUTOFF_PROBE)), ..tol.clone() };
        Ok(Self {
            params: params.clone(),
            base: Evolver::new(params, &rho_s, tol)?,
            probe: Evolver::new(&params.with_cutoff(params.n_max + CUTOFF_PROBE), &rho_s, &probe_tol)?,
            initial: rho_s,
            drift_bound: tol.cutoff_drift,
        })
    }

    pub fn params(&self) -> &SpinBosonParams {
        &self.params
    }

    pub fn initial_state(&self) -> &ComplexMatrix {
        &self.initial
    }

    /// `ρ_S(t)`; fails with [`Error::Cutoff`] when raising `n_max` moves any entry by more than the bound.
    pub fn reduced_state(&self, t: f64) -> Result<ComplexMatrix> {
        let rho = self.base.reduced_state(t);
        let drift = crate::linalg::max_abs(&(&rho - self.probe.reduced_state(t)));
        if !(drift <= self.drift_bound) {
            return Err(Error::Cutoff { drift, bound: self.drift_bound });
        }
        Ok(rho)
    }

    pub fn element(&self, j1: f64, m1: f64, j2: f64, m2: f64, t: f64) -> Result<C64> {
        let (a, b) = (self.params.index(j1, m1)?, self.params.index(j2, m2)?);
        Ok(self.reduced_state(t)?[(a, b)])
    }

    /// Boson factor extracted from the simulation, `ρ_S(t)[a,b] / (ρ_S(0)[a,b] e^{-iω(m1-m2)t})`.
    pub fn numeric_boson_factor(&self, j1: f64, m1: f64, j2: f64, m2: f64, t: f64) -> Result<C64> {
        let (a, b) = (self.params.index(j1, m1)?, self.params.index(j2, m2)?);
        let prefactor = self.initial[(a, b)] * C64::from_polar(1.0, -self.params.omega * (m1 - m2) * t);
        if prefactor.norm() < 1e-14 {
            return Err(Error::InvalidInput("initial coherence vanishes; boson factor undefined".into()));
        }
        Ok(self.reduced_state(t)?[(a, b)] / prefactor)
    }
}

/// One-shot `ρ_S(t)[(j1,m1),(j2,m2)]`.
pub fn numeric_rho_element(
    params: &SpinBosonParams,
    initial: &SpinBosonInitial,
    (j1, m1): (f64, f64),
    (j2, m2): (f64, f64),
    t: f64,
    tol: &ToleranceConfig,
) -> Result<C64> {
    SpinBosonNumeric::new(params, initial, tol)?.element(j1, m1, j2, m2, t)
}

/// Rows `t, j1, m1, j2, m2, re, im, |Ω_E|` for every ordered label pair on the grid.
pub fn spinboson_table(sim: &SpinBosonNumeric, times: &[f64], tol: &ToleranceConfig) -> Result<CsvTable> {
    let mut table = CsvTable::new(["t", "j1", "m1", "j2", "m2", "re", "im", "abs_omega_E"]);
    let labels = sim.params.labels();
    for &t in times {
        let rho = sim.reduced_state(t)?;
        for (a, &(j1, m1)) in labels.iter().enumerate() {
            for (b, &(j2, m2)) in labels.iter().enumerate() {
                let omega = analytic_boson_factor(&sim.params, j1, j2, t, tol)?;
                let z = rho[(a, b)];
                table.push(vec![
                    fmt_f64(t),
                    fmt_f64(j1),
                    fmt_f64(m1),
                    fmt_f64(j2),
                    fmt_f64(m2),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(omega.norm()),
                ]);
            }
        }
    }
    Ok(table)
}
