//! Composite system + environment models.
//!
//! A [`SystemSpec`] holds `H_S`, `H_E` and a coupling `H_SE` given on the full
//! product space. Energies are in inverse time units (ħ = 1).

use std::path::Path;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, commutator, hermitian_eigenvalues, hermiticity_deviation, identity, kron, max_abs, op_norm_estimate,
    projector, ComplexMatrix, ComplexVector, HermitianMatrix, SpectralDecomposition, C64, ONE, ZERO,
};
use crate::random::random_hermitian;
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    d_s: usize,
    d_e: usize,
    h_s: HermitianMatrix,
    h_e: HermitianMatrix,
    h_se: HermitianMatrix,
}

impl SystemSpec {
    pub fn new(
        h_s: HermitianMatrix,
        h_e: HermitianMatrix,
        h_se: HermitianMatrix,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        let (d_s, d_e) = (h_s.dim(), h_e.dim());
        if d_s == 0 || d_e == 0 {
            return Err(Error::Shape("system and environment dimensions must be positive".into()));
        }
        let d = d_s
            .checked_mul(d_e)
            .ok_or(Error::SizeLimit { requested: usize::MAX, max: tol.max_dim })?;
        if d > tol.max_dim {
            return Err(Error::SizeLimit { requested: d, max: tol.max_dim });
        }
        if h_se.dim() != d {
            return Err(Error::Shape(format!(
                "H_SE must act on the {d}-dimensional product space, got {}",
                h_se.dim()
            )));
        }
        Ok(Self { d_s, d_e, h_s, h_e, h_se })
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn dim(&self) -> usize {
        self.d_s * self.d_e
    }

    pub fn h_s(&self) -> &HermitianMatrix {
        &self.h_s
    }

    pub fn h_e(&self) -> &HermitianMatrix {
        &self.h_e
    }

    pub fn h_se(&self) -> &HermitianMatrix {
        &self.h_se
    }

    /// `H_S ⊗ I_E + I_S ⊗ H_E`.
    pub fn free_hamiltonian(&self, tol: &ToleranceConfig) -> Result<HermitianMatrix> {
        let hs = kron(self.h_s.as_matrix(), &identity(self.d_e), tol)?;
        let he = kron(&identity(self.d_s), self.h_e.as_matrix(), tol)?;
        Ok(HermitianMatrix::hermitian_part(&(hs + he)))
    }

    /// Same model with the coupling multiplied by `factor`.
    pub fn with_coupling_scaled(&self, factor: f64) -> Self {
        Self { h_se: self.h_se.scaled(factor), ..self.clone() }
    }

    /// `I_S ⊗ H_E` on the product space.
    pub fn env_hamiltonian_full(&self, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
        kron(&identity(self.d_s), self.h_e.as_matrix(), tol)
    }

    /// Rotates the environment factor into the eigenbasis of `H_E`, with
    /// eigenvalues in ascending order.
    pub fn in_env_eigenbasis(&self, tol: &ToleranceConfig) -> Result<(SystemSpec, EnvBasis)> {
        let basis = EnvBasis::of(&self.h_e)?;
        let he = HermitianMatrix::hermitian_part(&basis.to_eigenbasis_env(self.h_e.as_matrix()));
        let hse = HermitianMatrix::hermitian_part(&basis.to_eigenbasis_full(self.h_se.as_matrix(), self.d_s, tol)?);
        let rotated = SystemSpec::new(self.h_s.clone(), he, hse, tol)?;
        Ok((rotated, basis))
    }

    /// Largest off-diagonal modulus of `H_E`.
    pub fn env_offdiagonal(&self) -> f64 {
        let h = self.h_e.as_matrix();
        let mut worst: f64 = 0.0;
        for r in 0..self.d_e {
            for c in 0..self.d_e {
                if r != c {
                    worst = worst.max(h[(r, c)].norm());
                }
            }
        }
        worst
    }

    /// Fails with [`Error::NotEnvEigenbasis`] unless `H_E` is diagonal within `tol.commutator`.
    pub fn require_env_eigenbasis(&self, tol: &ToleranceConfig) -> Result<()> {
        let off = self.env_offdiagonal();
        if off > tol.commutator {
            return Err(Error::NotEnvEigenbasis(off));
        }
        Ok(())
    }

    /// `|γ_k⟩⟨γ_k|` for the k-th lowest eigenvector of `H_E`, in the current basis.
    pub fn env_eigenstate_weights(&self, k: usize) -> Result<ComplexMatrix> {
        let basis = EnvBasis::of(&self.h_e)?;
        if k >= self.d_e {
            return Err(Error::InvalidInput(format!("environment eigenstate {k} out of range")));
        }
        Ok(projector(&basis.vectors.column(k).into_owned()))
    }

    pub fn to_model_file(&self, initial: Option<&InitialState>) -> ModelFile {
        ModelFile {
            d_s: self.d_s,
            d_e: self.d_e,
            h_s: matrix_to_json(self.h_s.as_matrix()),
            h_e: matrix_to_json(self.h_e.as_matrix()),
            h_se: matrix_to_json(self.h_se.as_matrix()),
            initial_state: initial.map(InitialStateFile::from),
        }
    }

    pub fn from_model_file(file: &ModelFile, tol: &ToleranceConfig) -> Result<(Self, Option<InitialState>)> {
        let h_s = HermitianMatrix::new(matrix_from_json(&file.h_s, "H_S")?, tol)?;
        let h_e = HermitianMatrix::new(matrix_from_json(&file.h_e, "H_E")?, tol)?;
        let h_se = HermitianMatrix::new(matrix_from_json(&file.h_se, "H_SE")?, tol)?;
        if h_s.dim() != file.d_s || h_e.dim() != file.d_e {
            return Err(Error::Shape(format!(
                "declared d_S={}, d_E={} but H_S is {}x{} and H_E is {}x{}",
                file.d_s,
                file.d_e,
                h_s.dim(),
                h_s.dim(),
                h_e.dim(),
                h_e.dim()
            )));
        }
        let spec = SystemSpec::new(h_s, h_e, h_se, tol)?;
        let initial = file.initial_state.as_ref().map(InitialState::try_from).transpose()?;
        if let Some(state) = &initial {
            state.validate(spec.d_s, spec.d_e, tol)?;
        }
        Ok((spec, initial))
    }
}

/// Eigenbasis of an environment Hamiltonian, columns sorted by eigenvalue.
#[derive(Debug, Clone)]
pub struct EnvBasis {
    pub energies: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EnvBasis {
    pub fn of(h_e: &HermitianMatrix) -> Result<Self> {
        let spec = h_e.spectral()?;
        let mut order: Vec<usize> = (0..spec.dim()).collect();
        order.sort_by(|&a, &b| spec.values[a].total_cmp(&spec.values[b]));
        let n = spec.dim();
        let vectors = ComplexMatrix::from_fn(n, n, |r, c| spec.vectors[(r, order[c])]);
        Ok(Self { energies: order.iter().map(|&k| spec.values[k]).collect(), vectors })
    }

    /// `V† X V` for an environment operator.
    pub fn to_eigenbasis_env(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// `(I ⊗ V†) X (I ⊗ V)` for an operator on the product space.
    pub fn to_eigenbasis_full(&self, x: &ComplexMatrix, d_s: usize, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
        let w = kron(&identity(d_s), &self.vectors, tol)?;
        Ok(w.adjoint() * x * w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `ρ_S ⊗ ρ_E` with `ρ_S = |c⟩⟨c|` and environment weights `d`.
    Product { amplitudes: ComplexVector, env_weights: ComplexMatrix },
    /// `|Ψ⟩ = Σ a_{iα} |i, α⟩`; `amplitudes[(i, α)]`.
    Entangled { amplitudes: ComplexMatrix },
}

impl InitialState {
    pub fn product(amplitudes: ComplexVector, env_weights: ComplexMatrix) -> Self {
        Self::Product { amplitudes, env_weights }
    }

    pub fn entangled(amplitudes: ComplexMatrix) -> Self {
        Self::Entangled { amplitudes }
    }

    /// `|i⟩ ⊗ |α⟩`.
    pub fn basis_product(i: usize, alpha: usize, d_s: usize, d_e: usize) -> Self {
        let mut c = ComplexVector::zeros(d_s);
        c[i] = ONE;
        let mut d = ComplexMatrix::zeros(d_e, d_e);
        d[(alpha, alpha)] = ONE;
        Self::Product { amplitudes: c, env_weights: d }
    }

    /// Equal-weight system amplitudes `|c_i|² = 1/n` with `d = I/N`.
    pub fn equal_weight(d_s: usize, d_e: usize) -> Self {
        let c = ComplexVector::from_element(d_s, c64(1.0 / (d_s as f64).sqrt(), 0.0));
        let d = identity(d_e) * c64(1.0 / d_e as f64, 0.0);
        Self::Product { amplitudes: c, env_weights: d }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, Self::Product { .. })
    }

    pub fn validate(&self, d_s: usize, d_e: usize, tol: &ToleranceConfig) -> Result<()> {
        match self {
            Self::Product { amplitudes, env_weights } => {
                if amplitudes.len() != d_s {
                    return Err(Error::Shape(format!("expected {d_s} amplitudes, got {}", amplitudes.len())));
                }
                if env_weights.shape() != (d_e, d_e) {
                    return Err(Error::Shape(format!(
                        "environment weights must be {d_e}x{d_e}, got {}x{}",
                        env_weights.nrows(),
                        env_weights.ncols()
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > tol.normalization {
                    return Err(Error::Normalization(format!("Σ|c_i|² = {norm}")));
                }
                validate_weights(env_weights, tol)
            }
            Self::Entangled { amplitudes } => {
                if amplitudes.shape() != (d_s, d_e) {
                    return Err(Error::Shape(format!(
                        "entangled amplitudes must be {d_s}x{d_e}, got {}x{}",
                        amplitudes.nrows(),
                        amplitudes.ncols()
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > tol.normalization {
                    return Err(Error::Normalization(format!("Σ|a_iα|² = {norm}")));
                }
                Ok(())
            }
        }
    }

    /// Initial reduced system state.
    pub fn system_density(&self) -> ComplexMatrix {
        match self {
            Self::Product { amplitudes, .. } => projector(amplitudes),
            Self::Entangled { amplitudes } => amplitudes * amplitudes.adjoint(),
        }
    }

    /// Initial reduced environment state.
    pub fn env_density(&self) -> ComplexMatrix {
        match self {
            Self::Product { env_weights, .. } => env_weights.clone(),
            Self::Entangled { amplitudes } => (amplitudes.adjoint() * amplitudes).transpose(),
        }
    }
}

/// Environment weights: Hermitian, unit trace, PSD; idempotent when strict.
fn validate_weights(d: &ComplexMatrix, tol: &ToleranceConfig) -> Result<()> {
    let dev = hermiticity_deviation(d);
    if dev > tol.hermitian.max(tol.normalization) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let tr = d.trace();
    if (tr - ONE).norm() > tol.normalization {
        return Err(Error::Normalization(format!("Tr d = {tr}")));
    }
    let min_eig = hermitian_eigenvalues(d)?.first().copied().unwrap_or(0.0);
    if min_eig < -tol.psd {
        return Err(Error::NotAState(format!("environment weights have eigenvalue {min_eig}")));
    }
    if tol.strict_env_purity {
        let defect = max_abs(&(d * d - d));
        if defect > tol.psd {
            return Err(Error::Normalization(format!("environment weights not idempotent (defect {defect:.3e})")));
        }
    }
    Ok(())
}

/// `H = H_S ⊗ I + I ⊗ H_E + H_SE`.
pub fn build_total_hamiltonian(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<HermitianMatrix> {
    let free = spec.free_hamiltonian(tol)?;
    Ok(HermitianMatrix::hermitian_part(&(free.as_matrix() + spec.h_se.as_matrix())))
}

/// Full initial density matrix on the product space.
pub fn initial_density(state: &InitialState, d_s: usize, d_e: usize, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    state.validate(d_s, d_e, tol)?;
    let rho = match state {
        InitialState::Product { amplitudes, env_weights } => kron(&projector(amplitudes), env_weights, tol)?,
        InitialState::Entangled { amplitudes } => {
            let psi = ComplexVector::from_fn(d_s * d_e, |k, _| amplitudes[(k / d_e, k % d_e)]);
            projector(&psi)
        }
    };
    check_density(&rho, tol)?;
    Ok(rho)
}

/// Hermitian, unit trace and PSD within the configured tolerances.
pub fn check_density(rho: &ComplexMatrix, tol: &ToleranceConfig) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::Shape("density matrix must be square".into()));
    }
    let dev = hermiticity_deviation(rho);
    if dev > tol.hermitian.max(tol.normalization) {
        return Err(Error::NotAState(format!("Hermiticity deviation {dev:.3e}")));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > tol.trace {
        return Err(Error::NotAState(format!("trace {tr}")));
    }
    let min_eig = hermitian_eigenvalues(rho)?.first().copied().unwrap_or(0.0);
    if min_eig < -tol.psd {
        return Err(Error::NotAState(format!("negative eigenvalue {min_eig:.3e}")));
    }
    Ok(())
}

/// Cached eigendecomposition of a time-independent Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectral: SpectralDecomposition,
}

impl Propagator {
    pub fn new(h: &HermitianMatrix) -> Result<Self> {
        Ok(Self { spectral: h.spectral()? })
    }

    pub fn for_spec(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<Self> {
        Self::new(&build_total_hamiltonian(spec, tol)?)
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn unitary(&self, dt: f64) -> ComplexMatrix {
        self.spectral.unitary(dt)
    }

    /// `U ρ U†` with `U = exp(-i H dt)`.
    pub fn evolve_density(&self, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
        if dt == 0.0 {
            return rho.clone();
        }
        let u = self.unitary(dt);
        &u * rho * u.adjoint()
    }

    pub fn evolve_vector(&self, psi: &ComplexVector, dt: f64) -> ComplexVector {
        self.spectral.evolve_vector(psi, dt)
    }
}

/// `ρ(t) = U(t, t0) ρ0 U(t, t0)†`.
pub fn propagate(
    rho0: &ComplexMatrix,
    h: &HermitianMatrix,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    if rho0.shape() != (h.dim(), h.dim()) {
        return Err(Error::Shape(format!(
            "state is {}x{} but Hamiltonian is {}x{}",
            rho0.nrows(),
            rho0.ncols(),
            h.dim(),
            h.dim()
        )));
    }
    let tr = rho0.trace();
    if (tr - ONE).norm() > tol.trace {
        return Err(Error::NotAState(format!("initial trace {tr}")));
    }
    if t == t0 {
        return Ok(rho0.clone());
    }
    Ok(Propagator::new(h)?.evolve_density(rho0, t - t0))
}

/// Seeded random model with GUE-style `H_S`, `H_E` and `‖H_SE‖_op = coupling`.
///
/// With `commuting`, `H_SE = Σ_γ S_γ ⊗ |γ⟩⟨γ|` over the eigenvectors of `H_E`,
/// so `[I ⊗ H_E, H_SE] = 0`.
pub fn random_model(
    seed: u64,
    d_s: usize,
    d_e: usize,
    coupling: f64,
    commuting: bool,
    tol: &ToleranceConfig,
) -> Result<SystemSpec> {
    if !(coupling >= 0.0) || !coupling.is_finite() {
        return Err(Error::InvalidInput(format!("coupling must be finite and >= 0, got {coupling}")));
    }
    let d = d_s * d_e;
    if d > tol.max_dim {
        return Err(Error::SizeLimit { requested: d, max: tol.max_dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = random_hermitian(&mut rng, d_s);
    let h_e = random_hermitian(&mut rng, d_e);
    let raw = if commuting {
        let basis = EnvBasis::of(&h_e)?;
        let mut acc = ComplexMatrix::zeros(d, d);
        for g in 0..d_e {
            let s_g = random_hermitian(&mut rng, d_s);
            let p_g = projector(&basis.vectors.column(g).into_owned());
            acc += kron(s_g.as_matrix(), &p_g, tol)?;
        }
        acc
    } else {
        random_hermitian(&mut rng, d).into_inner()
    };
    let h_se = if coupling == 0.0 {
        HermitianMatrix::zeros(d)
    } else {
        let norm = op_norm_estimate(&raw);
        HermitianMatrix::hermitian_part(&(raw * c64(coupling / norm, 0.0)))
    };
    SystemSpec::new(h_s, h_e, h_se, tol)
}

/// `‖[I ⊗ H_E, H_SE]‖_max`.
pub fn env_coupling_commutator(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<f64> {
    let he = spec.env_hamiltonian_full(tol)?;
    Ok(max_abs(&commutator(&he, spec.h_se.as_matrix())))
}

/// Eigen-decomposes a density matrix into `(weight, vector)` pairs with
/// weight above `cutoff`.
pub fn pure_components(rho: &ComplexMatrix, cutoff: f64) -> Vec<(f64, ComplexVector)> {
    let eig = SymmetricEigen::new(HermitianMatrix::hermitian_part(rho).into_inner());
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > cutoff)
        .map(|(k, &w)| (w, eig.eigenvectors.column(k).into_owned()))
        .collect()
}

// ---------------------------------------------------------------------------
// JSON model files

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "d_S")]
    pub d_s: usize,
    #[serde(rename = "d_E")]
    pub d_e: usize,
    #[serde(rename = "H_S")]
    pub h_s: JsonMatrix,
    #[serde(rename = "H_E")]
    pub h_e: JsonMatrix,
    #[serde(rename = "H_SE")]
    pub h_se: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialStateFile {
    Product { c: Vec<[f64; 2]>, d: JsonMatrix },
    Entangled { a: JsonMatrix },
}

impl From<&InitialState> for InitialStateFile {
    fn from(state: &InitialState) -> Self {
        match state {
            InitialState::Product { amplitudes, env_weights } => InitialStateFile::Product {
                c: amplitudes.iter().map(|z| [z.re, z.im]).collect(),
                d: matrix_to_json(env_weights),
            },
            InitialState::Entangled { amplitudes } => InitialStateFile::Entangled { a: matrix_to_json(amplitudes) },
        }
    }
}

impl TryFrom<&InitialStateFile> for InitialState {
    type Error = Error;

    fn try_from(file: &InitialStateFile) -> Result<Self> {
        Ok(match file {
            InitialStateFile::Product { c, d } => InitialState::Product {
                amplitudes: ComplexVector::from_iterator(c.len(), c.iter().map(|p| c64(p[0], p[1]))),
                env_weights: matrix_from_json(d, "initial_state.d")?,
            },
            InitialStateFile::Entangled { a } => InitialState::Entangled { amplitudes: matrix_from_json(a, "initial_state.a")? },
        })
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, field: &str) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{field}: ragged matrix rows")));
    }
    let mut m = ComplexMatrix::from_element(nrows, ncols, ZERO);
    for (r, row) in rows.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            m[(r, c)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

pub fn write_model_json(path: impl AsRef<Path>, spec: &SystemSpec, initial: Option<&InitialState>) -> Result<()> {
    let text = serde_json::to_string_pretty(&spec.to_model_file(initial))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_model_json(path: impl AsRef<Path>, tol: &ToleranceConfig) -> Result<(SystemSpec, Option<InitialState>)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    SystemSpec::from_model_file(&file, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{partial_trace, real_diagonal, Subsystem};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn pauli_z() -> HermitianMatrix {
        HermitianMatrix::new(real_diagonal(&[1.0, -1.0]), &tol()).unwrap()
    }

    #[test]
    fn total_hamiltonian_diagonal_sum() {
        let spec = SystemSpec::new(pauli_z(), pauli_z(), HermitianMatrix::zeros(4), &tol()).unwrap();
        let h = build_total_hamiltonian(&spec, &tol()).unwrap();
        assert_eq!(h.into_inner(), real_diagonal(&[2.0, 0.0, 0.0, -2.0]));
    }

    #[test]
    fn commuting_random_model_commutes() {
        let spec = random_model(1, 3, 3, 0.7, true, &tol()).unwrap();
        assert!(env_coupling_commutator(&spec, &tol()).unwrap() < 1e-12);
        assert!((op_norm_estimate(spec.h_se().as_matrix()) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_gives_zero_interaction() {
        let spec = random_model(4, 2, 3, 0.0, false, &tol()).unwrap();
        assert_eq!(max_abs(spec.h_se().as_matrix()), 0.0);
    }

    #[test]
    fn random_model_is_deterministic() {
        let a = random_model(42, 3, 2, 1.0, false, &tol()).unwrap();
        let b = random_model(42, 3, 2, 1.0, false, &tol()).unwrap();
        assert_eq!(a, b);
        let c = random_model(43, 3, 2, 1.0, false, &tol()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_model_rejects_negative_coupling() {
        assert!(random_model(0, 2, 2, -1.0, false, &tol()).is_err());
    }

    #[test]
    fn product_basis_state_is_rank_one_projector() {
        let rho = initial_density(&InitialState::basis_product(0, 0, 2, 2), 2, 2, &tol()).unwrap();
        let mut expected = ComplexMatrix::zeros(4, 4);
        expected[(0, 0)] = ONE;
        assert_eq!(rho, expected);
    }

    #[test]
    fn bell_state_has_maximally_mixed_marginals() {
        let s = 1.0 / 2f64.sqrt();
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 0)] = c64(s, 0.0);
        a[(1, 1)] = c64(s, 0.0);
        let rho = initial_density(&InitialState::entangled(a), 2, 2, &tol()).unwrap();
        let red = partial_trace(&rho, 2, 2, Subsystem::System).unwrap();
        assert!(max_abs(&(red - identity(2) * c64(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn equal_weight_state_has_unit_trace() {
        let rho = initial_density(&InitialState::equal_weight(3, 2), 3, 2, &tol()).unwrap();
        assert!((rho.trace() - ONE).norm() < 1e-14);
    }

    #[test]
    fn unnormalized_amplitudes_are_rejected() {
        let c = ComplexVector::from_vec(vec![ONE, ONE]);
        let state = InitialState::product(c, identity(2) * c64(0.5, 0.0));
        assert!(matches!(initial_density(&state, 2, 2, &tol()), Err(Error::Normalization(_))));
    }

    #[test]
    fn strict_purity_rejects_mixed_environment() {
        let state = InitialState::equal_weight(2, 2);
        let strict = ToleranceConfig { strict_env_purity: true, ..tol() };
        assert!(initial_density(&state, 2, 2, &strict).is_err());
        assert!(initial_density(&InitialState::basis_product(1, 1, 2, 2), 2, 2, &strict).is_ok());
    }

    #[test]
    fn propagation_preserves_spectrum_and_trace() {
        let spec = random_model(3, 2, 3, 0.8, false, &tol()).unwrap();
        let h = build_total_hamiltonian(&spec, &tol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho0 = crate::random::random_density(&mut rng, 6);
        let rho = propagate(&rho0, &h, 0.0, 2.5, &tol()).unwrap();
        assert!((rho.trace() - ONE).norm() < 1e-11);
        assert!(hermiticity_deviation(&rho) < 1e-11);
        let a = hermitian_eigenvalues(&rho0).unwrap();
        let b = hermitian_eigenvalues(&rho).unwrap();
        let dist = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dist < 1e-10);
        assert_eq!(propagate(&rho0, &h, 1.0, 1.0, &tol()).unwrap(), rho0);
    }

    #[test]
    fn uncoupled_propagation_is_free_system_evolution() {
        let spec = random_model(8, 2, 2, 0.0, false, &tol()).unwrap();
        let h = build_total_hamiltonian(&spec, &tol()).unwrap();
        let state = InitialState::basis_product(0, 1, 2, 2);
        let rho0 = initial_density(&state, 2, 2, &tol()).unwrap();
        let rho = propagate(&rho0, &h, 0.0, 1.7, &tol()).unwrap();
        let red = partial_trace(&rho, 2, 2, Subsystem::System).unwrap();
        let us = crate::linalg::expm_hermitian(spec.h_s(), 1.7).unwrap();
        let free = &us * state.system_density() * us.adjoint();
        assert!(max_abs(&(red - free)) < 1e-12);
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let spec = random_model(12, 2, 3, 0.4, true, &tol()).unwrap();
        let state = InitialState::basis_product(1, 2, 2, 3);
        let text = serde_json::to_string(&spec.to_model_file(Some(&state))).unwrap();
        let file: ModelFile = serde_json::from_str(&text).unwrap();
        let (back, init) = SystemSpec::from_model_file(&file, &tol()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(init, Some(state));
    }

    #[test]
    fn env_eigenbasis_diagonalizes_environment() {
        let spec = random_model(21, 2, 3, 0.5, true, &tol()).unwrap();
        let (rot, basis) = spec.in_env_eigenbasis(&tol()).unwrap();
        let he = rot.h_e().as_matrix();
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert!(he[(r, c)].norm() < 1e-12);
                }
            }
            assert!((he[(r, r)].re - basis.energies[r]).abs() < 1e-12);
        }
        assert!(env_coupling_commutator(&rot, &tol()).unwrap() < 1e-12);
    }
}
