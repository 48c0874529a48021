//! Projection-operator split of the full state along environment energy levels.
//!
//! `P` keeps the environment rows `γ ∈ P_basis` of `ρ` and `Q = 1 - P` keeps
//! the rest, so `P ρ = (I ⊗ Π_P) ρ`. In row-major vectorisation the
//! Liouvillian `L X = -i[H, X]` reads `-i (H ⊗ I - I ⊗ Hᵀ)`, and the projected
//! generator `Q L Q` is `-i K_Q` with the Hermitian matrix
//! `K_Q = Π_Q H Π_Q ⊗ I - Π_Q ⊗ Hᵀ` (here `Π_Q` is lifted to the product space).

use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, kron, max_abs, unvec_row_major, vec_row_major, ComplexMatrix, ComplexVector, HermitianMatrix,
    SpectralDecomposition, C64, ZERO,
};
use crate::model::{build_total_hamiltonian, Propagator, SystemSpec};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

/// Largest product-space dimension accepted by the superoperator routines.
pub const MAX_PROJECTION_DIM: usize = 16;

/// Smallest number of quadrature steps for the memory reconstruction.
pub const MIN_QUADRATURE_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectorPair {
    p_basis: Vec<usize>,
    q_basis: Vec<usize>,
    d_e: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    P,
    Q,
}

impl ProjectorPair {
    /// `P` over the first `n` environment levels.
    pub fn first(n: usize, d_e: usize) -> Result<Self> {
        if n > d_e {
            return Err(Error::InvalidInput(format!("P dimension {n} exceeds d_E = {d_e}")));
        }
        Ok(Self { p_basis: (0..n).collect(), q_basis: (n..d_e).collect(), d_e })
    }

    pub fn from_indices(mut p_basis: Vec<usize>, d_e: usize) -> Result<Self> {
        p_basis.sort_unstable();
        p_basis.dedup();
        if p_basis.iter().any(|&k| k >= d_e) {
            return Err(Error::InvalidInput(format!("P index out of range for d_E = {d_e}")));
        }
        let q_basis = (0..d_e).filter(|k| !p_basis.contains(k)).collect();
        Ok(Self { p_basis, q_basis, d_e })
    }

    pub fn p_basis(&self) -> &[usize] {
        &self.p_basis
    }

    pub fn q_basis(&self) -> &[usize] {
        &self.q_basis
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    fn basis(&self, which: Which) -> &[usize] {
        match which {
            Which::P => &self.p_basis,
            Which::Q => &self.q_basis,
        }
    }

    /// `I_S ⊗ Π` on the product space.
    pub fn lifted_projector(&self, which: Which, d_s: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(d_s * self.d_e, d_s * self.d_e);
        for i in 0..d_s {
            for &g in self.basis(which) {
                let k = i * self.d_e + g;
                m[(k, k)] = c64(1.0, 0.0);
            }
        }
        m
    }
}

fn system_dim(pair: &ProjectorPair, rho: &ComplexMatrix) -> Result<usize> {
    let n = rho.nrows();
    if !rho.is_square() || pair.d_e == 0 || !n.is_multiple_of(pair.d_e) {
        return Err(Error::Shape(format!(
            "operator of shape {}x{} does not live on a space with d_E = {}",
            rho.nrows(),
            rho.ncols(),
            pair.d_e
        )));
    }
    Ok(n / pair.d_e)
}

/// Zeroes every row whose environment index lies outside the selected set.
pub fn apply_projector(pair: &ProjectorPair, which: Which, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    system_dim(pair, rho)?;
    let keep = pair.basis(which);
    let mut out = rho.clone();
    for r in 0..rho.nrows() {
        if !keep.contains(&(r % pair.d_e)) {
            out.row_mut(r).fill(ZERO);
        }
    }
    Ok(out)
}

/// `-i (Hρ - ρH)`.
pub fn liouvillian_rhs(h: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.shape() != rho.shape() || !h.is_square() {
        return Err(Error::Shape(format!(
            "Hamiltonian {}x{} and state {}x{} do not match",
            h.nrows(),
            h.ncols(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok((h * rho - rho * h) * c64(0.0, -1.0))
}

/// `(‖P L Q ρ‖_max, ‖Q L P ρ‖_max)` with `L` the full Liouvillian.
pub fn coupling_term_norms(
    spec: &SystemSpec,
    pair: &ProjectorPair,
    rho_t: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<(f64, f64)> {
    check_pair(spec, pair, tol)?;
    let h = build_total_hamiltonian(spec, tol)?;
    coupling_norms_with(h.as_matrix(), pair, rho_t)
}

fn coupling_norms_with(h: &ComplexMatrix, pair: &ProjectorPair, rho: &ComplexMatrix) -> Result<(f64, f64)> {
    let q_rho = apply_projector(pair, Which::Q, rho)?;
    let p_rho = apply_projector(pair, Which::P, rho)?;
    let pq = apply_projector(pair, Which::P, &liouvillian_rhs(h, &q_rho)?)?;
    let qp = apply_projector(pair, Which::Q, &liouvillian_rhs(h, &p_rho)?)?;
    Ok((max_abs(&pq), max_abs(&qp)))
}

fn check_pair(spec: &SystemSpec, pair: &ProjectorPair, tol: &ToleranceConfig) -> Result<()> {
    if pair.d_e != spec.d_e() {
        return Err(Error::Shape(format!("projector built for d_E = {} but model has {}", pair.d_e, spec.d_e())));
    }
    spec.require_env_eigenbasis(tol)
}

fn check_projection_dim(spec: &SystemSpec) -> Result<()> {
    if spec.dim() > MAX_PROJECTION_DIM {
        return Err(Error::SizeLimit { requested: spec.dim(), max: MAX_PROJECTION_DIM });
    }
    Ok(())
}

/// Hermitian `K_X = Π_X H Π_X ⊗ I - Π_X ⊗ Hᵀ`, so that `X L X = -i K_X` on row-major vectors.
pub fn projected_generator(
    h: &ComplexMatrix,
    pair: &ProjectorPair,
    which: Which,
    tol: &ToleranceConfig,
) -> Result<HermitianMatrix> {
    let d_s = system_dim(pair, h)?;
    let pi = pair.lifted_projector(which, d_s);
    let n = h.nrows();
    let left = kron(&(&pi * h * &pi), &identity(n), &big_tol(tol))?;
    let right = kron(&pi, &h.transpose(), &big_tol(tol))?;
    Ok(HermitianMatrix::hermitian_part(&(left - right)))
}

fn big_tol(tol: &ToleranceConfig) -> ToleranceConfig {
    ToleranceConfig { max_dim: tol.max_dim.max(MAX_PROJECTION_DIM * MAX_PROJECTION_DIM), ..tol.clone() }
}

/// `exp(-i K s) v` in the eigenbasis of `K`.
fn evolve_super(spec: &SpectralDecomposition, v: &ComplexVector, s: f64) -> ComplexVector {
    spec.evolve_vector(v, s)
}

/// Standalone evolution `P ρ(t) = exp(P L P t) P ρ(0)`.
pub fn p_block_evolution(
    spec: &SystemSpec,
    pair: &ProjectorPair,
    rho0: &ComplexMatrix,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    check_pair(spec, pair, tol)?;
    check_projection_dim(spec)?;
    let h = build_total_hamiltonian(spec, tol)?;
    let k_p = projected_generator(h.as_matrix(), pair, Which::P, tol)?.spectral()?;
    let v = vec_row_major(&apply_projector(pair, Which::P, rho0)?);
    let n = rho0.nrows();
    Ok(unvec_row_major(&evolve_super(&k_p, &v, t), n, n))
}

/// One grid point of the projection diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSample {
    pub t: f64,
    pub pq_norm: f64,
    pub qp_norm: f64,
    pub reconstruction_error: f64,
}

/// Coupling-term norms and memory-reconstruction error on the grid `t_k = k T/steps`.
///
/// The reconstruction evaluates
/// `Q ρ(t) = e^{QLQ t} Q ρ(0) + ∫_0^t e^{QLQ (t-s)} Q L P ρ(s) ds`
/// with the composite trapezoid rule over the exactly propagated history.
pub fn projection_trajectory(
    spec: &SystemSpec,
    pair: &ProjectorPair,
    rho0: &ComplexMatrix,
    horizon: f64,
    steps: usize,
    tol: &ToleranceConfig,
) -> Result<Vec<ProjectionSample>> {
    check_pair(spec, pair, tol)?;
    check_projection_dim(spec)?;
    if steps < MIN_QUADRATURE_STEPS {
        return Err(Error::Quadrature { steps, min: MIN_QUADRATURE_STEPS });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let n = spec.dim();
    if rho0.shape() != (n, n) {
        return Err(Error::Shape(format!("state must be {n}x{n}")));
    }
    let h_herm = build_total_hamiltonian(spec, tol)?;
    let h = h_herm.as_matrix();
    let prop = Propagator::new(&h_herm)?;
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let history: Vec<ComplexMatrix> = times.iter().map(|&s| prop.evolve_density(rho0, s)).collect();

    let mut samples = Vec::with_capacity(times.len());
    if pair.q_basis.is_empty() {
        for (&t, rho) in times.iter().zip(&history) {
            let (pq, qp) = coupling_norms_with(h, pair, rho)?;
            samples.push(ProjectionSample { t, pq_norm: pq, qp_norm: qp, reconstruction_error: 0.0 });
        }
        return Ok(samples);
    }

    let k_q = projected_generator(h, pair, Which::Q, tol)?.spectral()?;
    let vt = k_q.vectors.adjoint();
    let lambdas = &k_q.values;
    let q_rho0 = vt.clone() * vec_row_major(&apply_projector(pair, Which::Q, rho0)?);

    // source g(s) = V† vec(Q L P ρ(s)), rotated by e^{iλ s}
    let rotated: Vec<ComplexVector> = times
        .iter()
        .zip(&history)
        .map(|(&s, rho)| {
            let p_rho = apply_projector(pair, Which::P, rho)?;
            let src = apply_projector(pair, Which::Q, &liouvillian_rhs(h, &p_rho)?)?;
            let mut g = &vt * vec_row_major(&src);
            for (m, &lam) in lambdas.iter().enumerate() {
                g[m] *= C64::from_polar(1.0, lam * s);
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;

    let mut running = ComplexVector::zeros(lambdas.len());
    for (k, (&t, rho)) in times.iter().zip(&history).enumerate() {
        running += &rotated[k] * c64(dt, 0.0);
        let mut z = &running - (&rotated[0] + &rotated[k]) * c64(0.5 * dt, 0.0);
        for (m, &lam) in lambdas.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lam * t);
            z[m] = phase * (z[m] + q_rho0[m]);
        }
        let recon = unvec_row_major(&(&k_q.vectors * z), n, n);
        let exact = apply_projector(pair, Which::Q, rho)?;
        let err = max_abs(&(recon - exact));
        if !err.is_finite() {
            return Err(Error::Numerical(format!("non-finite reconstruction at t = {t}")));
        }
        let (pq, qp) = coupling_norms_with(h, pair, rho)?;
        samples.push(ProjectionSample { t, pq_norm: pq, qp_norm: qp, reconstruction_error: err });
    }
    Ok(samples)
}

/// Maximum over the grid of the memory-reconstruction error.
pub fn memory_reconstruction_error(
    spec: &SystemSpec,
    pair: &ProjectorPair,
    rho0: &ComplexMatrix,
    horizon: f64,
    steps: usize,
    tol: &ToleranceConfig,
) -> Result<f64> {
    let samples = projection_trajectory(spec, pair, rho0, horizon, steps, tol)?;
    Ok(samples.iter().map(|s| s.reconstruction_error).fold(0.0, f64::max))
}

pub fn projection_table(samples: &[ProjectionSample]) -> CsvTable {
    let mut table = CsvTable::new(["t", "pq_norm", "qp_norm", "reconstruction_error"]);
    for s in samples {
        table.push(vec![fmt_f64(s.t), fmt_f64(s.pq_norm), fmt_f64(s.qp_norm), fmt_f64(s.reconstruction_error)]);
    }
    table
}
