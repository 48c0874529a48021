//! Block form of the time-local master equation.
//!
//! With the environment in the eigenbasis of `H_E`, the full state splits into
//! `d_S × d_S` blocks `ρ_{γβ}[i,k] = ⟨i γ|ρ|k β⟩`. The diagonal blocks obey
//!
//! ```text
//! dρ_γγ/dt = -i [H_d^γ, ρ_γγ] - i (Ω_out^γ - Ω_in^γ)
//! H_d^γ    = H_S + ⟨γ|H_E|γ⟩ I + ⟨γ|H_SE|γ⟩
//! Ω_out^γ  = Σ_{β≠γ} ⟨γ|H_SE|β⟩ ρ_{βγ}
//! Ω_in^γ   = Σ_{β≠γ} ρ_{γβ} ⟨β|H_SE|γ⟩
//! ```
//!
//! where `⟨γ|X|β⟩` denotes the `(γ,β)` system block of a product-space operator.

use crate::error::{Error, Result};
use crate::linalg::{c64, identity, max_abs, op_norm_estimate, partial_trace, ComplexMatrix, Subsystem, C64};
use crate::model::{build_total_hamiltonian, check_density, Propagator, SystemSpec};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Blocks `ρ_{γβ}`, stored at `γ·d_E + β`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    d_s: usize,
    d_e: usize,
    blocks: Vec<ComplexMatrix>,
}

impl BlockDensity {
    pub fn from_full(rho: &ComplexMatrix, d_s: usize, d_e: usize) -> Result<Self> {
        block_split(rho, d_s, d_e).map(|blocks| Self { d_s, d_e, blocks })
    }

    pub fn to_full(&self) -> ComplexMatrix {
        block_join(&self.blocks, self.d_s, self.d_e)
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn block(&self, gamma: usize, beta: usize) -> &ComplexMatrix {
        &self.blocks[gamma * self.d_e + beta]
    }

    /// `Σ_γ Tr ρ_γγ`.
    pub fn total_probability(&self) -> f64 {
        (0..self.d_e).map(|g| self.block(g, g).trace().re).sum()
    }

    /// `max ‖ρ_βγ - ρ_γβ†‖_max`.
    pub fn adjoint_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for g in 0..self.d_e {
            for b in 0..self.d_e {
                worst = worst.max(max_abs(&(self.block(b, g) - self.block(g, b).adjoint())));
            }
        }
        worst
    }

    fn is_finite(&self) -> bool {
        self.blocks.iter().all(crate::linalg::all_finite)
    }

    fn axpy(&self, scale: f64, other: &[ComplexMatrix]) -> Self {
        let blocks = self.blocks.iter().zip(other).map(|(a, b)| a + b * c64(scale, 0.0)).collect();
        Self { d_s: self.d_s, d_e: self.d_e, blocks }
    }
}

fn block_split(m: &ComplexMatrix, d_s: usize, d_e: usize) -> Result<Vec<ComplexMatrix>> {
    let d = d_s * d_e;
    if m.shape() != (d, d) {
        return Err(Error::Shape(format!("expected {d}x{d} operator, got {}x{}", m.nrows(), m.ncols())));
    }
    let mut blocks = Vec::with_capacity(d_e * d_e);
    for g in 0..d_e {
        for b in 0..d_e {
            blocks.push(ComplexMatrix::from_fn(d_s, d_s, |i, k| m[(i * d_e + g, k * d_e + b)]));
        }
    }
    Ok(blocks)
}

fn block_join(blocks: &[ComplexMatrix], d_s: usize, d_e: usize) -> ComplexMatrix {
    let d = d_s * d_e;
    ComplexMatrix::from_fn(d, d, |r, c| blocks[(r % d_e) * d_e + c % d_e][(r / d_e, c / d_e)])
}

/// Hamiltonian blocks in the environment eigenbasis.
#[derive(Debug, Clone)]
struct HamiltonianBlocks {
    d_e: usize,
    total: Vec<ComplexMatrix>,
    coupling: Vec<ComplexMatrix>,
}

impl HamiltonianBlocks {
    fn new(spec: &SystemSpec, tol: &ToleranceConfig) -> Result<Self> {
        spec.require_env_eigenbasis(tol)?;
        let (d_s, d_e) = (spec.d_s(), spec.d_e());
        let h = build_total_hamiltonian(spec, tol)?;
        Ok(Self {
            d_e,
            total: block_split(h.as_matrix(), d_s, d_e)?,
            coupling: block_split(spec.h_se().as_matrix(), d_s, d_e)?,
        })
    }

    fn total(&self, g: usize, b: usize) -> &ComplexMatrix {
        &self.total[g * self.d_e + b]
    }

    fn coupling(&self, g: usize, b: usize) -> &ComplexMatrix {
        &self.coupling[g * self.d_e + b]
    }
}

fn check_blocks(spec: &SystemSpec, blocks: &BlockDensity, gamma: usize) -> Result<()> {
    if blocks.d_s != spec.d_s() || blocks.d_e != spec.d_e() {
        return Err(Error::Shape("block density does not match the model dimensions".into()));
    }
    if gamma >= blocks.d_e {
        return Err(Error::Shape(format!("environment index {gamma} out of range")));
    }
    Ok(())
}

/// `H_d^γ = H_S + ⟨γ|H_E|γ⟩ I + ⟨γ|H_SE|γ⟩`.
pub fn diagonal_hamiltonian(spec: &SystemSpec, gamma: usize, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    spec.require_env_eigenbasis(tol)?;
    if gamma >= spec.d_e() {
        return Err(Error::Shape(format!("environment index {gamma} out of range")));
    }
    let hse = block_split(spec.h_se().as_matrix(), spec.d_s(), spec.d_e())?;
    let e_gamma = spec.h_e().as_matrix()[(gamma, gamma)];
    Ok(spec.h_s().as_matrix() + identity(spec.d_s()) * e_gamma + &hse[gamma * spec.d_e() + gamma])
}

/// `(Ω_out^γ, Ω_in^γ)`.
pub fn omega_terms(
    spec: &SystemSpec,
    blocks: &BlockDensity,
    gamma: usize,
    tol: &ToleranceConfig,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_blocks(spec, blocks, gamma)?;
    let hb = HamiltonianBlocks::new(spec, tol)?;
    Ok(omega_with(&hb, blocks, gamma))
}

fn omega_with(hb: &HamiltonianBlocks, blocks: &BlockDensity, gamma: usize) -> (ComplexMatrix, ComplexMatrix) {
    let d_s = blocks.d_s;
    let mut out = ComplexMatrix::zeros(d_s, d_s);
    let mut inn = ComplexMatrix::zeros(d_s, d_s);
    for beta in (0..blocks.d_e).filter(|&b| b != gamma) {
        out += hb.coupling(gamma, beta) * blocks.block(beta, gamma);
        inn += blocks.block(gamma, beta) * hb.coupling(beta, gamma);
    }
    (out, inn)
}

/// `-i [H_d^γ, ρ_γγ] - i (Ω_out^γ - Ω_in^γ)`.
pub fn master_rhs_gamma(
    spec: &SystemSpec,
    blocks: &BlockDensity,
    gamma: usize,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    check_blocks(spec, blocks, gamma)?;
    let hb = HamiltonianBlocks::new(spec, tol)?;
    let h_d = hb.total(gamma, gamma);
    let rho = blocks.block(gamma, gamma);
    let (out, inn) = omega_with(&hb, blocks, gamma);
    Ok((h_d * rho - rho * h_d + out - inn) * MINUS_I)
}

/// Every block of `-i [H, ρ]`, `dρ_γβ/dt = -i Σ_δ (H_γδ ρ_δβ - ρ_γδ H_δβ)`.
fn block_rhs(hb: &HamiltonianBlocks, blocks: &BlockDensity) -> Vec<ComplexMatrix> {
    let (d_s, d_e) = (blocks.d_s, blocks.d_e);
    let mut out = Vec::with_capacity(d_e * d_e);
    for g in 0..d_e {
        for b in 0..d_e {
            let mut acc = ComplexMatrix::zeros(d_s, d_s);
            for dl in 0..d_e {
                acc += hb.total(g, dl) * blocks.block(dl, b) - blocks.block(g, dl) * hb.total(dl, b);
            }
            out.push(acc * MINUS_I);
        }
    }
    out
}

/// Classical RK4 on the block system, returning `steps + 1` snapshots on `[0, T]`.
pub fn integrate_blocks(
    spec: &SystemSpec,
    rho0: &ComplexMatrix,
    horizon: f64,
    steps: usize,
    tol: &ToleranceConfig,
) -> Result<Vec<BlockDensity>> {
    const MIN_STEPS: usize = 8;
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!("RK4 needs at least {MIN_STEPS} steps, got {steps}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let hb = HamiltonianBlocks::new(spec, tol)?;
    let h = horizon / steps as f64;
    let mut state = BlockDensity::from_full(rho0, spec.d_s(), spec.d_e())?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(state.clone());
    for step in 1..=steps {
        let k1 = block_rhs(&hb, &state);
        let k2 = block_rhs(&hb, &state.axpy(0.5 * h, &k1));
        let k3 = block_rhs(&hb, &state.axpy(0.5 * h, &k2));
        let k4 = block_rhs(&hb, &state.axpy(h, &k3));
        let blocks = (0..k1.len())
            .map(|n| &state.blocks[n] + (&k1[n] + &k2[n] * c64(2.0, 0.0) + &k3[n] * c64(2.0, 0.0) + &k4[n]) * c64(h / 6.0, 0.0))
            .collect();
        state = BlockDensity { d_s: state.d_s, d_e: state.d_e, blocks };
        if !state.is_finite() {
            return Err(Error::Step(step));
        }
        trajectory.push(state.clone());
    }
    Ok(trajectory)
}

/// The two one-sided contributions `(Tr_E(-iHρ), Tr_E(iρH))` to `dρ_S/dt`.
pub fn derivative_split(spec: &SystemSpec, rho: &ComplexMatrix, tol: &ToleranceConfig) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let h = build_total_hamiltonian(spec, tol)?;
    let h = h.as_matrix();
    if rho.shape() != h.shape() {
        return Err(Error::Shape("state does not match the model dimension".into()));
    }
    let left = partial_trace(&(h * rho * MINUS_I), spec.d_s(), spec.d_e(), Subsystem::System)?;
    let right = partial_trace(&(rho * h * c64(0.0, 1.0)), spec.d_s(), spec.d_e(), Subsystem::System)?;
    Ok((left, right))
}

/// `(I - iH) ρ (I + iH) - ρ - HρH`, algebraically equal to `-iHρ + iρH`.
pub fn symmetrized_rhs(h: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.shape() != rho.shape() || !h.is_square() {
        return Err(Error::Shape("Hamiltonian and state shapes differ".into()));
    }
    let id = identity(h.nrows());
    let a = &id + h * MINUS_I;
    let b = &id + h * c64(0.0, 1.0);
    Ok(a * rho * b - rho - h * rho * h)
}

/// `Σ_n L_n ρ R_n†`.
pub fn structural_rhs(pairs: &[(ComplexMatrix, ComplexMatrix)], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
    for (l, r) in pairs {
        if l.ncols() != rho.nrows() || r.ncols() != rho.ncols() {
            return Err(Error::Shape("operator pair does not match the state".into()));
        }
        acc += l * rho * r.adjoint();
    }
    Ok(acc)
}

/// One row of the master-equation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterSample {
    pub t: f64,
    pub gamma: usize,
    pub omega_out: f64,
    pub omega_in: f64,
    pub rhs_defect: f64,
}

/// Along the exact trajectory, Ω norms and `‖dρ_γγ/dt - rhs‖_max` with the
/// derivative taken by central differences of step `1e-4/‖H‖_op`.
pub fn master_diagnostics(
    spec: &SystemSpec,
    rho0: &ComplexMatrix,
    times: &[f64],
    tol: &ToleranceConfig,
) -> Result<Vec<MasterSample>> {
    check_density(rho0, tol)?;
    let hb = HamiltonianBlocks::new(spec, tol)?;
    let h = build_total_hamiltonian(spec, tol)?;
    let norm = op_norm_estimate(h.as_matrix());
    let fd = if norm > 0.0 { 1e-4 / norm } else { 1e-4 };
    let prop = Propagator::new(&h)?;
    let (d_s, d_e) = (spec.d_s(), spec.d_e());
    let mut rows = Vec::with_capacity(times.len() * d_e);
    for &t in times {
        let blocks = BlockDensity::from_full(&prop.evolve_density(rho0, t), d_s, d_e)?;
        let plus = BlockDensity::from_full(&prop.evolve_density(rho0, t + fd), d_s, d_e)?;
        let minus = BlockDensity::from_full(&prop.evolve_density(rho0, t - fd), d_s, d_e)?;
        for gamma in 0..d_e {
            let (out, inn) = omega_with(&hb, &blocks, gamma);
            let h_d = hb.total(gamma, gamma);
            let rho = blocks.block(gamma, gamma);
            let rhs = (h_d * rho - rho * h_d + &out - &inn) * MINUS_I;
            let deriv = (plus.block(gamma, gamma) - minus.block(gamma, gamma)) * c64(0.5 / fd, 0.0);
            rows.push(MasterSample {
                t,
                gamma,
                omega_out: max_abs(&out),
                omega_in: max_abs(&inn),
                rhs_defect: max_abs(&(deriv - rhs)),
            });
        }
    }
    Ok(rows)
}

pub fn master_table(rows: &[MasterSample]) -> CsvTable {
    let mut table = CsvTable::new(["t", "gamma", "omega_out_norm", "omega_in_norm", "rhs_defect"]);
    for r in rows {
        table.push(vec![
            fmt_f64(r.t),
            r.gamma.to_string(),
            fmt_f64(r.omega_out),
            fmt_f64(r.omega_in),
            fmt_f64(r.rhs_defect),
        ]);
    }
    table
}
