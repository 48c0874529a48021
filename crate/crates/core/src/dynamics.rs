//! The reduced dynamical map as a supermatrix.
//!
//! Index convention, used everywhere in the crate:
//!
//! ```text
//! C[(i1,i2),(j1,j2)](t,t0) = Σ_{α1,α2,γ} d[α1,α2] ⟨j1 γ|U|i1 α1⟩ conj(⟨j2 γ|U|i2 α2⟩)
//! ρ_S(t)[j1,j2]            = Σ_{i1,i2} ρ_S(t0)[i1,i2] C[(i1,i2),(j1,j2)]
//! ```
//!
//! Row `(i1,i2)` sits at `i1·d_S + i2`, likewise for columns. States act as
//! row vectors, so maps compose left to right:
//! `C(t,t0) = C(ts,t0) · C(t,ts)` when the dynamics is divisible.
//! At `t = t0` the map is the identity `δ_{i1 j1} δ_{i2 j2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{partial_trace, vec_row_major, ComplexMatrix, Subsystem, C64, ZERO};
use crate::model::{build_total_hamiltonian, initial_density, InitialState, Propagator, SystemSpec};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SuperMatrix {
    pub d_s: usize,
    pub t0: f64,
    pub t: f64,
    pub matrix: ComplexMatrix,
}

impl SuperMatrix {
    pub fn identity(d_s: usize, t0: f64) -> Self {
        Self { d_s, t0, t: t0, matrix: ComplexMatrix::identity(d_s * d_s, d_s * d_s) }
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> C64 {
        self.matrix[(i1 * self.d_s + i2, j1 * self.d_s + j2)]
    }

    /// Map over `[self.t0, next.t]`: first `self`, then `next`.
    pub fn then(&self, next: &SuperMatrix) -> Result<SuperMatrix> {
        if self.d_s != next.d_s {
            return Err(Error::Shape("cannot compose maps of different dimension".into()));
        }
        Ok(SuperMatrix { d_s: self.d_s, t0: self.t0, t: next.t, matrix: &self.matrix * &next.matrix })
    }

    /// `max |Σ_j C[(i1,i2),(j,j)] - δ_{i1 i2}|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.d_s;
        let mut worst: f64 = 0.0;
        for i1 in 0..d {
            for i2 in 0..d {
                let s: C64 = (0..d).map(|j| self.get(i1, i2, j, j)).sum();
                let target = if i1 == i2 { 1.0 } else { 0.0 };
                worst = worst.max((s - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// `max |C[(i2,i1),(j2,j1)] - conj(C[(i1,i2),(j1,j2)])|`.
    pub fn hermiticity_covariance_defect(&self) -> f64 {
        let d = self.d_s;
        let mut worst: f64 = 0.0;
        for i1 in 0..d {
            for i2 in 0..d {
                for j1 in 0..d {
                    for j2 in 0..d {
                        let a = self.get(i2, i1, j2, j1);
                        let b = self.get(i1, i2, j1, j2).conj();
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
        worst
    }

    /// Rows `i1,i2,j1,j2,re,im`.
    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(["i1", "i2", "j1", "j2", "re", "im"]);
        let d = self.d_s;
        for i1 in 0..d {
            for i2 in 0..d {
                for j1 in 0..d {
                    for j2 in 0..d {
                        let z = self.get(i1, i2, j1, j2);
                        table.push(vec![
                            i1.to_string(),
                            i2.to_string(),
                            j1.to_string(),
                            j2.to_string(),
                            fmt_f64(z.re),
                            fmt_f64(z.im),
                        ]);
                    }
                }
            }
        }
        table
    }

    pub fn to_json(&self) -> SuperMatrixFile {
        SuperMatrixFile {
            d_s: self.d_s,
            t0: self.t0,
            t: self.t,
            entries: crate::model::matrix_to_json(&self.matrix),
        }
    }

    pub fn from_json(file: &SuperMatrixFile) -> Result<Self> {
        let matrix = crate::model::matrix_from_json(&file.entries, "entries")?;
        let n = file.d_s * file.d_s;
        if matrix.shape() != (n, n) {
            return Err(Error::Shape(format!("supermatrix must be {n}x{n}")));
        }
        Ok(Self { d_s: file.d_s, t0: file.t0, t: file.t, matrix })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperMatrixFile {
    #[serde(rename = "d_S")]
    pub d_s: usize,
    pub t0: f64,
    pub t: f64,
    pub entries: crate::model::JsonMatrix,
}

/// Builds the supermatrix from the explicit index sum over `U = exp(-iH(t-t0))`.
pub fn compute_supermatrix(
    spec: &SystemSpec,
    weights: &ComplexMatrix,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<SuperMatrix> {
    let prop = Propagator::for_spec(spec, tol)?;
    supermatrix_from_propagator(&prop, spec.d_s(), spec.d_e(), weights, t0, t)
}

/// Same as [`compute_supermatrix`] with a precomputed propagator, so many
/// times can share one eigendecomposition.
pub fn supermatrix_from_propagator(
    prop: &Propagator,
    d_s: usize,
    d_e: usize,
    weights: &ComplexMatrix,
    t0: f64,
    t: f64,
) -> Result<SuperMatrix> {
    if weights.shape() != (d_e, d_e) {
        return Err(Error::Shape(format!(
            "weights must be {d_e}x{d_e}, got {}x{}",
            weights.nrows(),
            weights.ncols()
        )));
    }
    if prop.dim() != d_s * d_e {
        return Err(Error::Shape("propagator dimension does not match d_S·d_E".into()));
    }
    if t == t0 {
        return Ok(SuperMatrix::identity(d_s, t0));
    }
    let u = prop.unitary(t - t0);
    let matrix = supermatrix_from_unitary(&u, d_s, d_e, weights);
    if !crate::linalg::all_finite(&matrix) {
        return Err(Error::Numerical("non-finite supermatrix entry".into()));
    }
    Ok(SuperMatrix { d_s, t0, t, matrix })
}

/// Index-sum evaluation for a given full-space unitary.
pub fn supermatrix_from_unitary(u: &ComplexMatrix, d_s: usize, d_e: usize, weights: &ComplexMatrix) -> ComplexMatrix {
    let idx = |s: usize, e: usize| s * d_e + e;
    // g[(j2,γ),(i2,α1)] = Σ_α2 d[α1,α2] conj(U[(j2,γ),(i2,α2)])
    let d = d_s * d_e;
    let mut g = ComplexMatrix::from_element(d, d, ZERO);
    for row in 0..d {
        for i2 in 0..d_s {
            for a1 in 0..d_e {
                let mut acc = ZERO;
                for a2 in 0..d_e {
                    acc += weights[(a1, a2)] * u[(row, idx(i2, a2))].conj();
                }
                g[(row, idx(i2, a1))] = acc;
            }
        }
    }
    let n = d_s * d_s;
    let mut c = ComplexMatrix::from_element(n, n, ZERO);
    for i1 in 0..d_s {
        for i2 in 0..d_s {
            for j1 in 0..d_s {
                for j2 in 0..d_s {
                    let mut acc = ZERO;
                    for gamma in 0..d_e {
                        let r1 = idx(j1, gamma);
                        let r2 = idx(j2, gamma);
                        for a1 in 0..d_e {
                            acc += u[(r1, idx(i1, a1))] * g[(r2, idx(i2, a1))];
                        }
                    }
                    c[(i1 * d_s + i2, j1 * d_s + j2)] = acc;
                }
            }
        }
    }
    c
}

/// `ρ_S(t)[j1,j2] = Σ ρ_S[i1,i2] C[(i1,i2),(j1,j2)]`.
pub fn apply_map(c: &SuperMatrix, rho_s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = c.d_s;
    if rho_s.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "state must be {d}x{d}, got {}x{}",
            rho_s.nrows(),
            rho_s.ncols()
        )));
    }
    let row = vec_row_major(rho_s).transpose() * &c.matrix;
    Ok(ComplexMatrix::from_fn(d, d, |j1, j2| row[(0, j1 * d + j2)]))
}

/// Full-space route: build `ρ(t0)`, propagate, trace out the environment.
pub fn reduced_density_direct(
    spec: &SystemSpec,
    initial: &InitialState,
    t0: f64,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    let rho0 = initial_density(initial, spec.d_s(), spec.d_e(), tol)?;
    let h = build_total_hamiltonian(spec, tol)?;
    let rho = crate::model::propagate(&rho0, &h, t0, t, tol)?;
    partial_trace(&rho, spec.d_s(), spec.d_e(), Subsystem::System)
}

/// Reduced state of an initially entangled pure state from the explicit double sum
/// `Σ a_{i1α1} conj(a_{i2α2}) ⟨k1 γ|U|i1 α1⟩ conj(⟨k2 γ|U|i2 α2⟩)`.
pub fn entangled_reduced_state(u: &ComplexMatrix, amplitudes: &ComplexMatrix) -> ComplexMatrix {
    let (d_s, d_e) = amplitudes.shape();
    let idx = |s: usize, e: usize| s * d_e + e;
    ComplexMatrix::from_fn(d_s, d_s, |k1, k2| {
        let mut acc = ZERO;
        for gamma in 0..d_e {
            let mut left = ZERO;
            let mut right = ZERO;
            for i in 0..d_s {
                for a in 0..d_e {
                    left += amplitudes[(i, a)] * u[(idx(k1, gamma), idx(i, a))];
                    right += amplitudes[(i, a)] * u[(idx(k2, gamma), idx(i, a))];
                }
            }
            acc += left * right.conj();
        }
        acc
    })
}
