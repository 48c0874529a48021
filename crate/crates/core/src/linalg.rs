//! Dense complex linear algebra on top of `nalgebra`.
//!
//! Composite spaces are always ordered system ⊗ environment, so the full
//! index of `|i, α⟩` is `i * d_E + α`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::ToleranceConfig;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// `|v⟩⟨v|`
pub fn projector(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// Diagonal matrix with the given real entries.
pub fn real_diagonal(entries: &[f64]) -> ComplexMatrix {
    let n = entries.len();
    ComplexMatrix::from_fn(n, n, |r, c| if r == c { c64(entries[r], 0.0) } else { ZERO })
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn fro_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value, from the spectrum of `A†A`.
pub fn op_norm_estimate(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.adjoint() * a;
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// `max|M - M†|`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A complex matrix that has been checked to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if `max|M - M†| <= tol.hermitian * max|M|`.
    pub fn new(m: ComplexMatrix, tol: &ToleranceConfig) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(&m) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let dev = hermiticity_deviation(&m);
        let scale = max_abs(&m);
        if dev > tol.hermitian * scale.max(f64::MIN_POSITIVE) && dev > 0.0 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self(m))
    }

    /// Takes the Hermitian part `(M + M†)/2`.
    pub fn hermitian_part(m: &ComplexMatrix) -> Self {
        Self((m + m.adjoint()) * c64(0.5, 0.0))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * c64(factor, 0.0))
    }

    /// Sum of two Hermitian matrices of equal dimension.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.dim(),
                self.dim(),
                other.dim(),
                other.dim()
            )));
        }
        Ok(Self(&self.0 + &other.0))
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        SpectralDecomposition::new(self)
    }
}

/// `H = V Λ V†`, reusable for exponentials at many times.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn new(h: &HermitianMatrix) -> Result<Self> {
        let n = h.dim();
        if n == 0 {
            return Ok(Self { values: Vec::new(), vectors: ComplexMatrix::zeros(0, 0) });
        }
        let eig = SymmetricEigen::try_new(h.as_matrix().clone(), f64::EPSILON, 1000 * n)
            .ok_or_else(|| Error::Numerical("Hermitian eigendecomposition did not converge".into()))?;
        let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        if values.iter().any(|v| !v.is_finite()) || !all_finite(&eig.eigenvectors) {
            return Err(Error::Numerical("non-finite eigendecomposition".into()));
        }
        Ok(Self { values, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(Λ) V†`.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let fk = f(lambda);
            for r in 0..scaled.nrows() {
                scaled[(r, k)] *= fk;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i H dt)`; exactly the identity when `dt == 0`.
    pub fn unitary(&self, dt: f64) -> ComplexMatrix {
        if dt == 0.0 {
            return identity(self.dim());
        }
        self.apply_function(|lambda| C64::from_polar(1.0, -lambda * dt))
    }

    /// `exp(-i H dt) ψ` without forming the unitary.
    pub fn evolve_vector(&self, psi: &ComplexVector, dt: f64) -> ComplexVector {
        if dt == 0.0 {
            return psi.clone();
        }
        let mut coeffs = self.vectors.adjoint() * psi;
        for (k, &lambda) in self.values.iter().enumerate() {
            coeffs[k] *= C64::from_polar(1.0, -lambda * dt);
        }
        &self.vectors * coeffs
    }
}

/// `U = exp(-i H dt)` via the eigendecomposition of `H`.
pub fn expm_hermitian(h: &HermitianMatrix, dt: f64) -> Result<ComplexMatrix> {
    if dt == 0.0 {
        return Ok(identity(h.dim()));
    }
    Ok(h.spectral()?.unitary(dt))
}

/// Kronecker product, refusing results larger than `tol.max_dim` on either side.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r <= tol.max_dim && c <= tol.max_dim => Ok(a.kronecker(b)),
        (r, c) => Err(Error::SizeLimit {
            requested: r.unwrap_or(usize::MAX).max(c.unwrap_or(usize::MAX)),
            max: tol.max_dim,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Environment,
}

/// Traces out one factor of a `(d_S·d_E)`-dimensional operator.
pub fn partial_trace(rho: &ComplexMatrix, d_s: usize, d_e: usize, keep: Subsystem) -> Result<ComplexMatrix> {
    let d = d_s * d_e;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Shape(format!(
            "partial trace expects {d}x{d} (d_S={d_s}, d_E={d_e}), got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(match keep {
        Subsystem::System => ComplexMatrix::from_fn(d_s, d_s, |i, j| {
            (0..d_e).map(|a| rho[(i * d_e + a, j * d_e + a)]).sum()
        }),
        Subsystem::Environment => ComplexMatrix::from_fn(d_e, d_e, |a, b| {
            (0..d_s).map(|i| rho[(i * d_e + a, i * d_e + b)]).sum()
        }),
    })
}

/// Sorted eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let h = HermitianMatrix::hermitian_part(m);
    let mut values = h.spectral()?.values;
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

/// Row-major vectorisation, `vec(X)[a·n + b] = X[a, b]`.
pub fn vec_row_major(x: &ComplexMatrix) -> ComplexVector {
    let (r, c) = x.shape();
    ComplexVector::from_fn(r * c, |k, _| x[(k / c, k % c)])
}

pub fn unvec_row_major(v: &ComplexVector, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |a, b| v[a * cols + b])
}
