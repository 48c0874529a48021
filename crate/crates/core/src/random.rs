//! Seeded random matrices for model generation and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, ComplexMatrix, ComplexVector, HermitianMatrix, C64};

pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

/// Matrix with i.i.d. standard complex normal entries.
pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    // explicit row-major fill keeps the draw order independent of storage layout
    let mut m = ComplexMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = standard_complex(rng);
        }
    }
    m
}

/// GUE-style Hermitian matrix `(A + A†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::hermitian_part(&random_complex_matrix(rng, n, n))
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| standard_complex(rng));
    let norm = v.norm();
    v / c64(norm, 0.0)
}

/// Full-rank density matrix `G G† / Tr(G G†)` from a Ginibre draw.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_complex_matrix(rng, n, n);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let rho = w / c64(tr, 0.0);
    HermitianMatrix::hermitian_part(&rho).into_inner()
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_complex_matrix(rng, n, n);
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    q
}
