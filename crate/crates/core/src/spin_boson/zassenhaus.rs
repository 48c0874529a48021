//! Zassenhaus factorisation `e^{X+Y} = e^X e^Y e^{-c₂/2!} e^{-c₃/3!} e^{-c₄/4!} ...`.

use crate::error::{Error, Result};
use crate::linalg::{c64, commutator, expm_hermitian, hermiticity_deviation, ComplexMatrix, HermitianMatrix};
use crate::tolerance::ToleranceConfig;

/// Highest order with a closed-form coefficient.
pub const MAX_ORDER: usize = 4;

/// `[c₂, ..., c_order]` with
/// `c₂ = [X,Y]`, `c₃ = 2[[X,Y],Y] + [[X,Y],X]`,
/// `c₄ = 3[[[X,Y],Y],Y] + 3[[[X,Y],X],Y] + [[[X,Y],X],X]`.
pub fn zassenhaus_terms(x: &ComplexMatrix, y: &ComplexMatrix, order: usize) -> Result<Vec<ComplexMatrix>> {
    if !x.is_square() || x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "X is {}x{} and Y is {}x{}; both must be square and equal",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut terms = Vec::new();
    if order < 2 {
        return Ok(terms);
    }
    let c2 = commutator(x, y);
    if order >= 3 {
        let xy_y = commutator(&c2, y);
        let xy_x = commutator(&c2, x);
        let c3 = &xy_y * c64(2.0, 0.0) + &xy_x;
        if order >= 4 {
            let c4 = commutator(&xy_y, y) * c64(3.0, 0.0) + commutator(&xy_x, y) * c64(3.0, 0.0) + commutator(&xy_x, x);
            terms.extend([c2, c3, c4]);
        } else {
            terms.extend([c2, c3]);
        }
    } else {
        terms.push(c2);
    }
    Ok(terms)
}

/// `e^A` for anti-Hermitian `A`, via `e^A = exp(-i (iA))`.
pub fn expm_anti_hermitian(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let h = a * c64(0.0, 1.0);
    let scale = crate::linalg::max_abs(&h).max(1.0);
    let dev = hermiticity_deviation(&h);
    if dev > tol.hermitian.max(1e-12) * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    expm_hermitian(&HermitianMatrix::hermitian_part(&h), 1.0)
}

/// `e^X e^Y Π_{k=2}^{order} e^{-c_k/k!}` for anti-Hermitian `X`, `Y`.
pub fn zassenhaus_product(x: &ComplexMatrix, y: &ComplexMatrix, order: usize, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let terms = zassenhaus_terms(x, y, order)?;
    let mut out = expm_anti_hermitian(x, tol)? * expm_anti_hermitian(y, tol)?;
    let mut factorial = 1.0;
    for (k, c) in terms.iter().enumerate() {
        factorial *= (k + 2) as f64;
        out *= expm_anti_hermitian(&(c * c64(-1.0 / factorial, 0.0)), tol)?;
    }
    Ok(out)
}
