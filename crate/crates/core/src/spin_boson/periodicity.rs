//! Common period of the spin–boson dynamics and the two-interval composition check.

use crate::dynamics::{apply_map, compute_supermatrix};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, ComplexMatrix, ONE};
use crate::tolerance::ToleranceConfig;

use super::{build_spinboson, SpinBosonInitial, SpinBosonNumeric, SpinBosonParams};

/// Largest denominator accepted when rationalising frequency ratios.
pub const DENOMINATOR_BOUND: u64 = 64;

const RATIO_TOLERANCE: f64 = 1e-9;

/// Frequencies present in the reduced dynamics: `ω` (and `ω/2` when integer
/// and half-integer multiplets coexist), `β`, every `γ(j)`, and the
/// cross-multiplet phase rates `(γ(j1)² - γ(j2)²)/β`. Zeros are skipped.
pub fn dynamical_frequencies(params: &SpinBosonParams) -> Result<Vec<f64>> {
    if params.beta == 0.0 && params.eta != 0.0 {
        return Err(Error::Incommensurable {
            bound: DENOMINATOR_BOUND,
            detail: "β = 0 with η ≠ 0 displaces the boson without bound".into(),
        });
    }
    let mut freqs = vec![params.omega, params.beta];
    // integer and half-integer multiplets together give half-odd m1 - m2
    let parity = |j: f64| (2.0 * j).round() as i64 % 2;
    if params.multiplets.iter().any(|&j| parity(j) != parity(params.multiplets[0])) {
        freqs.push(params.omega / 2.0);
    }
    freqs.extend(params.multiplets.iter().map(|&j| params.gamma(j)));
    if params.beta != 0.0 {
        for (a, &j1) in params.multiplets.iter().enumerate() {
            for &j2 in &params.multiplets[a + 1..] {
                freqs.push((params.gamma(j1).powi(2) - params.gamma(j2).powi(2)) / params.beta);
            }
        }
    }
    Ok(freqs.into_iter().map(f64::abs).filter(|f| *f > 0.0).collect())
}

/// Best rational `p/q` with `q ≤ bound` from the continued-fraction expansion,
/// accepted only if it reproduces `x` to relative accuracy `1e-9`.
fn rationalize(x: f64, bound: u64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a > u32::MAX as f64 {
            return None;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > bound {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= RATIO_TOLERANCE * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = rest - a as f64;
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `T > 0` with `f T ∈ 2πℤ` for every frequency.
pub fn common_period(frequencies: &[f64]) -> Result<f64> {
    let Some(&f1) = frequencies.first() else {
        return Ok(2.0 * std::f64::consts::PI);
    };
    let mut ratios = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        let r = f / f1;
        let pq = rationalize(r, DENOMINATOR_BOUND).ok_or_else(|| Error::Incommensurable {
            bound: DENOMINATOR_BOUND,
            detail: format!("frequency ratio {r} has no rational approximation"),
        })?;
        ratios.push(pq);
    }
    let lcm_q = ratios.iter().fold(1u64, |l, &(_, q)| l / gcd(l, q) * q);
    let g = ratios.iter().fold(0u64, |g, &(p, q)| gcd(g, p * (lcm_q / q)));
    let f0 = f1 * g as f64 / lcm_q as f64;
    Ok(2.0 * std::f64::consts::PI / f0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityReport {
    pub period: f64,
    /// `‖ρ_S(T) - ρ_S(0)‖_max`.
    pub return_residual: f64,
    /// `‖C(T,0)[ρ_S(T)] - ρ_S(2T)‖_max`.
    pub composition_residual: f64,
    pub passed: bool,
}

/// Checks `ρ_S(T) = ρ_S(0)` and `ρ_S(2T) = L_{T,0} ρ_S(T)` at the common period.
pub fn periodicity_semigroup_check(
    params: &SpinBosonParams,
    initial: &SpinBosonInitial,
    check_tol: f64,
    tol: &ToleranceConfig,
) -> Result<PeriodicityReport> {
    let period = common_period(&dynamical_frequencies(params)?)?;
    let sim = SpinBosonNumeric::new(params, initial, tol)?;
    let rho_0 = sim.reduced_state(0.0)?;
    let rho_t = sim.reduced_state(period)?;
    let rho_2t = sim.reduced_state(2.0 * period)?;
    let spec = build_spinboson(params, tol)?;
    let mut vacuum = ComplexMatrix::zeros(spec.d_e(), spec.d_e());
    vacuum[(0, 0)] = ONE;
    let map = compute_supermatrix(&spec, &vacuum, 0.0, period, tol)?;
    let composed = apply_map(&map, &rho_t)?;
    let return_residual = max_abs(&(&rho_t - &rho_0));
    let composition_residual = max_abs(&(composed - &rho_2t));
    Ok(PeriodicityReport {
        period,
        return_residual,
        composition_residual,
        passed: return_residual <= check_tol && composition_residual <= check_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn rationals() {
        assert_eq!(rationalize(1.5, 64), Some((3, 2)));
        assert_eq!(rationalize(1.0, 64), Some((1, 1)));
        assert_eq!(rationalize(7.0 / 64.0, 64), Some((7, 64)));
        assert_eq!(rationalize(2f64.sqrt(), 64), None);
    }

    #[test]
    fn periods() {
        assert!((common_period(&[2.0 * PI]).unwrap() - 1.0).abs() < 1e-12);
        assert!((common_period(&[2.0 * PI, 3.0 * PI]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(common_period(&[1.0, 2f64.sqrt()]), Err(Error::Incommensurable { .. })));
    }

    #[test]
    fn lattice_semigroup_holds() {
        let p = SpinBosonParams { omega: 2.0 * PI, beta: 2.0 * PI, eta: 8.0 * PI / 3.0, multiplets: vec![0.5], n_max: 40 };
        let rep = periodicity_semigroup_check(&p, &SpinBosonInitial::default(), 1e-8, &tol()).unwrap();
        assert!((rep.period - 1.0).abs() < 1e-12);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn free_evolution_is_periodic() {
        let p = SpinBosonParams { omega: 1.5, beta: 1.0, eta: 0.0, multiplets: vec![0.5, 1.0], n_max: 2 };
        let rep = periodicity_semigroup_check(&p, &SpinBosonInitial::default(), 1e-10, &tol()).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn incommensurable_is_rejected() {
        let p = SpinBosonParams { omega: 2f64.sqrt(), beta: 1.0, eta: 0.0, multiplets: vec![0.5], n_max: 2 };
        let err = periodicity_semigroup_check(&p, &SpinBosonInitial::default(), 1e-8, &tol()).unwrap_err();
        assert!(matches!(err, Error::Incommensurable { .. }));
    }
}
