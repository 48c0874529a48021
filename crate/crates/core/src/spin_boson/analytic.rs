//! Closed-form boson factor for vacuum initial conditions.
//!
//! For a multiplet with `γ = η j(j+1)` the boson sees `H_B = β N + γ (b + b†)`, and
//!
//! ```text
//! exp(-i H_B t) = e^{iχ} D(z) exp(-iβtN),   g = γ/β,
//! z = g (e^{-iβt} - 1) = -(ζ_c + i α),      χ = g² (βt - sin βt),
//! α = γ sin(βt)/β,                          ζ_c = γ (1 - cos βt)/β.
//! ```
//!
//! Matrix elements `E_{n,n'} = e^{iχ} e^{-iβn't} ⟨n|D(z)|n'⟩` are summed in log
//! space. The coherence factor between multiplets is
//! `Ω_E(j1,j2,t) = Σ_{n ≤ n_max} E_{n,0}(j1) conj(E_{n,0}(j2))`.
//!
//! [`AnalyticFactors`] keeps the tabulated `α, ζ, γ, Ψ` with `ζ = β(1 - cos γt)/γ`.
//! That `ζ` exchanges the roles of `β` and `γ` relative to `ζ_c`; it agrees
//! with the simulation only when the two coincide, see the tests below.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::tolerance::ToleranceConfig;

use super::{SpinBosonParams, CUTOFF_PROBE};

/// Below this `|γ|` the tabulated `ζ` switches to its series limit.
const GAMMA_GUARD: f64 = 1e-12;

/// Tabulated time-dependent quantities for one multiplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticFactors {
    pub gamma: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub psi: f64,
}

impl AnalyticFactors {
    pub fn new(beta: f64, eta: f64, j: f64, t: f64) -> Self {
        let gamma = eta * j * (j + 1.0);
        let alpha = if beta == 0.0 { gamma * t } else { gamma * (beta * t).sin() / beta };
        let zeta = if gamma.abs() < GAMMA_GUARD {
            // β(1 - cos γt)/γ = βγt²/2 · (1 - (γt)²/12 + ...)
            beta * gamma * t * t / 2.0 * (1.0 - (gamma * t).powi(2) / 12.0)
        } else {
            beta * (1.0 - (gamma * t).cos()) / gamma
        };
        let psi = -0.5 * (alpha * alpha + zeta * zeta);
        Self { gamma, alpha, zeta, psi }
    }
}

/// Displacement `z`, phase `χ` and `e^{-iβt}` for one multiplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BosonPropagatorFactors {
    pub z: C64,
    pub chi: f64,
    pub rotation: C64,
}

impl BosonPropagatorFactors {
    pub fn new(beta: f64, gamma: f64, t: f64) -> Self {
        let bt = beta * t;
        if beta.abs() * t.abs() < 1e-6 {
            // series in βt avoids the g² cancellation
            let z = C64::new(0.0, -gamma * t) + C64::new(-gamma * beta * t * t / 2.0, 0.0);
            let chi = gamma * gamma * beta * t.powi(3) / 6.0;
            return Self { z, chi, rotation: C64::from_polar(1.0, -bt) };
        }
        let g = gamma / beta;
        let rotation = C64::from_polar(1.0, -bt);
        Self { z: (rotation - C64::new(1.0, 0.0)) * g, chi: g * g * (bt - bt.sin()), rotation }
    }

    /// `E_{n,n'} = e^{iχ} e^{-iβ n' t} ⟨n|D(z)|n'⟩`.
    pub fn element(&self, n: usize, n_prime: usize) -> C64 {
        C64::from_polar(1.0, self.chi) * self.rotation.powu(n_prime as u32) * displacement_element(self.z, n, n_prime)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `⟨n|D(z)|n'⟩ = e^{-|z|²/2} Σ_k √(n! n'!) z^{n-k} (-z*)^{n'-k} / (k! (n-k)! (n'-k)!)`.
pub fn displacement_element(z: C64, n: usize, n_prime: usize) -> C64 {
    let r = z.norm();
    let base = -0.5 * r * r + 0.5 * (ln_factorial(n) + ln_factorial(n_prime));
    let arg = z.arg();
    let minus_conj_arg = (-z.conj()).arg();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=n.min(n_prime) {
        let (p, q) = (n - k, n_prime - k);
        if r == 0.0 && (p > 0 || q > 0) {
            continue;
        }
        let log_mag = base - ln_factorial(k) - ln_factorial(p) - ln_factorial(q)
            + if p + q > 0 { (p + q) as f64 * r.ln() } else { 0.0 };
        let phase = p as f64 * arg + q as f64 * minus_conj_arg;
        acc += C64::from_polar(log_mag.exp(), phase);
    }
    acc
}

fn factor_sum(params: &SpinBosonParams, j1: f64, j2: f64, t: f64, n_max: usize) -> C64 {
    let f1 = BosonPropagatorFactors::new(params.beta, params.gamma(j1), t);
    let f2 = BosonPropagatorFactors::new(params.beta, params.gamma(j2), t);
    (0..=n_max).map(|n| f1.element(n, 0) * f2.element(n, 0).conj()).sum()
}

/// `Ω_E(j1, j2, t)` truncated at `params.n_max`, with the same convergence
/// probe as the simulation (`n_max + 4`).
pub fn analytic_boson_factor(params: &SpinBosonParams, j1: f64, j2: f64, t: f64, tol: &ToleranceConfig) -> Result<C64> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let value = factor_sum(params, j1, j2, t, params.n_max);
    let probe = factor_sum(params, j1, j2, t, params.n_max + CUTOFF_PROBE);
    let drift = (value - probe).norm();
    if !(drift <= tol.cutoff_drift) {
        return Err(Error::Cutoff { drift, bound: tol.cutoff_drift });
    }
    Ok(value)
}

/// The same sum with displacement `-(ζ + iα)` and weight `e^Ψ` taken from the
/// tabulated factors, without the `χ` phase.
pub fn tabulated_boson_factor(params: &SpinBosonParams, j1: f64, j2: f64, t: f64) -> C64 {
    let a = AnalyticFactors::new(params.beta, params.eta, j1, t);
    let b = AnalyticFactors::new(params.beta, params.eta, j2, t);
    let za = -C64::new(a.zeta, a.alpha);
    let zb = -C64::new(b.zeta, b.alpha);
    let mut term = C64::new((a.psi + b.psi).exp(), 0.0);
    let mut acc = term;
    for n in 1..=params.n_max {
        term *= za * zb.conj() / n as f64;
        acc += term;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::super::{SpinBosonInitial, SpinBosonNumeric};
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn two_multiplets() -> SpinBosonParams {
        SpinBosonParams { omega: 1.0, beta: 1.0, eta: 0.2, multiplets: vec![0.5, 1.5], n_max: 30 }
    }

    #[test]
    fn vanishes_at_origin() {
        let f = AnalyticFactors::new(1.0, 0.2, 1.5, 0.0);
        assert_eq!((f.alpha, f.zeta, f.psi), (0.0, 0.0, 0.0));
        assert!((f.gamma - 0.75).abs() < 1e-15);
        let p = two_multiplets();
        assert!((analytic_boson_factor(&p, 0.5, 1.5, 0.0, &tol()).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn guarded_zeta_for_vanishing_gamma() {
        let f = AnalyticFactors::new(2.0, 0.0, 1.0, 3.0);
        assert_eq!(f.zeta, 0.0);
        let tiny = AnalyticFactors::new(2.0, 1e-14, 1.0, 3.0);
        assert!((tiny.zeta - 2.0 * 2e-14 * 9.0 / 2.0).abs() < 1e-25);
    }

    #[test]
    fn displacement_matches_coherent_state() {
        let z = C64::new(0.3, -0.8);
        for n in 0..10 {
            let direct = (-0.5 * z.norm_sqr()).exp() * z.powu(n as u32) / ln_factorial(n).exp().sqrt();
            assert!((displacement_element(z, n, 0) - direct).norm() < 1e-14);
        }
        // unitarity of a truncated column
        let col: f64 = (0..60).map(|n| displacement_element(z, n, 3).norm_sqr()).sum();
        assert!((col - 1.0).abs() < 1e-12);
        assert_eq!(displacement_element(C64::new(0.0, 0.0), 2, 2), C64::new(1.0, 0.0));
    }

    #[test]
    fn same_multiplet_factor_is_unimodular() {
        let p = two_multiplets();
        for &t in &[0.3, 2.0, 17.0, 45.0] {
            for &j in &[0.5, 1.5] {
                assert!((analytic_boson_factor(&p, j, j, t, &tol()).unwrap().norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matches_simulation_across_multiplets() {
        let p = two_multiplets();
        let sim = SpinBosonNumeric::new(&p, &SpinBosonInitial::default(), &tol()).unwrap();
        for &t in &[0.4, 1.9, 7.5, 33.0] {
            let numeric = sim.numeric_boson_factor(0.5, 0.5, 1.5, -0.5, t).unwrap();
            let analytic = analytic_boson_factor(&p, 0.5, 1.5, t, &tol()).unwrap();
            assert!((numeric - analytic).norm() < 1e-6, "t={t}: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn tabulated_zeta_disagrees_with_simulation() {
        let p = two_multiplets();
        let sim = SpinBosonNumeric::new(&p, &SpinBosonInitial::default(), &tol()).unwrap();
        let numeric = sim.numeric_boson_factor(0.5, 0.5, 1.5, 0.5, 2.5).unwrap();
        let tabulated = tabulated_boson_factor(&p, 0.5, 1.5, 2.5);
        assert!((numeric - tabulated).norm() > 1e-3);
    }

    #[test]
    fn zero_beta_uses_series_branch() {
        let p = SpinBosonParams { omega: 0.0, beta: 0.0, eta: 0.1, multiplets: vec![0.5, 1.5], n_max: 30 };
        let sim = SpinBosonNumeric::new(&p, &SpinBosonInitial::default(), &tol()).unwrap();
        let numeric = sim.numeric_boson_factor(0.5, 0.5, 1.5, 0.5, 1.0).unwrap();
        let analytic = analytic_boson_factor(&p, 0.5, 1.5, 1.0, &tol()).unwrap();
        assert!((numeric - analytic).norm() < 1e-6);
    }
}
