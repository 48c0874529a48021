//! Numerical tolerances shared by every module.
//!
//! A single [`ToleranceConfig`] is passed down to each operation that checks
//! an invariant, so thresholds are never baked into call sites.

use serde::{Deserialize, Serialize};

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Environment variable that overrides [`ToleranceConfig::max_dim`].
pub const MAX_DIM_ENV: &str = "OQS_MAX_DIM";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Relative Hermiticity tolerance: `max|M - M†| <= hermitian * max|M|`.
    pub hermitian: f64,
    /// Absolute tolerance on amplitude norms and traces.
    pub normalization: f64,
    /// Smallest eigenvalue accepted for a density matrix.
    pub psd: f64,
    /// Absolute tolerance on the trace of propagated or reduced states.
    pub trace: f64,
    /// Residual threshold separating round-off from structural divisibility violation.
    pub divisibility_threshold: f64,
    /// Threshold below which a commutator counts as vanishing.
    pub commutator: f64,
    /// Maximum allowed drift when the Fock cutoff is raised.
    pub cutoff_drift: f64,
    /// Require the initial environment weights to be idempotent.
    pub strict_env_purity: bool,
    /// Maximum total Hilbert-space dimension.
    pub max_dim: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            normalization: 1e-12,
            psd: 1e-10,
            trace: 1e-10,
            divisibility_threshold: 1e-8,
            commutator: 1e-10,
            cutoff_drift: 1e-8,
            strict_env_purity: false,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl ToleranceConfig {
    /// Defaults, with `max_dim` taken from `OQS_MAX_DIM` when it is set and parses.
    pub fn from_env() -> Self {
        let mut tol = Self::default();
        if let Some(dim) = std::env::var(MAX_DIM_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            tol.max_dim = dim;
        }
        tol
    }

    /// Dimension-scaled absolute tolerance used for unitarity-style checks.
    pub fn scaled(&self, dim: usize) -> f64 {
        self.hermitian * dim.max(1) as f64
    }
}
