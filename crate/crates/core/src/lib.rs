//! Exact simulation of finite open quantum systems and numerical tests of
//! divisibility and Markovianity of their reduced dynamics.
//!
//! The crate evolves a system coupled to a finite (or Fock-truncated)
//! environment with the full unitary `exp(-iHt)`, builds the reduced dynamical
//! map as a supermatrix and measures how far it is from composing over
//! intermediate times. Around that core sit the projection-operator and
//! block master-equation checks, an exactly solvable spin–boson dephasing
//! model, correlation and entropy diagnostics, and classical and quantum
//! process-level Markovianity tests.
//!
//! Sweeps over seeds and time grids run on rayon when the `parallel` feature
//! is enabled (the default); see [`parallel::Execution`].

pub mod diagnostics;
pub mod divisibility;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod master;
pub mod model;
pub mod parallel;
pub mod projection;
pub mod random;
pub mod report;
pub mod spin_boson;
pub mod stochastic;
pub mod tolerance;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, HermitianMatrix, C64};
pub use model::{InitialState, SystemSpec};
pub use parallel::Execution;
pub use tolerance::ToleranceConfig;

/// Library version echoed into run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
