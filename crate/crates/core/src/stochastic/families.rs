//! Ready-made process families: memoryless qubit channels, a qubit with a
//! persistent environment qubit, and classical chains embedded as
//! measure-and-update instruments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, identity, ComplexMatrix, ONE};
use crate::model::random_model;
use crate::random::random_unitary;
use crate::tolerance::ToleranceConfig;

use super::chain::ChainSpec;
use super::process::{run_cycle, CausalBreak, Device, Environment, ProcessRecord};

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), ONE, ONE, c64(0.0, 0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)])
}

/// Qubit depolarizing channel `ρ ↦ (1 - p) ρ + p I/2`.
pub fn depolarizing_kraus(p: f64) -> Result<Vec<ComplexMatrix>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("depolarizing strength must lie in [0, 1], got {p}")));
    }
    let keep = (1.0 - 0.75 * p).sqrt();
    let flip = (p / 4.0).sqrt();
    Ok(vec![
        identity(2) * c64(keep, 0.0),
        pauli_x() * c64(flip, 0.0),
        pauli_y() * c64(flip, 0.0),
        pauli_z() * c64(flip, 0.0),
    ])
}

/// Computational-basis measurement followed by re-preparation of `|0⟩` or `|+⟩`.
pub fn qubit_break(outcome: Option<usize>, preparation: usize) -> CausalBreak {
    let mut p0 = ComplexMatrix::zeros(2, 2);
    p0[(0, 0)] = ONE;
    let mut p1 = ComplexMatrix::zeros(2, 2);
    p1[(1, 1)] = ONE;
    let plus = ComplexMatrix::from_element(2, 2, c64(0.5, 0.0));
    CausalBreak { projectors: vec![p0.clone(), p1], preparations: vec![p0, plus], outcome, preparation }
}

fn check_layout(n_controls: usize, n_steps: usize, break_index: usize) -> Result<()> {
    if n_controls < 2 {
        return Err(Error::InvalidInput("need at least two control histories".into()));
    }
    if break_index >= n_steps {
        return Err(Error::InvalidInput(format!("break index {break_index} must be below the step count {n_steps}")));
    }
    Ok(())
}

/// Control histories that differ only before the break: random unitaries
/// up to `break_index`, then the break, then a shared suffix.
fn controls_with_suffix(
    seed: u64,
    n_controls: usize,
    break_index: usize,
    suffix: &[Device],
    tol: &ToleranceConfig,
) -> Result<Vec<ProcessRecord>> {
    (0..n_controls)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((c as u64 + 1) << 32));
            let mut steps: Vec<Device> = (0..break_index).map(|_| Device::Unitary(random_unitary(&mut rng, 2))).collect();
            steps.push(Device::CausalBreak(qubit_break(Some(0), 0)));
            steps.extend_from_slice(suffix);
            ProcessRecord::new(2, steps, seed, tol)
        })
        .collect()
}

/// Qubit driven by unitaries and a depolarizing channel, with no environment.
pub fn memoryless_family(
    seed: u64,
    n_controls: usize,
    n_steps: usize,
    break_index: usize,
    tol: &ToleranceConfig,
) -> Result<Vec<ProcessRecord>> {
    check_layout(n_controls, n_steps, break_index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kraus = depolarizing_kraus(0.3)?;
    let suffix: Vec<Device> = (break_index + 1..n_steps)
        .map(|k| if k % 2 == 0 { Device::Channel(kraus.clone()) } else { Device::Unitary(random_unitary(&mut rng, 2)) })
        .collect();
    controls_with_suffix(seed, n_controls, break_index, &suffix, tol)
}

/// Qubit coupled to a qubit environment that persists across the break.
/// The environment starts in `|0⟩⟨0|`, and the pair evolves under a random
/// two-qubit Hamiltonian for `dt` after every device.
pub fn dilated_family(
    seed: u64,
    n_controls: usize,
    n_steps: usize,
    break_index: usize,
    coupling: f64,
    dt: f64,
    tol: &ToleranceConfig,
) -> Result<(Vec<ProcessRecord>, Environment)> {
    check_layout(n_controls, n_steps, break_index)?;
    let spec = random_model(seed, 2, 2, coupling, false, tol)?;
    let mut rho_e0 = ComplexMatrix::zeros(2, 2);
    rho_e0[(0, 0)] = ONE;
    let suffix = vec![Device::Unitary(identity(2)); n_steps - break_index - 1];
    let controls = controls_with_suffix(seed, n_controls, break_index, &suffix, tol)?;
    Ok((controls, Environment { spec, rho_e0, dt }))
}

/// Instrument block that reproduces `chain` when repeated: a Kraus update
/// carrying the last one (first order) or two (second order) symbols, then
/// a measurement of the newest symbol. Returns `(dim, block, ρ0)`.
pub fn embedded_chain(chain: &ChainSpec) -> Result<(usize, Vec<Device>, ComplexMatrix)> {
    chain.validate()?;
    let s = chain.states;
    let ket_bra = |dim: usize, out: usize, inp: usize, w: f64| {
        let mut k = ComplexMatrix::zeros(dim, dim);
        k[(out, inp)] = c64(w.sqrt(), 0.0);
        k
    };
    let (dim, kraus, projectors) = match &chain.second_order {
        None => {
            let mut kraus = Vec::new();
            for b in 0..s {
                for c in 0..s {
                    if chain.transition[b][c] > 0.0 {
                        kraus.push(ket_bra(s, c, b, chain.transition[b][c]));
                    }
                }
            }
            let projectors = (0..s).map(|c| ket_bra(s, c, c, 1.0)).collect::<Vec<_>>();
            (s, kraus, projectors)
        }
        Some(second) => {
            let dim = s * s;
            let mut kraus = Vec::new();
            for a in 0..s {
                for b in 0..s {
                    for (c, &w) in second[a * s + b].iter().enumerate() {
                        if w > 0.0 {
                            kraus.push(ket_bra(dim, b * s + c, a * s + b, w));
                        }
                    }
                }
            }
            let projectors = (0..s)
                .map(|c| (0..s).fold(ComplexMatrix::zeros(dim, dim), |acc, a| acc + ket_bra(dim, a * s + c, a * s + c, 1.0)))
                .collect::<Vec<_>>();
            (dim, kraus, projectors)
        }
    };
    let mut rho0 = ComplexMatrix::zeros(dim, dim);
    rho0[(0, 0)] = ONE;
    Ok((dim, vec![Device::Channel(kraus), Device::Measure(projectors)], rho0))
}

/// Trajectory of measured symbols from the embedded chain, seeded by `chain.seed`.
pub fn embedded_chain_trajectory(chain: &ChainSpec, length: usize, tol: &ToleranceConfig) -> Result<Vec<usize>> {
    let (dim, block, rho0) = embedded_chain(chain)?;
    run_cycle(dim, &block, length, &rho0, chain.seed, tol)
}
