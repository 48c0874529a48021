//! Device sequences acting on a system, optionally dilated by a persistent environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::SuperMatrix;
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, kron, max_abs, partial_trace, ComplexMatrix, Subsystem, ONE};
use crate::model::{check_density, matrix_from_json, matrix_to_json, JsonMatrix, Propagator, SystemSpec};
use crate::report::{fmt_f64, CsvTable};
use crate::tolerance::ToleranceConfig;

use super::chain::sample_index;

/// Completeness tolerance for Kraus sets, projector sets and unitaries.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Outcomes below this Born probability cannot be conditioned on.
const MIN_PROBABILITY: f64 = 1e-12;

/// Measure-and-reprepare event.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalBreak {
    pub projectors: Vec<ComplexMatrix>,
    pub preparations: Vec<ComplexMatrix>,
    /// Declared outcome; sampled from the Born rule when absent.
    pub outcome: Option<usize>,
    pub preparation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Device {
    Unitary(ComplexMatrix),
    /// Kraus operators of a trace-preserving map.
    Channel(Vec<ComplexMatrix>),
    CausalBreak(CausalBreak),
    /// Selective projective measurement with a sampled outcome.
    Measure(Vec<ComplexMatrix>),
}

impl Device {
    fn validate(&self, dim: usize, tol: &ToleranceConfig) -> Result<()> {
        let shape_ok = |m: &ComplexMatrix| m.shape() == (dim, dim);
        let complete = |ops: &[ComplexMatrix], what: &str, gram: bool| -> Result<()> {
            if ops.is_empty() || !ops.iter().all(shape_ok) {
                return Err(Error::Shape(format!("{what} must be a non-empty list of {dim}x{dim} matrices")));
            }
            let sum = ops.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, k| {
                if gram {
                    acc + k.adjoint() * k
                } else {
                    acc + k
                }
            });
            let defect = max_abs(&(sum - identity(dim)));
            if defect > COMPLETENESS_TOL {
                return Err(Error::Completeness(format!("{what} deviate from the identity by {defect:.3e}")));
            }
            Ok(())
        };
        match self {
            Device::Unitary(u) => {
                if !shape_ok(u) {
                    return Err(Error::Shape(format!("unitary must be {dim}x{dim}")));
                }
                complete(std::slice::from_ref(u), "U†U", true)
            }
            Device::Channel(kraus) => complete(kraus, "Kraus operators", true),
            Device::Measure(projectors) => complete(projectors, "projectors", false),
            Device::CausalBreak(b) => {
                complete(&b.projectors, "projectors", false)?;
                if b.preparations.is_empty() || !b.preparations.iter().all(shape_ok) {
                    return Err(Error::Shape(format!("preparations must be {dim}x{dim} states")));
                }
                for p in &b.preparations {
                    check_density(p, tol)?;
                }
                if b.outcome.is_some_and(|r| r >= b.projectors.len()) || b.preparation >= b.preparations.len() {
                    return Err(Error::InvalidInput("declared outcome or preparation out of range".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRecord {
    dim: usize,
    steps: Vec<Device>,
    seed: u64,
}

impl ProcessRecord {
    pub fn new(dim: usize, steps: Vec<Device>, seed: u64, tol: &ToleranceConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("system dimension must be positive".into()));
        }
        for d in &steps {
            d.validate(dim, tol)?;
        }
        Ok(Self { dim, steps, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[Device] {
        &self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Copy with the break at `index` forced to `(outcome, preparation)`.
    fn with_break_choice(&self, index: usize, outcome: usize, preparation: usize) -> Result<Self> {
        let mut out = self.clone();
        match out.steps.get_mut(index) {
            Some(Device::CausalBreak(b)) => {
                b.outcome = Some(outcome);
                b.preparation = preparation;
                Ok(out)
            }
            _ => Err(Error::Contract(format!("step {index} is not a causal break"))),
        }
    }
}

/// Persistent environment evolving jointly with the system for `dt` after every device.
#[derive(Debug, Clone)]
pub struct Environment {
    pub spec: SystemSpec,
    pub rho_e0: ComplexMatrix,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRun {
    /// `states[j]` is the system state just before device `j`.
    pub states: Vec<ComplexMatrix>,
    pub final_state: ComplexMatrix,
    /// Outcome recorded at each causal break or measurement.
    pub outcomes: Vec<Option<usize>>,
}

impl ProcessRun {
    /// `states[l]` for `l < n`, the final state for `l = n`.
    pub fn probe(&self, l: usize) -> Option<&ComplexMatrix> {
        if l == self.states.len() {
            Some(&self.final_state)
        } else {
            self.states.get(l)
        }
    }
}

struct Runner<'a> {
    d_s: usize,
    d_e: usize,
    lift: ComplexMatrix,
    propagator: Option<(Propagator, f64)>,
    tol: &'a ToleranceConfig,
}

impl<'a> Runner<'a> {
    fn new(dim: usize, env: Option<&Environment>, tol: &'a ToleranceConfig) -> Result<Self> {
        match env {
            None => Ok(Self { d_s: dim, d_e: 1, lift: identity(1), propagator: None, tol }),
            Some(e) => {
                if e.spec.d_s() != dim {
                    return Err(Error::Shape(format!("environment model has d_S = {} but devices act on {dim}", e.spec.d_s())));
                }
                check_density(&e.rho_e0, tol)?;
                Ok(Self {
                    d_s: dim,
                    d_e: e.spec.d_e(),
                    lift: identity(e.spec.d_e()),
                    propagator: Some((Propagator::for_spec(&e.spec, tol)?, e.dt)),
                    tol,
                })
            }
        }
    }

    fn lifted(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.d_e == 1 {
            return Ok(a.clone());
        }
        kron(a, &self.lift, self.tol)
    }

    fn reduce(&self, joint: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.d_e == 1 {
            return Ok(joint.clone());
        }
        partial_trace(joint, self.d_s, self.d_e, Subsystem::System)
    }

    fn born(&self, projectors: &[ComplexMatrix], joint: &ComplexMatrix) -> Result<Vec<f64>> {
        let rho_s = self.reduce(joint)?;
        Ok(projectors.iter().map(|p| (p * &rho_s).trace().re.max(0.0)).collect())
    }

    fn collapse(&self, projector: &ComplexMatrix, joint: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
        let p = self.lifted(projector)?;
        let post = &p * joint * &p;
        let prob = post.trace().re;
        Ok((post, prob))
    }

    fn apply(&self, device: &Device, joint: &ComplexMatrix, rng: &mut ChaCha8Rng) -> Result<(ComplexMatrix, Option<usize>)> {
        match device {
            Device::Unitary(u) => {
                let u = self.lifted(u)?;
                Ok((&u * joint * u.adjoint(), None))
            }
            Device::Channel(kraus) => {
                let mut out = ComplexMatrix::zeros(joint.nrows(), joint.ncols());
                for k in kraus {
                    let k = self.lifted(k)?;
                    out += &k * joint * k.adjoint();
                }
                Ok((out, None))
            }
            Device::Measure(projectors) => {
                let probs = self.born(projectors, joint)?;
                let r = sample_index(rng, &probs);
                let (post, prob) = self.collapse(&projectors[r], joint)?;
                if prob < MIN_PROBABILITY {
                    return Err(Error::Numerical("sampled a zero-probability outcome".into()));
                }
                Ok((post * c64(1.0 / prob, 0.0), Some(r)))
            }
            Device::CausalBreak(b) => {
                let r = match b.outcome {
                    Some(r) => r,
                    None => sample_index(rng, &self.born(&b.projectors, joint)?),
                };
                let prep = &b.preparations[b.preparation];
                if self.d_e == 1 {
                    return Ok((prep * joint.trace(), Some(r)));
                }
                let (post, prob) = self.collapse(&b.projectors[r], joint)?;
                if prob < MIN_PROBABILITY {
                    return Err(Error::Contract(format!("break outcome {r} has zero probability")));
                }
                let env = partial_trace(&post, self.d_s, self.d_e, Subsystem::Environment)? * c64(1.0 / prob, 0.0);
                Ok((kron(prep, &env, self.tol)?, Some(r)))
            }
        }
    }

    fn evolve(&self, joint: ComplexMatrix) -> ComplexMatrix {
        match &self.propagator {
            Some((p, dt)) => p.evolve_density(&joint, *dt),
            None => joint,
        }
    }
}

/// Applies the devices in order. In dilated mode the joint state starts as
/// `ρ0 ⊗ ρ_E0`, each device acts on the system factor, and the pair then
/// evolves under the full Hamiltonian for `dt`.
pub fn run_process(
    record: &ProcessRecord,
    env: Option<&Environment>,
    rho0: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<ProcessRun> {
    if rho0.shape() != (record.dim, record.dim) {
        return Err(Error::Shape(format!("initial state must be {0}x{0}", record.dim)));
    }
    check_density(rho0, tol)?;
    let runner = Runner::new(record.dim, env, tol)?;
    let mut joint = match env {
        Some(e) => kron(rho0, &e.rho_e0, tol)?,
        None => rho0.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(record.seed);
    let mut states = Vec::with_capacity(record.len());
    let mut outcomes = Vec::with_capacity(record.len());
    for device in &record.steps {
        states.push(runner.reduce(&joint)?);
        let (next, outcome) = runner.apply(device, &joint, &mut rng)?;
        joint = runner.evolve(next);
        outcomes.push(outcome);
        if !crate::linalg::all_finite(&joint) {
            return Err(Error::Numerical("non-finite state during process".into()));
        }
    }
    Ok(ProcessRun { states, final_state: runner.reduce(&joint)?, outcomes })
}

/// Repeats a device block `cycles` times without storing states and returns
/// every sampled measurement outcome.
pub fn run_cycle(
    dim: usize,
    block: &[Device],
    cycles: usize,
    rho0: &ComplexMatrix,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<Vec<usize>> {
    for d in block {
        d.validate(dim, tol)?;
    }
    check_density(rho0, tol)?;
    let runner = Runner::new(dim, None, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut joint = rho0.clone();
    let mut outcomes = Vec::new();
    for _ in 0..cycles {
        for d in block {
            let (next, outcome) = runner.apply(d, &joint, &mut rng)?;
            joint = next;
            if let (Device::Measure(_), Some(r)) = (d, outcome) {
                outcomes.push(r);
            }
        }
    }
    Ok(outcomes)
}

/// Map from the state before device `from` to the state before device `to`
/// (row-vector convention, as in [`crate::dynamics`]). Only linear devices
/// are allowed; a causal break acts as `X ↦ Tr(X) P_s`.
pub fn induced_map(record: &ProcessRecord, from: usize, to: usize) -> Result<SuperMatrix> {
    if from > to || to > record.len() {
        return Err(Error::InvalidInput(format!("need from <= to <= {}, got {from}..{to}", record.len())));
    }
    let d = record.dim;
    let mut c = ComplexMatrix::zeros(d * d, d * d);
    for i1 in 0..d {
        for i2 in 0..d {
            let mut x = ComplexMatrix::zeros(d, d);
            x[(i1, i2)] = ONE;
            for device in &record.steps[from..to] {
                x = match device {
                    Device::Unitary(u) => u * &x * u.adjoint(),
                    Device::Channel(kraus) => kraus.iter().fold(ComplexMatrix::zeros(d, d), |acc, k| acc + k * &x * k.adjoint()),
                    Device::CausalBreak(b) => &b.preparations[b.preparation] * x.trace(),
                    Device::Measure(_) => {
                        return Err(Error::InvalidInput("selective measurements do not induce a linear map".into()))
                    }
                };
            }
            for j1 in 0..d {
                for j2 in 0..d {
                    c[(i1 * d + i2, j1 * d + j2)] = x[(j1, j2)];
                }
            }
        }
    }
    Ok(SuperMatrix { d_s: d, t0: from as f64, t: to as f64, matrix: c })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalBreakRow {
    /// Index `c` of the control compared against control 0.
    pub pair: usize,
    pub outcome: usize,
    pub preparation: usize,
    pub max_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalBreakResult {
    pub markovian: bool,
    pub max_diff: f64,
    pub rows: Vec<CausalBreakRow>,
}

/// Runs every control history through each forced break outcome and
/// re-preparation and compares the post-break states at all probe times
/// `l > k`. Outcomes that are impossible for some control are skipped.
/// A finite search can only refute Markovianity; a `markovian` verdict means
/// no difference above `threshold` was found.
pub fn causal_break_markov_test(
    controls: &[ProcessRecord],
    break_index: usize,
    env: Option<&Environment>,
    rho0: &ComplexMatrix,
    threshold: f64,
    tol: &ToleranceConfig,
) -> Result<CausalBreakResult> {
    let Some(first) = controls.first() else {
        return Err(Error::Contract("at least two control histories are required".into()));
    };
    if controls.len() < 2 {
        return Err(Error::Contract("at least two control histories are required".into()));
    }
    let Some(Device::CausalBreak(brk)) = first.steps.get(break_index) else {
        return Err(Error::Contract(format!("step {break_index} is not a causal break")));
    };
    for (c, rec) in controls.iter().enumerate().skip(1) {
        if rec.dim != first.dim || rec.len() != first.len() {
            return Err(Error::Contract(format!("control {c} has a different shape")));
        }
        if rec.steps[break_index..] != first.steps[break_index..] {
            return Err(Error::Contract(format!("control {c} differs at or after the break")));
        }
    }
    let n = first.len();
    let mut rows = Vec::new();
    for outcome in 0..brk.projectors.len() {
        for preparation in 0..brk.preparations.len() {
            let runs: Vec<Result<ProcessRun>> = controls
                .iter()
                .map(|rec| run_process(&rec.with_break_choice(break_index, outcome, preparation)?, env, rho0, tol))
                .collect();
            if runs.iter().any(|r| matches!(r, Err(Error::Contract(_)))) {
                continue;
            }
            let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
            for (c, run) in runs.iter().enumerate().skip(1) {
                let mut worst: f64 = 0.0;
                for l in break_index + 1..=n {
                    let (a, b) = (runs[0].probe(l).unwrap(), run.probe(l).unwrap());
                    worst = worst.max(max_abs(&(a - b)));
                }
                rows.push(CausalBreakRow { pair: c, outcome, preparation, max_diff: worst });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Contract("no break outcome is possible for every control".into()));
    }
    let max_diff = rows.iter().map(|r| r.max_diff).fold(0.0, f64::max);
    Ok(CausalBreakResult { markovian: max_diff <= threshold, max_diff, rows })
}

pub fn causal_break_table(result: &CausalBreakResult) -> CsvTable {
    let mut table = CsvTable::new(["pair", "outcome", "preparation", "max_diff"]);
    for r in &result.rows {
        table.push(vec![r.pair.to_string(), r.outcome.to_string(), r.preparation.to_string(), fmt_f64(r.max_diff)]);
    }
    table
}

// ---------------------------------------------------------------------------
// JSON process files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceFile {
    Unitary {
        matrix: JsonMatrix,
    },
    Channel {
        kraus: Vec<JsonMatrix>,
    },
    CausalBreak {
        projectors: Vec<JsonMatrix>,
        preparations: Vec<JsonMatrix>,
        #[serde(default)]
        outcome: Option<usize>,
        #[serde(default)]
        preparation: usize,
    },
    Measure {
        projectors: Vec<JsonMatrix>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessFile {
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub steps: Vec<DeviceFile>,
}

fn matrices(list: &[JsonMatrix], field: &str) -> Result<Vec<ComplexMatrix>> {
    list.iter().map(|m| matrix_from_json(m, field)).collect()
}

impl ProcessFile {
    pub fn from_record(record: &ProcessRecord) -> Self {
        let to = |ms: &[ComplexMatrix]| ms.iter().map(matrix_to_json).collect::<Vec<_>>();
        let steps = record
            .steps
            .iter()
            .map(|d| match d {
                Device::Unitary(u) => DeviceFile::Unitary { matrix: matrix_to_json(u) },
                Device::Channel(k) => DeviceFile::Channel { kraus: to(k) },
                Device::Measure(p) => DeviceFile::Measure { projectors: to(p) },
                Device::CausalBreak(b) => DeviceFile::CausalBreak {
                    projectors: to(&b.projectors),
                    preparations: to(&b.preparations),
                    outcome: b.outcome,
                    preparation: b.preparation,
                },
            })
            .collect();
        Self { dim: record.dim, seed: record.seed, steps }
    }

    pub fn to_record(&self, tol: &ToleranceConfig) -> Result<ProcessRecord> {
        let steps = self
            .steps
            .iter()
            .map(|d| {
                Ok(match d {
                    DeviceFile::Unitary { matrix } => Device::Unitary(matrix_from_json(matrix, "matrix")?),
                    DeviceFile::Channel { kraus } => Device::Channel(matrices(kraus, "kraus")?),
                    DeviceFile::Measure { projectors } => Device::Measure(matrices(projectors, "projectors")?),
                    DeviceFile::CausalBreak { projectors, preparations, outcome, preparation } => {
                        Device::CausalBreak(CausalBreak {
                            projectors: matrices(projectors, "projectors")?,
                            preparations: matrices(preparations, "preparations")?,
                            outcome: *outcome,
                            preparation: *preparation,
                        })
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ProcessRecord::new(self.dim, steps, self.seed, tol)
    }
}
