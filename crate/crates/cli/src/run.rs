//! Command dispatch: each command produces one CSV table plus a JSON summary.

use std::fmt;

use oqs_core::diagnostics::{
    factorization_defect, sie_rate_check, tau_e_width_sweep, timescales, von_neumann_entropy, DEFAULT_SIE_CONSTANT,
};
use oqs_core::divisibility::{divisibility_sweep, sweep_table, SweepConfig, Verdict};
use oqs_core::dynamics::{apply_map, compute_supermatrix, reduced_density_direct};
use oqs_core::linalg::{partial_trace, ComplexMatrix, ComplexVector, Subsystem, ONE};
use oqs_core::master::master_diagnostics;
use oqs_core::model::{initial_density, random_model, Propagator};
use oqs_core::parallel::try_map;
use oqs_core::projection::{projection_trajectory, ProjectorPair};
use oqs_core::report::{fmt_f64, CsvTable};
use oqs_core::spin_boson::{periodicity_semigroup_check, spinboson_table, SpinBosonInitial, SpinBosonNumeric};
use oqs_core::stochastic::{
    causal_break_markov_test, dilated_family, embedded_chain_trajectory, memoryless_family, simulate_chain,
    test_markov_order1, ChainSpec, DEFAULT_ALPHA,
};
use oqs_core::{Error, Execution, InitialState, SystemSpec, ToleranceConfig};
use serde_json::{json, Value};

use crate::config::{fixed_model, Command, ExperimentConfig, MarkovFamily, ModelSource, SpinBosonStart};

#[derive(Debug)]
pub enum RunError {
    /// Bad or inconsistent input; exit code 2.
    Config(String),
    /// Failure inside the numerical core; exit code 3.
    Numerical { module: &'static str, operation: &'static str, error: Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Numerical { module, operation, error } => {
                write!(f, "numerical error in {module}::{operation}: {}: {error}", error.kind())
            }
        }
    }
}

fn num(module: &'static str, operation: &'static str) -> impl Fn(Error) -> RunError {
    move |error| RunError::Numerical { module, operation, error }
}

pub struct Outcome {
    pub table: CsvTable,
    pub results: Value,
}

pub fn run(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, tol),
        Command::Divisibility => divisibility(cfg, tol),
        Command::Spinboson => spinboson(cfg, tol),
        Command::MarkovTest => markov_test(cfg, tol),
        Command::Diagnostics => diagnostics(cfg, tol),
        Command::NzProjection => nz_projection(cfg, tol),
    }
}

struct SeededModel {
    seed: u64,
    spec: SystemSpec,
    initial: Option<InitialState>,
}

/// One model per seed for random sources; a single model, labelled with the
/// first seed, for inline and file sources.
fn models(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Vec<SeededModel>, RunError> {
    let seeds = cfg.seeds();
    match &cfg.model {
        Some(ModelSource::Random(r)) => try_map(Execution::Parallel, &seeds, |&seed| {
            let spec = random_model(seed, r.d_s, r.d_e, r.coupling, r.commuting, tol).map_err(num("model", "random_model"))?;
            Ok(SeededModel { seed, spec, initial: None })
        }),
        Some(source @ (ModelSource::Inline(_) | ModelSource::File(_))) => {
            let (spec, initial) = fixed_model(source, tol).map_err(RunError::Config)?;
            Ok(vec![SeededModel { seed: seeds[0], spec, initial }])
        }
        _ => Err(RunError::Config(format!("{} needs a random, inline or file model", cfg.command.name()))),
    }
}

/// `|0⟩` on the system times the ground state of `H_E`.
fn default_initial(spec: &SystemSpec) -> Result<InitialState, RunError> {
    let mut c = ComplexVector::zeros(spec.d_s());
    c[0] = ONE;
    let d = spec.env_eigenstate_weights(0).map_err(num("model", "env_eigenstate_weights"))?;
    Ok(InitialState::product(c, d))
}

fn seeded(header: &[&str], blocks: Vec<(u64, CsvTable)>) -> CsvTable {
    let mut table = CsvTable::new(std::iter::once("seed").chain(header.iter().copied()));
    for (seed, block) in blocks {
        for row in block.rows() {
            table.push(std::iter::once(seed.to_string()).chain(row.iter().cloned()).collect());
        }
    }
    table
}

fn simulate(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let times = cfg.time_grid.points();
    let t0 = cfg.time_grid.t0;
    let models = models(cfg, tol)?;
    let runs = try_map(Execution::Parallel, &models, |m| {
        let initial = match &m.initial {
            Some(s) => s.clone(),
            None => default_initial(&m.spec)?,
        };
        let mut block = CsvTable::new(["t", "i", "j", "re", "im"]);
        let mut worst_trace: f64 = 0.0;
        for &t in &times {
            let rho = match &initial {
                InitialState::Product { env_weights, .. } => {
                    let c = compute_supermatrix(&m.spec, env_weights, t0, t, tol)
                        .map_err(num("dynamics", "compute_supermatrix"))?;
                    worst_trace = worst_trace.max(c.trace_preservation_defect());
                    apply_map(&c, &initial.system_density()).map_err(num("dynamics", "apply_map"))?
                }
                InitialState::Entangled { .. } => reduced_density_direct(&m.spec, &initial, t0, t, tol)
                    .map_err(num("dynamics", "reduced_density_direct"))?,
            };
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    let z = rho[(i, j)];
                    block.push(vec![fmt_f64(t), i.to_string(), j.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
                }
            }
        }
        Ok((m.seed, block, json!({"seed": m.seed, "max_trace_preservation_defect": worst_trace})))
    })?;
    let results: Vec<Value> = runs.iter().map(|r| r.2.clone()).collect();
    let table = seeded(&["t", "i", "j", "re", "im"], runs.into_iter().map(|r| (r.0, r.1)).collect());
    Ok(Outcome { table, results: json!({ "models": results }) })
}

fn divisibility(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let Some(ModelSource::Random(r)) = &cfg.model else {
        return Err(RunError::Config("divisibility needs a random model".into()));
    };
    let sweep = SweepConfig {
        seeds: cfg.seeds(),
        d_s: r.d_s,
        d_e: r.d_e,
        coupling: r.coupling,
        t0: cfg.time_grid.t0,
        t1: cfg.time_grid.t1,
        commuting_flags: cfg.options.commuting_flags.clone().unwrap_or_else(|| vec![false, true]),
    };
    let rows = divisibility_sweep(&sweep, Execution::Parallel, tol).map_err(num("divisibility", "divisibility_sweep"))?;
    let summary: Vec<Value> = sweep
        .commuting_flags
        .iter()
        .map(|&flag| {
            let sel: Vec<_> = rows.iter().filter(|r| r.commuting == flag).collect();
            json!({
                "commuting": flag,
                "rows": sel.len(),
                "violated": sel.iter().filter(|r| r.report.verdict == Verdict::Violated).count(),
                "max_residual": sel.iter().map(|r| r.report.residual).fold(0.0, f64::max),
            })
        })
        .collect();
    Ok(Outcome { table: sweep_table(&rows), results: json!({ "by_flag": summary }) })
}

fn spinboson(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let Some(ModelSource::SpinBoson(params)) = &cfg.model else {
        return Err(RunError::Config("spinboson needs a spin_boson model".into()));
    };
    let initial = match cfg.options.initial.unwrap_or(SpinBosonStart::EqualSuperposition) {
        SpinBosonStart::EqualSuperposition => SpinBosonInitial::EqualSuperposition,
        SpinBosonStart::MaximallyMixed => SpinBosonInitial::MaximallyMixed,
    };
    let mut results = json!({});
    if cfg.options.periodicity_check {
        let check_tol = cfg.options.periodicity_tolerance.unwrap_or(1e-8);
        let rep = periodicity_semigroup_check(params, &initial, check_tol, tol)
            .map_err(num("spin_boson", "periodicity_semigroup_check"))?;
        results["periodicity"] = json!({
            "period": rep.period,
            "return_residual": rep.return_residual,
            "composition_residual": rep.composition_residual,
            "passed": rep.passed,
        });
    }
    let sim = SpinBosonNumeric::new(params, &initial, tol).map_err(num("spin_boson", "SpinBosonNumeric::new"))?;
    let table = spinboson_table(&sim, &cfg.time_grid.points(), tol).map_err(num("spin_boson", "spinboson_table"))?;
    Ok(Outcome { table, results })
}

fn ket0() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = ONE;
    m
}

fn markov_test(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let o = &cfg.options;
    let seeds = cfg.seeds();
    let family = o.family.unwrap_or(MarkovFamily::Chain);
    match family {
        MarkovFamily::Chain | MarkovFamily::EmbeddedChain => {
            let chain_opts = o.chain.as_ref().ok_or_else(|| RunError::Config("options.chain is required".into()))?;
            let length = o.length.unwrap_or(100_000);
            let alpha = o.alpha.unwrap_or(DEFAULT_ALPHA);
            let rows = try_map(Execution::Parallel, &seeds, |&seed| {
                let chain = ChainSpec {
                    states: chain_opts.transition.len(),
                    transition: chain_opts.transition.clone(),
                    second_order: chain_opts.second_order.clone(),
                    seed,
                };
                let traj = if family == MarkovFamily::Chain {
                    simulate_chain(&chain, length).map_err(num("stochastic", "simulate_chain"))?
                } else {
                    embedded_chain_trajectory(&chain, length, tol).map_err(num("stochastic", "embedded_chain_trajectory"))?
                };
                let res = test_markov_order1(&traj, alpha).map_err(num("stochastic", "test_markov_order1"))?;
                Ok((seed, chain.order(), res))
            })?;
            let mut table = CsvTable::new(["seed", "order", "length", "max_tv", "pairs_tested", "is_markov"]);
            for (seed, order, res) in &rows {
                table.push(vec![
                    seed.to_string(),
                    order.to_string(),
                    length.to_string(),
                    fmt_f64(res.max_tv),
                    res.pairs_tested.to_string(),
                    res.is_markov.to_string(),
                ]);
            }
            let markov = rows.iter().filter(|r| r.2.is_markov).count();
            Ok(Outcome { table, results: json!({ "alpha": alpha, "markov": markov, "non_markov": rows.len() - markov }) })
        }
        MarkovFamily::Memoryless | MarkovFamily::Dilated => {
            let controls = o.controls.unwrap_or(3);
            let steps = o.process_steps.unwrap_or(6);
            let k = o.break_index.unwrap_or(2);
            let threshold = o.threshold.unwrap_or(1e-10);
            let runs = try_map(Execution::Parallel, &seeds, |&seed| {
                let (records, env) = if family == MarkovFamily::Memoryless {
                    (memoryless_family(seed, controls, steps, k, tol).map_err(num("stochastic", "memoryless_family"))?, None)
                } else {
                    let (r, e) = dilated_family(seed, controls, steps, k, o.env_coupling.unwrap_or(1.0), o.dt.unwrap_or(0.7), tol)
                        .map_err(num("stochastic", "dilated_family"))?;
                    (r, Some(e))
                };
                let res = causal_break_markov_test(&records, k, env.as_ref(), &ket0(), threshold, tol)
                    .map_err(num("stochastic", "causal_break_markov_test"))?;
                Ok((seed, res))
            })?;
            let mut table = CsvTable::new(["seed", "pair", "outcome", "preparation", "max_diff", "markovian"]);
            for (seed, res) in &runs {
                for r in &res.rows {
                    table.push(vec![
                        seed.to_string(),
                        r.pair.to_string(),
                        r.outcome.to_string(),
                        r.preparation.to_string(),
                        fmt_f64(r.max_diff),
                        res.markovian.to_string(),
                    ]);
                }
            }
            let refuted = runs.iter().filter(|r| !r.1.markovian).count();
            Ok(Outcome { table, results: json!({ "threshold": threshold, "seeds": runs.len(), "refuted": refuted }) })
        }
    }
}

fn diagnostics(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let taus = cfg.time_grid.points();
    if let (Some(widths), Some(ModelSource::Random(r))) = (&cfg.options.widths, &cfg.model) {
        let seeds = cfg.seeds();
        let mut table = CsvTable::new(["seed", "width", "tau_e", "tau_s", "markov_ratio", "decayed"]);
        for &seed in &seeds {
            let reps = tau_e_width_sweep(seed, r.d_s, r.d_e, r.coupling, widths, &taus, Execution::Parallel, tol)
                .map_err(num("diagnostics", "tau_e_width_sweep"))?;
            for (w, rep) in widths.iter().zip(reps) {
                table.push(vec![
                    seed.to_string(),
                    fmt_f64(*w),
                    fmt_f64(rep.tau_e),
                    fmt_f64(rep.tau_s),
                    fmt_f64(rep.markov_ratio),
                    rep.decayed.to_string(),
                ]);
            }
        }
        return Ok(Outcome { table, results: json!({ "widths": widths }) });
    }
    let c = cfg.options.sie_constant.unwrap_or(DEFAULT_SIE_CONSTANT);
    let (t0, t1) = (cfg.time_grid.t0, cfg.time_grid.t1);
    let models = models(cfg, tol)?;
    let runs = try_map(Execution::Parallel, &models, |m| {
        let initial = match &m.initial {
            Some(s) => s.clone(),
            None => default_initial(&m.spec)?,
        };
        let (d_s, d_e) = (m.spec.d_s(), m.spec.d_e());
        let rho0 = initial_density(&initial, d_s, d_e, tol).map_err(num("model", "initial_density"))?;
        let (values, report) = timescales(&m.spec, &rho0, &taus, tol).map_err(num("diagnostics", "timescales"))?;
        let mut block = CsvTable::new(["tau", "re", "im", "abs_C"]);
        for (tau, v) in taus.iter().zip(&values) {
            block.push(vec![fmt_f64(*tau), fmt_f64(v.re), fmt_f64(v.im), fmt_f64(v.norm())]);
        }
        let rho_t = Propagator::for_spec(&m.spec, tol).map_err(num("model", "Propagator::for_spec"))?.evolve_density(&rho0, t1 - t0);
        let rho_s = partial_trace(&rho_t, d_s, d_e, Subsystem::System).map_err(num("linalg", "partial_trace"))?;
        let entropy = von_neumann_entropy(&rho_s).map_err(num("diagnostics", "von_neumann_entropy"))?;
        let defect = factorization_defect(&m.spec, &initial, t0, t1, tol).map_err(num("diagnostics", "factorization_defect"))?;
        let sie = if initial.is_product() {
            let s = sie_rate_check(&m.spec, &initial, c, tol).map_err(num("diagnostics", "sie_rate_check"))?;
            json!({"gamma0": s.gamma0, "bound": s.bound, "satisfied": s.satisfied})
        } else {
            Value::Null
        };
        let summary = json!({
            "seed": m.seed,
            "tau_E": report.tau_e,
            "tau_S": report.tau_s,
            "markov_ratio": report.markov_ratio,
            "decayed": report.decayed,
            "entropy_t1": entropy,
            "factorization_defect_t1": defect,
            "sie": sie,
        });
        Ok((m.seed, block, summary))
    })?;
    let results: Vec<Value> = runs.iter().map(|r| r.2.clone()).collect();
    let table = seeded(&["tau", "re", "im", "abs_C"], runs.into_iter().map(|r| (r.0, r.1)).collect());
    Ok(Outcome { table, results: json!({ "models": results }) })
}

fn nz_projection(cfg: &ExperimentConfig, tol: &ToleranceConfig) -> Result<Outcome, RunError> {
    let g = cfg.time_grid;
    let models = models(cfg, tol)?;
    let p_dim = cfg.options.p_dim.unwrap_or(1);
    let runs = try_map(Execution::Parallel, &models, |m| {
        let (spec, basis) = m.spec.in_env_eigenbasis(tol).map_err(num("model", "in_env_eigenbasis"))?;
        let (d_s, d_e) = (spec.d_s(), spec.d_e());
        let rho0 = match &m.initial {
            Some(s) => {
                let rho = initial_density(s, d_s, d_e, tol).map_err(num("model", "initial_density"))?;
                basis.to_eigenbasis_full(&rho, d_s, tol).map_err(num("model", "to_eigenbasis_full"))?
            }
            None => initial_density(&InitialState::basis_product(0, 0, d_s, d_e), d_s, d_e, tol)
                .map_err(num("model", "initial_density"))?,
        };
        let pair = ProjectorPair::first(p_dim, d_e).map_err(num("projection", "ProjectorPair::first"))?;
        let samples = projection_trajectory(&spec, &pair, &rho0, g.t1 - g.t0, g.steps - 1, tol)
            .map_err(num("projection", "projection_trajectory"))?;
        let rel: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let master = master_diagnostics(&spec, &rho0, &rel, tol).map_err(num("master", "master_diagnostics"))?;
        let mut block = CsvTable::new(["t", "pq_norm", "qp_norm", "reconstruction_error"]);
        for s in &samples {
            block.push(vec![fmt_f64(g.t0 + s.t), fmt_f64(s.pq_norm), fmt_f64(s.qp_norm), fmt_f64(s.reconstruction_error)]);
        }
        let summary = json!({
            "seed": m.seed,
            "max_pq_norm": samples.iter().map(|s| s.pq_norm).fold(0.0, f64::max),
            "max_qp_norm": samples.iter().map(|s| s.qp_norm).fold(0.0, f64::max),
            "max_reconstruction_error": samples.iter().map(|s| s.reconstruction_error).fold(0.0, f64::max),
            "max_master_rhs_defect": master.iter().map(|r| r.rhs_defect).fold(0.0, f64::max),
            "max_omega_norm": master.iter().map(|r| r.omega_out.max(r.omega_in)).fold(0.0, f64::max),
        });
        Ok((m.seed, block, summary))
    })?;
    let results: Vec<Value> = runs.iter().map(|r| r.2.clone()).collect();
    let table = seeded(&["t", "pq_norm", "qp_norm", "reconstruction_error"], runs.into_iter().map(|r| (r.0, r.1)).collect());
    Ok(Outcome { table, results: json!({ "models": results }) })
}
