//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Run with `cargo test --release -p oqs-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oqs_core::diagnostics::{factorization_defect, sie_rate_check};
use oqs_core::divisibility::{composition_residual, divisibility_sweep, equal_weight_identity, SweepConfig};
use oqs_core::dynamics::{apply_map, compute_supermatrix, reduced_density_direct};
use oqs_core::linalg::{c64, identity, kron, max_abs, projector, ComplexMatrix, ONE};
use oqs_core::master::{master_rhs_gamma, omega_terms, BlockDensity};
use oqs_core::model::{build_total_hamiltonian, initial_density, random_model, Propagator};
use oqs_core::projection::{
    apply_projector, memory_reconstruction_error, p_block_evolution, projection_trajectory, ProjectorPair, Which,
};
use oqs_core::random::{random_density, random_hermitian, random_pure_state};
use oqs_core::spin_boson::zassenhaus::expm_anti_hermitian;
use oqs_core::spin_boson::{
    analytic_boson_factor, periodicity_semigroup_check, zassenhaus_product, zassenhaus_terms, SpinBosonInitial,
    SpinBosonNumeric, SpinBosonParams,
};
use oqs_core::stochastic::{
    causal_break_markov_test, dilated_family, memoryless_family, simulate_chain, test_markov_order1, ChainSpec,
};
use oqs_core::{Error, Execution, C64, InitialState, SystemSpec, ToleranceConfig};

type Check = Result<(bool, String), String>;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn random_product_state(seed: u64, d_s: usize, d_e: usize) -> InitialState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00ac_ce97);
    let c = random_pure_state(&mut rng, d_s);
    let d = projector(&random_pure_state(&mut rng, d_e));
    InitialState::product(c, d)
}

fn eigenbasis_model(seed: u64, d_s: usize, d_e: usize, commuting: bool) -> Result<SystemSpec, String> {
    let t = tol();
    Ok(random_model(seed, d_s, d_e, 1.0, commuting, &t).map_err(err)?.in_env_eigenbasis(&t).map_err(err)?.0)
}

fn phase(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

fn ket0() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = ONE;
    m
}

fn c1_map_oracle() -> Check {
    let t = tol();
    let grid = linspace(0.0, 3.0, 10);
    let mut worst: f64 = 0.0;
    let seeds = 0..54u64;
    let n = seeds.clone().count();
    for seed in seeds {
        let (d_s, d_e) = (2 + (seed % 3) as usize, 2 + ((seed / 3) % 3) as usize);
        let spec = random_model(seed, d_s, d_e, 1.0, false, &t).map_err(err)?;
        let state = random_product_state(seed, d_s, d_e);
        let InitialState::Product { env_weights, .. } = &state else { unreachable!() };
        let rho_s = state.system_density();
        for &time in &grid {
            let c = compute_supermatrix(&spec, env_weights, 0.0, time, &t).map_err(err)?;
            let via_map = apply_map(&c, &rho_s).map_err(err)?;
            let direct = reduced_density_direct(&spec, &state, 0.0, time, &t).map_err(err)?;
            worst = worst.max(max_abs(&(via_map - direct)));
        }
    }
    Ok((worst < 1e-11, format!("{n} models x 10 times, max |map - direct| = {worst:.2e}")))
}

fn c2_trivial_environment() -> Check {
    let t = tol();
    let grid = [0.0, 0.4, 1.1, 1.9, 3.0];
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for seed in 0..50u64 {
        let d_s = 2 + (seed % 3) as usize;
        let spec = random_model(seed, d_s, 1, 1.0, false, &t).map_err(err)?;
        for a in 0..grid.len() {
            for b in a..grid.len() {
                for c in b..grid.len() {
                    let rep = composition_residual(&spec, &identity(1), grid[a], grid[b], grid[c], &t).map_err(err)?;
                    worst = worst.max(rep.residual);
                    triples += 1;
                }
            }
        }
    }
    Ok((worst < 1e-10, format!("{triples} ordered triples over 50 seeds, max residual = {worst:.2e}")))
}

fn c3_sufficiency() -> Check {
    let t = tol();
    let mut worst_commuting: f64 = 0.0;
    for d in [2usize, 3] {
        let cfg = SweepConfig {
            seeds: (0..25).collect(),
            d_s: d,
            d_e: d,
            coupling: 1.0,
            t0: 0.0,
            t1: 2.0,
            commuting_flags: vec![true],
        };
        for row in divisibility_sweep(&cfg, Execution::Parallel, &t).map_err(err)? {
            worst_commuting = worst_commuting.max(row.report.residual);
        }
    }
    let cfg = SweepConfig {
        seeds: (100..200).collect(),
        d_s: 2,
        d_e: 2,
        coupling: 1.0,
        t0: 0.0,
        t1: 2.0,
        commuting_flags: vec![false],
    };
    let rows = divisibility_sweep(&cfg, Execution::Parallel, &t).map_err(err)?;
    let violated = rows.iter().filter(|r| r.report.residual > 1e-3).count();
    let frac = violated as f64 / rows.len() as f64;
    Ok((
        worst_commuting < 1e-9 && frac >= 0.9,
        format!("commuting max residual = {worst_commuting:.2e} (50 seeds); generic > 1e-3 in {violated}/{}", rows.len()),
    ))
}

fn c4_equal_weight() -> Check {
    let t = tol();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d_s in [2usize, 3] {
        for d_e in [2usize, 3] {
            for seed in 0..5u64 {
                let spec = random_model(seed, d_s, d_e, 1.0, false, &t).map_err(err)?;
                let id = equal_weight_identity(&spec, 0.0, 0.7, 1.6, &t).map_err(err)?;
                worst = worst.max(id.residual);
                cases += 1;
            }
        }
    }
    Ok((worst < 1e-9, format!("{cases} models, max |LHS - RHS| = {worst:.2e}")))
}

fn c5_projection() -> Check {
    let t = tol();
    let (d_s, d_e) = (2, 3);
    let pair = ProjectorPair::first(1, d_e).map_err(err)?;
    let mut worst_cross: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for seed in 0..10u64 {
        let spec = eigenbasis_model(seed, d_s, d_e, true)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut e0, mut e2) = (ComplexMatrix::zeros(d_e, d_e), ComplexMatrix::zeros(d_e, d_e));
        e0[(0, 0)] = ONE;
        e2[(2, 2)] = ONE;
        let rho0 = kron(&random_density(&mut rng, d_s), &e0, &t).map_err(err)? * c64(0.6, 0.0)
            + kron(&random_density(&mut rng, d_s), &e2, &t).map_err(err)? * c64(0.4, 0.0);
        for s in projection_trajectory(&spec, &pair, &rho0, 2.0, 16, &t).map_err(err)? {
            worst_cross = worst_cross.max(s.pq_norm).max(s.qp_norm);
        }
        let prop = Propagator::for_spec(&spec, &t).map_err(err)?;
        for time in [0.3, 1.1, 2.5] {
            let exact = apply_projector(&pair, Which::P, &prop.evolve_density(&rho0, time)).map_err(err)?;
            let standalone = p_block_evolution(&spec, &pair, &rho0, time, &t).map_err(err)?;
            worst_p = worst_p.max(max_abs(&(exact - standalone)));
        }
    }
    let mut ratios = Vec::new();
    for seed in 7..12u64 {
        let spec = eigenbasis_model(seed, 2, 2, false)?;
        let pair = ProjectorPair::first(1, 2).map_err(err)?;
        let rho0 = initial_density(&InitialState::basis_product(0, 0, 2, 2), 2, 2, &t).map_err(err)?;
        let coarse = memory_reconstruction_error(&spec, &pair, &rho0, 2.0, 64, &t).map_err(err)?;
        let fine = memory_reconstruction_error(&spec, &pair, &rho0, 2.0, 128, &t).map_err(err)?;
        ratios.push(coarse / fine);
    }
    let ratios_ok = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok((
        worst_cross < 1e-11 && worst_p < 1e-10 && ratios_ok,
        format!(
            "cross terms {worst_cross:.2e}, P-block {worst_p:.2e}, step-doubling ratios [{}]",
            shown.join(", ")
        ),
    ))
}

fn c6_master_identity() -> Check {
    let t = tol();
    let (d_s, d_e) = (2, 3);
    let mut worst: f64 = 0.0;
    let mut worst_omega: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, d_s * d_e);
        let blocks = BlockDensity::from_full(&rho, d_s, d_e).map_err(err)?;

        let spec = eigenbasis_model(seed, d_s, d_e, false)?;
        let h = build_total_hamiltonian(&spec, &t).map_err(err)?;
        let full = (h.as_matrix() * &rho - &rho * h.as_matrix()) * c64(0.0, -1.0);
        let full_blocks = BlockDensity::from_full(&full, d_s, d_e).map_err(err)?;

        let commuting = eigenbasis_model(seed, d_s, d_e, true)?;
        for g in 0..d_e {
            let rhs = master_rhs_gamma(&spec, &blocks, g, &t).map_err(err)?;
            worst = worst.max(max_abs(&(rhs - full_blocks.block(g, g))));
            let (out, inn) = omega_terms(&commuting, &blocks, g, &t).map_err(err)?;
            worst_omega = worst_omega.max(max_abs(&out)).max(max_abs(&inn));
        }
    }
    Ok((
        worst < 1e-11 && worst_omega < 1e-12,
        format!("20 seeds, max |rhs - exact block| = {worst:.2e}, commuting |Ω| = {worst_omega:.2e}"),
    ))
}

fn c7_spin_boson() -> Check {
    let t = tol();
    let times = linspace(0.0, 12.0, 25);
    let mut worst_closed: f64 = 0.0;
    for j in [0.5, 1.5] {
        let params = SpinBosonParams { omega: 1.0, beta: 1.0, eta: 0.2, multiplets: vec![j], n_max: 30 };
        let sim = SpinBosonNumeric::new(&params, &SpinBosonInitial::EqualSuperposition, &t).map_err(err)?;
        let labels = params.labels();
        for &time in &times {
            let rho = sim.reduced_state(time).map_err(err)?;
            for (a, &(_, m1)) in labels.iter().enumerate() {
                for (b, &(_, m2)) in labels.iter().enumerate() {
                    let expected = phase(-params.omega * (m1 - m2) * time) / (2.0 * j + 1.0);
                    worst_closed = worst_closed.max((rho[(a, b)] - expected).norm());
                }
            }
        }
    }

    let params = SpinBosonParams { omega: 1.0, beta: 1.0, eta: 0.2, multiplets: vec![0.5, 1.5], n_max: 30 };
    let sim = SpinBosonNumeric::new(&params, &SpinBosonInitial::EqualSuperposition, &t).map_err(err)?;
    let rho_init = sim.initial_state().clone();
    let labels = params.labels();
    let mut worst_same: f64 = 0.0;
    let mut worst_factor: f64 = 0.0;
    for &time in &times {
        let rho = sim.reduced_state(time).map_err(err)?;
        for (a, &(j1, m1)) in labels.iter().enumerate() {
            for (b, &(j2, m2)) in labels.iter().enumerate() {
                if j1 == j2 {
                    let expected = rho_init[(a, b)] * phase(-params.omega * (m1 - m2) * time);
                    worst_same = worst_same.max((rho[(a, b)] - expected).norm());
                } else {
                    let numeric = sim.numeric_boson_factor(j1, m1, j2, m2, time).map_err(err)?;
                    let analytic = analytic_boson_factor(&params, j1, j2, time, &t).map_err(err)?;
                    worst_factor = worst_factor.max((numeric - analytic).norm());
                }
            }
        }
    }

    let (a, b) = (params.index(0.5, 0.5).map_err(err)?, params.index(1.5, 1.5).map_err(err)?);
    let window = linspace(40.0 / params.beta, 50.0 / params.beta, 81);
    let mut late_max: f64 = 0.0;
    let mut sign_changes = 0;
    let mut last_re: Option<f64> = None;
    for &time in &window {
        let z = sim.reduced_state(time).map_err(err)?[(a, b)];
        late_max = late_max.max(z.norm());
        if let Some(prev) = last_re {
            if prev.signum() != z.re.signum() {
                sign_changes += 1;
            }
        }
        last_re = Some(z.re);
    }
    Ok((
        worst_closed < 1e-9 && worst_same < 1e-9 && worst_factor < 1e-6 && late_max > 1e-3 && sign_changes > 0,
        format!(
            "single-multiplet |ρ - e^(-iω(m1-m2)t)/(2j+1)| = {worst_closed:.2e}, same-multiplet {worst_same:.2e}, \
             boson factor {worst_factor:.2e}, late cross |ρ| max {late_max:.3} with {sign_changes} sign changes"
        ),
    ))
}

/// `exp(N)` for nilpotent `N` of index at most 3.
fn exp_nilpotent(n: &ComplexMatrix) -> ComplexMatrix {
    identity(n.nrows()) + n + n * n * c64(0.5, 0.0)
}

fn c8_zassenhaus() -> Check {
    let t = tol();
    let mut worst_commuting: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, 3);
        let f = h.spectral().map_err(err)?.apply_function(|x| c64(x.cos(), 0.0));
        let x = h.as_matrix() * c64(0.0, -0.7);
        let y = &f * c64(0.0, -1.3);
        let exact = expm_anti_hermitian(&(&x + &y), &t).map_err(err)?;
        worst_commuting = worst_commuting.max(max_abs(&(zassenhaus_product(&x, &y, 4, &t).map_err(err)? - exact)));
    }

    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x0 = random_hermitian(&mut rng, 2).into_inner() * c64(0.0, -1.0);
        let y0 = random_hermitian(&mut rng, 2).into_inner() * c64(0.0, -1.0);
        let defect = |s: f64| -> Result<f64, String> {
            let (x, y) = (&x0 * c64(s, 0.0), &y0 * c64(s, 0.0));
            let exact = expm_anti_hermitian(&(&x + &y), &t).map_err(err)?;
            Ok(max_abs(&(exact - zassenhaus_product(&x, &y, 2, &t).map_err(err)?)))
        };
        ratios.push(defect(0.1)? / defect(0.05)?);
    }

    let mut x = ComplexMatrix::zeros(3, 3);
    let mut y = ComplexMatrix::zeros(3, 3);
    x[(0, 1)] = c64(0.8, 0.3);
    y[(1, 2)] = c64(-1.1, 0.5);
    let terms = zassenhaus_terms(&x, &y, 4).map_err(err)?;
    let lhs = exp_nilpotent(&(&x + &y));
    let rhs = exp_nilpotent(&x) * exp_nilpotent(&y) * exp_nilpotent(&(&terms[0] * c64(-0.5, 0.0)));
    let central = max_abs(&(lhs - rhs)).max(max_abs(&terms[1])).max(max_abs(&terms[2]));

    let ok = worst_commuting < 1e-12 && ratios.iter().all(|r| (6.0..=10.0).contains(r)) && central < 1e-11;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok((
        ok,
        format!("commuting {worst_commuting:.2e}, c2 halving ratios [{}], central case {central:.2e}", shown.join(", ")),
    ))
}

fn c9_lattice_semigroup() -> Check {
    let t = tol();
    let pi = std::f64::consts::PI;
    let params =
        SpinBosonParams { omega: 2.0 * pi, beta: 2.0 * pi, eta: 8.0 * pi / 3.0, multiplets: vec![0.5], n_max: 40 };
    let rep = periodicity_semigroup_check(&params, &SpinBosonInitial::default(), 1e-8, &t).map_err(err)?;
    let bad = SpinBosonParams { omega: 2f64.sqrt(), beta: 1.0, eta: 0.3, multiplets: vec![0.5], n_max: 10 };
    let rejected = matches!(
        periodicity_semigroup_check(&bad, &SpinBosonInitial::default(), 1e-8, &t),
        Err(Error::Incommensurable { .. })
    );
    Ok((
        rep.passed && rejected,
        format!(
            "period {:.3}, return {:.2e}, composition {:.2e}, incommensurable rejected: {rejected}",
            rep.period, rep.return_residual, rep.composition_residual
        ),
    ))
}

fn c10_sie() -> Check {
    let t = tol();
    let mut worst_trivial: f64 = 0.0;
    for seed in 0..10u64 {
        let spec = random_model(seed, 3, 1, 1.0, false, &t).map_err(err)?;
        let rep = sie_rate_check(&spec, &random_product_state(seed, 3, 1), 2.0, &t).map_err(err)?;
        worst_trivial = worst_trivial.max(rep.gamma0.abs());
    }

    let mut satisfied = 0;
    for seed in 0..100u64 {
        let spec = random_model(seed, 2, 2, 1.0, false, &t).map_err(err)?;
        let rep = sie_rate_check(&spec, &random_product_state(seed, 2, 2), 2.0, &t).map_err(err)?;
        if rep.gamma0 <= rep.bound + 1e-6 {
            satisfied += 1;
        }
    }

    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let spec = random_model(seed, 2, 2, 1.0, false, &t).map_err(err)?;
        let state = random_product_state(seed, 2, 2);
        let at = |lambda: f64| factorization_defect(&spec.with_coupling_scaled(lambda), &state, 0.0, 1.0, &t);
        ratios.push(at(0.02).map_err(err)? / at(0.01).map_err(err)?);
    }
    let quadratic = ratios.iter().all(|r| (4.0 * 0.7..=4.0 * 1.3).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    Ok((
        worst_trivial < 1e-8 && satisfied == 100 && quadratic,
        format!(
            "δ = 1 |Γ0| max {worst_trivial:.2e}; bound holds {satisfied}/100; \
             defect ratio under coupling doubling [{}] (quadratic needs 4 ± 30%)",
            shown.join(", ")
        ),
    ))
}

fn c11_causal_break() -> Check {
    let t = tol();
    let mut worst_memoryless: f64 = 0.0;
    let mut all_markovian = true;
    for seed in 0..5u64 {
        let controls = memoryless_family(seed, 3, 6, 2, &t).map_err(err)?;
        let res = causal_break_markov_test(&controls, 2, None, &ket0(), 1e-10, &t).map_err(err)?;
        worst_memoryless = worst_memoryless.max(res.max_diff);
        all_markovian &= res.markovian;
    }

    let mut refuted = 0;
    for seed in 0..20u64 {
        let (controls, env) = dilated_family(seed, 3, 5, 2, 1.0, 0.7, &t).map_err(err)?;
        let res = causal_break_markov_test(&controls, 2, Some(&env), &ket0(), 1e-10, &t).map_err(err)?;
        if res.max_diff > 1e-3 {
            refuted += 1;
        }
    }

    let first = ChainSpec::first_order(vec![vec![0.8, 0.2], vec![0.3, 0.7]], 11).map_err(err)?;
    let second = ChainSpec::second_order(
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9], vec![0.1, 0.9]],
        12,
    )
    .map_err(err)?;
    let r1 = test_markov_order1(&simulate_chain(&first, 100_000).map_err(err)?, 0.05).map_err(err)?;
    let r2 = test_markov_order1(&simulate_chain(&second, 100_000).map_err(err)?, 0.05).map_err(err)?;

    Ok((
        all_markovian && worst_memoryless <= 1e-10 && refuted >= 18 && r1.is_markov && !r2.is_markov,
        format!(
            "memoryless max diff {worst_memoryless:.2e}; dilated refuted {refuted}/20; \
             order-1 chain markov={} (tv {:.4}), order-2 chain markov={} (tv {:.4})",
            r1.is_markov, r1.max_tv, r2.is_markov, r2.max_tv
        ),
    ))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(config: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_oqs"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("OQS_MAX_DIM")
        .output()
        .map_err(err)?;
    if !o.status.success() {
        return Err(format!("{}: {}", config.display(), String::from_utf8_lossy(&o.stderr).trim()));
    }
    std::fs::read(out.with_extension("csv")).map_err(err)
}

fn c12_cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .map_err(err)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && n != "spinboson_incommensurable.json")
        .collect();
    names.sort();
    let mut commands = std::collections::BTreeSet::new();
    let mut differing = Vec::new();
    for name in &names {
        let cfg = configs_dir().join(name);
        let text = std::fs::read_to_string(&cfg).map_err(err)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
        commands.insert(value["command"].as_str().unwrap_or_default().to_owned());
        let stem = name.trim_end_matches(".json");
        let a = run_cli(&cfg, &dir.path().join(format!("{stem}_a")))?;
        let b = run_cli(&cfg, &dir.path().join(format!("{stem}_b")))?;
        if a != b {
            differing.push(stem.to_owned());
        }
    }
    Ok((
        differing.is_empty() && commands.len() == 6,
        format!(
            "{} configs over {} subcommands run twice; differing CSVs: {}",
            names.len(),
            commands.len(),
            if differing.is_empty() { "none".to_owned() } else { differing.join(", ") }
        ),
    ))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    check: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "dynamical map matches direct partial trace", budget: Duration::from_secs(30), check: c1_map_oracle },
        Criterion { id: 2, name: "trivial environment is CP-divisible", budget: Duration::from_secs(10), check: c2_trivial_environment },
        Criterion { id: 3, name: "commuting sufficiency and generic violation", budget: Duration::from_secs(60), check: c3_sufficiency },
        Criterion { id: 4, name: "equal-weight two-sided identity", budget: Duration::from_secs(10), check: c4_equal_weight },
        Criterion { id: 5, name: "projection decoupling and memory reconstruction", budget: Duration::from_secs(30), check: c5_projection },
        Criterion { id: 6, name: "block master equation identity", budget: Duration::from_secs(10), check: c6_master_identity },
        Criterion { id: 7, name: "spin-boson dephasing structure", budget: Duration::from_secs(120), check: c7_spin_boson },
        Criterion { id: 8, name: "Zassenhaus factorization", budget: Duration::from_secs(5), check: c8_zassenhaus },
        Criterion { id: 9, name: "lattice semigroup at the common period", budget: Duration::from_secs(20), check: c9_lattice_semigroup },
        Criterion { id: 10, name: "entangling rate bound and defect scaling", budget: Duration::from_secs(30), check: c10_sie },
        Criterion { id: 11, name: "causal-break and classical Markov tests", budget: Duration::from_secs(60), check: c11_causal_break },
        Criterion { id: 12, name: "CLI output is byte-for-byte reproducible", budget: Duration::from_secs(60), check: c12_cli_determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (passed, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let budget_note = if in_budget { String::new() } else { format!(", over the {}s budget", c.budget.as_secs()) };
        println!(
            "{} {:>2} {}: {} [{:.2}s{}]",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            budget_note
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
