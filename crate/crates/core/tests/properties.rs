use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oqs_core::diagnostics::von_neumann_entropy;
use oqs_core::divisibility::{composition_residual, Verdict};
use oqs_core::dynamics::{apply_map, compute_supermatrix, reduced_density_direct};
use oqs_core::linalg::{c64, identity, max_abs, projector, ComplexMatrix};
use oqs_core::master::BlockDensity;
use oqs_core::model::{initial_density, random_model};
use oqs_core::projection::{apply_projector, ProjectorPair, Which};
use oqs_core::random::{random_density, random_hermitian, random_pure_state};
use oqs_core::spin_boson::zassenhaus_product;
use oqs_core::stochastic::{simulate_chain, ChainSpec};
use oqs_core::{InitialState, ToleranceConfig};

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn random_product_state(seed: u64, d_s: usize, d_e: usize) -> InitialState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let c = random_pure_state(&mut rng, d_s);
    let d = projector(&random_pure_state(&mut rng, d_e));
    InitialState::product(c, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn supermatrix_matches_partial_trace(seed in 0u64..10_000, d_s in 2usize..=4, d_e in 2usize..=4, t in 0.0f64..3.0, g in 0.0f64..2.0) {
        let spec = random_model(seed, d_s, d_e, g, false, &tol()).unwrap();
        let state = random_product_state(seed, d_s, d_e);
        let InitialState::Product { env_weights, .. } = &state else { unreachable!() };
        let c = compute_supermatrix(&spec, env_weights, 0.0, t, &tol()).unwrap();
        let via_map = apply_map(&c, &state.system_density()).unwrap();
        let direct = reduced_density_direct(&spec, &state, 0.0, t, &tol()).unwrap();
        prop_assert!(max_abs(&(via_map - direct)) < 1e-11);
    }

    #[test]
    fn supermatrix_structure(seed in 0u64..10_000, d_s in 2usize..=3, d_e in 1usize..=3, t0 in -1.0f64..1.0, dt in 0.0f64..2.0) {
        let spec = random_model(seed, d_s, d_e, 1.0, false, &tol()).unwrap();
        let w = spec.env_eigenstate_weights(0).unwrap();
        let c = compute_supermatrix(&spec, &w, t0, t0 + dt, &tol()).unwrap();
        prop_assert!(c.trace_preservation_defect() < 1e-11);
        prop_assert!(c.hermiticity_covariance_defect() < 1e-11);
        let id = compute_supermatrix(&spec, &w, t0, t0, &tol()).unwrap();
        prop_assert!(max_abs(&(id.matrix - identity(d_s * d_s))) < 1e-12);
    }

    #[test]
    fn trivial_environment_is_divisible(seed in 0u64..10_000, d_s in 2usize..=4, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let spec = random_model(seed, d_s, 1, 1.0, false, &tol()).unwrap();
        let mut ts = [a * 3.0, b * 3.0, c * 3.0];
        ts.sort_by(f64::total_cmp);
        let rep = composition_residual(&spec, &identity(1), ts[0], ts[1], ts[2], &tol()).unwrap();
        prop_assert!(rep.residual < 1e-10);
    }

    #[test]
    fn verdict_follows_residual(seed in 0u64..10_000, g in 0.0f64..2.0) {
        let t = tol();
        let spec = random_model(seed, 2, 2, g, false, &t).unwrap();
        let rep = composition_residual(&spec, &spec.env_eigenstate_weights(0).unwrap(), 0.0, 0.7, 1.5, &t).unwrap();
        prop_assert!(rep.residual >= 0.0);
        prop_assert_eq!(rep.verdict == Verdict::Divisible, rep.residual <= t.divisibility_threshold);
    }

    #[test]
    fn projectors_are_complementary(seed in 0u64..10_000, d_s in 1usize..=3, d_e in 1usize..=4, n in 0usize..=4) {
        let n = n.min(d_e);
        let pair = ProjectorPair::first(n, d_e).unwrap();
        prop_assert_eq!(pair.p_basis().len() + pair.q_basis().len(), d_e);
        let rho = random_density(&mut ChaCha8Rng::seed_from_u64(seed), d_s * d_e);
        let p = apply_projector(&pair, Which::P, &rho).unwrap();
        let q = apply_projector(&pair, Which::Q, &rho).unwrap();
        prop_assert_eq!(apply_projector(&pair, Which::P, &p).unwrap(), p.clone());
        prop_assert!(max_abs(&(p + q - &rho)) == 0.0);
    }

    #[test]
    fn entropy_is_bounded(seed in 0u64..10_000, d in 1usize..=6) {
        let rho = random_density(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let s = von_neumann_entropy(&rho).unwrap();
        prop_assert!(s >= -1e-12 && s <= (d as f64).ln() + 1e-12);
    }

    #[test]
    fn block_densities_are_consistent(seed in 0u64..10_000, d_s in 1usize..=3, d_e in 1usize..=3) {
        let spec = random_model(seed, d_s, d_e, 0.5, false, &tol()).unwrap();
        let state = random_product_state(seed, d_s, d_e);
        let rho = initial_density(&state, d_s, d_e, &tol()).unwrap();
        let rho_t = oqs_core::model::Propagator::for_spec(&spec, &tol()).unwrap().evolve_density(&rho, 0.8);
        let blocks = BlockDensity::from_full(&rho_t, d_s, d_e).unwrap();
        prop_assert!(blocks.adjoint_defect() < 1e-12);
        prop_assert!((blocks.total_probability() - 1.0).abs() < 1e-12);
        prop_assert_eq!(blocks.to_full(), rho_t);
    }

    #[test]
    fn commuting_exponents_factorize(seed in 0u64..10_000, d in 1usize..=4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let h = random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let f = h.spectral().unwrap().apply_function(|x| c64(x.sin(), 0.0));
        let x = h.as_matrix() * c64(0.0, -a);
        let y = &f * c64(0.0, -b);
        let exact = oqs_core::spin_boson::zassenhaus::expm_anti_hermitian(&(&x + &y), &tol()).unwrap();
        prop_assert!(max_abs(&(zassenhaus_product(&x, &y, 4, &tol()).unwrap() - exact)) < 1e-12);
    }

    #[test]
    fn chain_states_stay_in_range(seed in 0u64..10_000, p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let chain = ChainSpec::first_order(vec![vec![p, 1.0 - p], vec![q, 1.0 - q]], seed).unwrap();
        let traj = simulate_chain(&chain, 200).unwrap();
        prop_assert_eq!(traj.len(), 200);
        prop_assert!(traj.iter().all(|&s| s < 2));
        prop_assert_eq!(simulate_chain(&chain, 200).unwrap(), traj);
    }
}

#[test]
fn mixed_environment_weights_still_give_trace_preserving_maps() {
    let spec = random_model(3, 2, 3, 1.0, false, &tol()).unwrap();
    let w = ComplexMatrix::identity(3, 3) * c64(1.0 / 3.0, 0.0);
    let c = compute_supermatrix(&spec, &w, 0.0, 1.3, &tol()).unwrap();
    assert!(c.trace_preservation_defect() < 1e-11);
}
