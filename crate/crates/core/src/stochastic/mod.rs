//! Process-level Markovianity: classical chains, device sequences with an
//! optional persistent environment, and the causal-break test.

pub mod chain;
pub mod families;
pub mod process;

pub use chain::{simulate_chain, test_markov_order1, ChainSpec, MarkovTestResult, DEFAULT_ALPHA};
pub use families::{dilated_family, embedded_chain, embedded_chain_trajectory, memoryless_family};
pub use process::{
    causal_break_markov_test, causal_break_table, induced_map, run_cycle, run_process, CausalBreak, CausalBreakResult,
    CausalBreakRow, Device, Environment, ProcessFile, ProcessRecord, ProcessRun,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, max_abs, ComplexMatrix, ONE};
    use crate::tolerance::ToleranceConfig;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn ket0() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = ONE;
        m
    }

    #[test]
    fn memoryless_family_passes() {
        let controls = memoryless_family(4, 3, 6, 2, &tol()).unwrap();
        let res = causal_break_markov_test(&controls, 2, None, &ket0(), 1e-10, &tol()).unwrap();
        assert!(res.markovian && res.max_diff < 1e-12, "{}", res.max_diff);
        assert_eq!(res.rows.len(), 2 * 2 * 2);
    }

    #[test]
    fn persistent_environment_is_detected() {
        let (controls, env) = dilated_family(7, 3, 5, 2, 1.0, 0.7, &tol()).unwrap();
        let res = causal_break_markov_test(&controls, 2, Some(&env), &ket0(), 1e-6, &tol()).unwrap();
        assert!(!res.markovian && res.max_diff > 1e-3, "{}", res.max_diff);
    }

    #[test]
    fn identical_controls_agree_exactly() {
        let (controls, env) = dilated_family(7, 2, 5, 2, 1.0, 0.7, &tol()).unwrap();
        let same = vec![controls[0].clone(), controls[0].clone()];
        let res = causal_break_markov_test(&same, 2, Some(&env), &ket0(), 0.0, &tol()).unwrap();
        assert_eq!(res.max_diff, 0.0);
    }

    #[test]
    fn contract_violations() {
        let controls = memoryless_family(4, 3, 6, 2, &tol()).unwrap();
        let err = causal_break_markov_test(&controls[..1], 2, None, &ket0(), 1e-10, &tol());
        assert!(matches!(err, Err(crate::Error::Contract(_))));
        let err = causal_break_markov_test(&controls, 1, None, &ket0(), 1e-10, &tol());
        assert!(matches!(err, Err(crate::Error::Contract(_))));
        let mut other = memoryless_family(5, 2, 6, 2, &tol()).unwrap();
        other[0] = controls[0].clone();
        let err = causal_break_markov_test(&other, 2, None, &ket0(), 1e-10, &tol());
        assert!(matches!(err, Err(crate::Error::Contract(_))));
    }

    #[test]
    fn incomplete_kraus_is_rejected() {
        let half = crate::linalg::identity(2) * c64(0.5, 0.0);
        let err = ProcessRecord::new(2, vec![Device::Channel(vec![half])], 0, &tol());
        assert!(matches!(err, Err(crate::Error::Completeness(_))));
    }

    #[test]
    fn induced_maps_compose() {
        let controls = memoryless_family(11, 2, 6, 2, &tol()).unwrap();
        let rec = &controls[0];
        let whole = induced_map(rec, 3, 6).unwrap();
        let split = induced_map(rec, 3, 4).unwrap().then(&induced_map(rec, 4, 6).unwrap()).unwrap();
        assert!(max_abs(&(whole.matrix - split.matrix)) < 1e-12);
        // the break erases the input: rows of the map through it coincide
        let through = induced_map(rec, 0, 3).unwrap();
        assert!(through.trace_preservation_defect() < 1e-12);
        let run = run_process(rec, None, &ket0(), &tol()).unwrap();
        let pushed = crate::dynamics::apply_map(&induced_map(rec, 3, 6).unwrap(), run.probe(3).unwrap()).unwrap();
        assert!(max_abs(&(pushed - run.probe(6).unwrap())) < 1e-12);
    }

    #[test]
    fn process_files_roundtrip() {
        let controls = memoryless_family(2, 2, 4, 1, &tol()).unwrap();
        let file = ProcessFile::from_record(&controls[1]);
        let text = serde_json::to_string(&file).unwrap();
        let back: ProcessFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_record(&tol()).unwrap(), controls[1]);
    }

    #[test]
    fn embedded_chains_keep_their_order() {
        let first = ChainSpec::first_order(vec![vec![0.8, 0.2], vec![0.4, 0.6]], 5).unwrap();
        let traj = embedded_chain_trajectory(&first, 20_000, &tol()).unwrap();
        assert_eq!(traj.len(), 20_000);
        assert!(test_markov_order1(&traj, DEFAULT_ALPHA).unwrap().is_markov);

        let second = vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9], vec![0.1, 0.9]];
        let echo = ChainSpec::second_order(vec![vec![0.5, 0.5]; 2], second, 5).unwrap();
        let traj = embedded_chain_trajectory(&echo, 20_000, &tol()).unwrap();
        assert!(!test_markov_order1(&traj, DEFAULT_ALPHA).unwrap().is_markov);
    }
}
