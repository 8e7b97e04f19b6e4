mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jw_hamiltonian_is_hermitian_and_conserves_n(m in model_strategy()) {
        jw_hermitian_number_conserving(&m)?;
    }

    #[test]
    fn canonical_form_is_isometric(n in 2usize..=7, chi in 1usize..=6, center in 0usize..7, seed: u64) {
        mps_isometries(n, chi, center, seed)?;
    }

    #[test]
    fn truncation_fidelity_grows_with_chi(n in 3usize..=6, chi in 2usize..=6, seed: u64) {
        truncation_monotone(n, chi, seed)?;
    }

    #[test]
    fn circuits_preserve_norm(c in circuit_strategy(), seed: u64) {
        circuit_preserves_norm(&c, seed)?;
    }

    #[test]
    fn trotter_step_error_is_third_order(m in small_model_strategy(), dt in 0.02f64..0.06, seed: u64) {
        trotter_third_order(&m, dt, seed)?;
    }

    #[test]
    fn ladder_sum_rule(n in 1usize..=8, alpha in 0usize..8, seed: u64) {
        anticommutation_sum_rule(n, alpha, seed)?;
    }

    #[test]
    fn dos_is_causal_and_normalized(m in small_model_strategy()) {
        dos_causal_and_normalized(&m)?;
    }

    #[test]
    fn overlap_matrix_is_toeplitz(m in small_model_strategy(), n_l in 1usize..=6, seed: u64) {
        overlap_is_toeplitz(&m, n_l, seed)?;
    }

    #[test]
    fn lanczos_coefficients_ignore_normalization(n in 3usize..=5, n_l in 1usize..=3, scale in 0.01f64..100.0, phase in 0.0f64..6.3, seed: u64) {
        lanczos_scale_invariant(n, n_l, scale, phase, seed)?;
    }
}
