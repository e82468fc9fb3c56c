mod common;

use common::*;
use proptest::prelude::*;
use qrd_core::hermitian::{min_eigenvalue, CMatrix, HermitianMatrix};
use qrd_core::problem::{
    delta_b, entanglement_fidelity_distortion, is_rate_zero, quantum_relative_entropy,
    uniform_input, DensityMatrix, ProblemInstance,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fidelity_distortion_is_idempotent_projector(seed in any::<u64>(), n in 1usize..=4) {
        let rho = random_density(n, &mut rng(seed));
        let delta = entanglement_fidelity_distortion(&rho).unwrap();
        let d = delta.as_matrix();
        let n4 = (n * n * n * n) as f64;
        prop_assert!(one_norm(&(d * d - d)) <= 1e-10 * n4);
        prop_assert!(min_eigenvalue(&delta).unwrap() >= -1e-10);
        // Its kernel holds the purification, whose first marginal is ρ.
        prop_assert!((delta.trace() - (n * n - 1) as f64).abs() <= 1e-10);
    }

    #[test]
    fn delta_b_closed_form_matches_loops(seed in any::<u64>(), n in 1usize..=4) {
        let rho = random_density(n, &mut rng(seed));
        let inst = ProblemInstance::entanglement_fidelity(rho.clone(), 0.1).unwrap();
        let delta = entanglement_fidelity_distortion(&rho).unwrap();
        let lifted = naive_kron(rho.as_matrix(), &CMatrix::identity(n, n));
        let dense = naive_tr1(&(delta.as_matrix() * lifted), n, n);
        prop_assert!(max_abs(&(delta_b(&inst).unwrap().as_matrix() - dense)) <= 1e-12);
    }

    #[test]
    fn klein_inequality(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random_density(n, &mut r);
        let sigma = random_density(n, &mut r);
        let s = quantum_relative_entropy(rho.as_hermitian(), sigma.as_hermitian()).unwrap();
        prop_assert!(s >= -1e-12);
        let gap = one_norm(&(rho.as_matrix() - sigma.as_matrix()));
        if gap > 1e-8 {
            prop_assert!(s > 0.0);
        }
        let zero = quantum_relative_entropy(rho.as_hermitian(), rho.as_hermitian()).unwrap();
        prop_assert!(zero.abs() <= 1e-10);
    }

    #[test]
    fn commuting_relative_entropy_is_kl(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let p = random_probability(n, &mut r);
        let q = random_probability(n, &mut r);
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let s = quantum_relative_entropy(
            &HermitianMatrix::from_real_diagonal(&p),
            &HermitianMatrix::from_real_diagonal(&q),
        )
        .unwrap();
        prop_assert!((s - kl).abs() <= 1e-12);
    }

    #[test]
    fn uniform_zero_rate_indicator(n in 1usize..=12, frac in 0.0f64..1.0) {
        let threshold = 1.0 - 1.0 / (n * n) as f64;
        let above = threshold + frac * 0.5;
        let inst = ProblemInstance::entanglement_fidelity(uniform_input(n), above).unwrap();
        prop_assert!(is_rate_zero(&inst).unwrap());
        if n > 1 {
            let below = threshold * frac * 0.999;
            let inst = inst.with_threshold(below).unwrap();
            prop_assert!(!is_rate_zero(&inst).unwrap());
        }
    }
}

#[test]
fn density_validation() {
    let bad = HermitianMatrix::from_real_diagonal(&[0.6, 0.6]);
    assert!(DensityMatrix::new(bad).is_err());
    let neg = HermitianMatrix::from_real_diagonal(&[1.2, -0.2]);
    assert!(DensityMatrix::new(neg).is_err());
}
