//! Implementations checked against brute-force oracles on random inputs.

mod common;

#[test]
fn mcd_equals_quadratic_oracle() {
    common::check_mcd_oracle(40).unwrap();
}

#[test]
fn mcd_invariants_over_twenty_seeds() {
    for seed in 0..20 {
        common::check_mcd_invariants(seed).unwrap();
    }
}

#[test]
fn auc_equals_pair_counting() {
    common::check_auc(1000).unwrap();
}

#[test]
fn gradients_match_finite_differences() {
    let worst = common::worst_gradient_error(100);
    assert!(worst < 1e-5, "relative error {worst}");
}
