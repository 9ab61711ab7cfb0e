mod common;

#[test]
fn backward_matches_central_differences_on_relaxation() {
    for seed in 0..3 {
        let r = common::fd_gradient_check(&[12, 16, 8, 5], 10, 60, 1e-5, seed);
        assert_eq!(r.checked, 60);
        assert!(r.max_rel_err < 1e-4, "seed {seed}: {}", r.max_rel_err);
    }
}
