mod common;

use common::{gradient_check, seeded, smooth_instance};

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = seeded(5);
    for _ in 0..5 {
        let (model, batch) = smooth_instance(&mut rng, 4, 12, 8, 2, 1e-3);
        let check = gradient_check(&model, &batch, 1e-5);
        assert!(
            check.max_rel_error < 1e-4,
            "{} off by {:.3e}",
            check.worst_tensor,
            check.max_rel_error
        );
    }
}

#[test]
fn single_example_d4() {
    let mut rng = seeded(11);
    let (model, batch) = smooth_instance(&mut rng, 2, 5, 4, 1, 1e-3);
    let check = gradient_check(&model, &batch, 1e-5);
    assert_eq!(
        check.coords,
        2 * 4 + 5 * 4 + 12 * 4 + 7 * 4 + 24 * 4 + 2 * 4 * 12 + 2 * 4
    );
    assert!(check.max_rel_error < 1e-4, "{check:?}");
}
