mod common;

#[test]
fn refinement_terms_match_finite_differences() {
    for (term, worst, active) in common::optimize_gradient_errors(20, 11) {
        assert!(worst <= 1e-4, "{term:?}: relative error {worst}");
        assert!(active >= 10, "{term:?} was active in only {active} of 20 configurations");
    }
}

#[test]
fn training_loss_matches_finite_differences() {
    let (worst, checked) = common::training_gradient_error(20);
    assert!(checked > 100);
    assert!(worst <= 1e-4, "relative error {worst}");
}
