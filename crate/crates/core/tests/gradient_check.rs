mod support;

use gmoea::common::RngStream;
use gmoea::nn::GenLoss;

#[test]
fn discriminator_backprop_matches_finite_differences() {
    let mut rng = RngStream::new(100, 0);
    for case in 0..100 {
        let err = support::discriminator_gradient_error(&mut rng, 1e-5);
        assert!(err < 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn generator_backprop_matches_finite_differences() {
    for mode in [GenLoss::Saturating, GenLoss::NonSaturating] {
        let mut rng = RngStream::new(200, 0);
        for case in 0..100 {
            let err = support::generator_gradient_error(&mut rng, mode, 1e-5);
            assert!(err < 1e-4, "{mode:?} case {case}: relative error {err}");
        }
    }
}

#[test]
fn one_discriminator_step_usually_lowers_its_batch_loss() {
    let mut rng = RngStream::new(300, 0);
    let lowered = (0..50).filter(|_| support::discriminator_step_lowers_loss(&mut rng)).count();
    assert!(lowered >= 45, "{lowered}/50");
}
