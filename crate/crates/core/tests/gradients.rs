//! Analytic gradients against central finite differences in f64.

mod common;

use common::{model_check, LAYER_TOL, MODEL_TOL, STEP};
use effseg::net::CoordMode;

#[test]
fn conv2d_input_kernel_and_bias() {
    for (what, e) in common::conv_errors() {
        assert!(e <= LAYER_TOL, "{what}: {e:e}");
    }
}

#[test]
fn instance_norm_input() {
    let e = common::instance_norm_error();
    assert!(e <= LAYER_TOL, "{e:e}");
}

#[test]
fn leaky_relu_input() {
    let e = common::leaky_relu_error();
    assert!(e <= LAYER_TOL, "{e:e}");
}

#[test]
fn upsample_input() {
    let e = common::upsample_error();
    assert!(e <= LAYER_TOL, "{e:e}");
}

#[test]
fn concat_and_split_are_adjoint() {
    assert!(common::concat_error() <= LAYER_TOL);
}

#[test]
fn dice_ce_loss_logits() {
    for e in common::loss_errors() {
        assert!(e <= LAYER_TOL, "{e:e}");
    }
}

#[test]
fn tiny_model_end_to_end() {
    for (mode, seed) in [(CoordMode::None, 21), (CoordMode::Cartesian, 22)] {
        let c = model_check(mode, seed, STEP, true);
        assert!(
            c.skipped <= c.checked,
            "{mode:?}: {} of {} stencils cross a kink",
            c.skipped,
            c.checked + c.skipped
        );
        assert!(c.error <= MODEL_TOL, "{mode:?}: {:e} over {} parameters", c.error, c.checked);
    }
}

#[test]
fn tiny_model_with_a_small_step_needs_no_skipping() {
    let c = model_check(CoordMode::None, 23, 1e-6, false);
    assert_eq!(c.skipped, 0);
    assert!(c.error <= MODEL_TOL, "{:e}", c.error);
}
