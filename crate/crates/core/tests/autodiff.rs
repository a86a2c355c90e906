//! Finite-difference checks for every differentiable tape operation and
//! both models.

mod common;

use common::gradcheck::{check, Worst, REL_TOL};
use common::op_checks;
use domnet::tensor::{ParamSet, Tensor};

fn assert_all(cases: Vec<(&str, Worst)>) {
    for (label, worst) in cases {
        assert!(worst.rel_error < REL_TOL, "{label}: {worst:?}");
    }
}

#[test]
fn matmul_and_linear() {
    assert_all(op_checks::matmul_and_linear());
}

#[test]
fn elementwise_ops() {
    assert_all(op_checks::elementwise_ops());
}

#[test]
fn conv_pool_reshape() {
    assert_all(op_checks::conv_pool_reshape());
}

#[test]
fn batchnorm_both_modes() {
    assert_all(op_checks::batchnorm_both_modes());
}

#[test]
fn pooling_concat_and_neighbor_sum() {
    assert_all(op_checks::pooling_concat_and_neighbor_sum());
}

#[test]
fn mse_gradient_matches_finite_differences() {
    assert_all(op_checks::mse_of_linear_map());
}

#[test]
fn cnn_output_gradients() {
    assert_all(op_checks::cnn_model());
}

#[test]
fn gin_output_gradients() {
    assert_all(op_checks::gin_model());
}

#[test]
fn harness_flags_a_wrong_gradient() {
    // The parameter enters through a constant copy, so backward reports zero
    // while the numerical derivative does not vanish.
    let mut ps = ParamSet::new();
    let x = ps.add("x", Tensor::from_f64([2], &[0.5, -1.5]).unwrap());
    let worst = check(&ps, 10, 0, |t, p| {
        let copy = t.constant(p.value(x).clone());
        let y = t.mul(copy, copy)?;
        Ok(t.sum_all(y))
    });
    assert!(worst.rel_error > 0.5, "{worst:?}");
}
