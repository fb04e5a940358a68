use clms_core::gp::Dataset;
use clms_core::kernels::{eval_kernel, KernelSpec};
use clms_core::plant::simulation_dataset;
use clms_core::svr::{count_support_vectors, default_box_c, predict_svr, train_svr, DEFAULT_TOL};
use proptest::prelude::*;

#[test]
fn zero_targets_give_the_zero_function() {
    let data = Dataset::from_scalar(&[-1.0, 0.0, 2.0], &[0.0; 3]).unwrap();
    let m = train_svr(
        &data,
        &KernelSpec::gaussian(1.0, 1).unwrap(),
        0.1,
        1.0,
        DEFAULT_TOL,
    )
    .unwrap();
    assert_eq!(count_support_vectors(&m), 0);
    assert_eq!(m.bias(), 0.0);
    assert_eq!(predict_svr(&m, &[0.7]).unwrap(), 0.0);
}

#[test]
fn tube_wider_than_target_range_has_no_support_vectors() {
    let data = simulation_dataset();
    let range = data.targets().iter().fold(0.0f64, |a, b| a.max(b.abs())) * 2.0;
    let m = train_svr(&data, &KernelSpec::linear(1), range, 1.0, DEFAULT_TOL).unwrap();
    assert_eq!(count_support_vectors(&m), 0);
    assert_eq!(predict_svr(&m, &[4.0]).unwrap(), m.bias());
}

#[test]
fn narrow_tube_keeps_at_least_as_many_support_vectors() {
    let data = simulation_dataset();
    let g = KernelSpec::gaussian(2.333, 1).unwrap();
    let c = default_box_c(data.targets());
    let narrow = train_svr(&data, &g, 1e-3, c, DEFAULT_TOL).unwrap();
    let wide = train_svr(&data, &g, 1.0, c, DEFAULT_TOL).unwrap();
    assert!(count_support_vectors(&narrow) >= count_support_vectors(&wide));
}

#[test]
fn points_inside_the_tube_are_fitted_within_epsilon() {
    let data = simulation_dataset();
    let eps = 0.0336;
    let m = train_svr(
        &data,
        &KernelSpec::linear(1),
        eps,
        default_box_c(data.targets()),
        DEFAULT_TOL,
    )
    .unwrap();
    for i in 0..data.len() {
        if m.dual_of(i) == 0.0 {
            let r = predict_svr(&m, data.input(i)).unwrap() - data.targets()[i];
            assert!(r.abs() <= eps + DEFAULT_TOL, "point {i}: {r}");
        }
    }
}

#[test]
fn linear_baseline_is_a_shallow_line() {
    // A line fitted to f(x, 0) on [-10, 10] has slope near 1/3 from the x/3 term.
    let data = simulation_dataset();
    let m = train_svr(
        &data,
        &KernelSpec::linear(1),
        0.0336,
        default_box_c(data.targets()),
        DEFAULT_TOL,
    )
    .unwrap();
    let slope = predict_svr(&m, &[1.0]).unwrap() - predict_svr(&m, &[0.0]).unwrap();
    assert!(slope > 0.2 && slope < 0.5, "slope {slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prediction_equals_brute_force_sum(
        ys in proptest::collection::vec(-2.0f64..2.0, 6),
        eps in 0.0f64..0.3,
        scale in 0.5f64..3.0,
        xq in -4.0f64..4.0,
    ) {
        let xs = [-2.5, -1.4, -0.2, 0.9, 1.8, 3.0];
        let data = Dataset::from_scalar(&xs, &ys).unwrap();
        let spec = KernelSpec::gaussian(scale, 1).unwrap();
        let m = train_svr(&data, &spec, eps, 1.5, DEFAULT_TOL).unwrap();
        let mut brute = m.bias();
        for (i, x) in xs.iter().enumerate() {
            brute += m.dual_of(i) * eval_kernel(&spec, &[*x], &[xq]).unwrap();
        }
        prop_assert!((predict_svr(&m, &[xq]).unwrap() - brute).abs() <= 1e-12);
    }
}
