use approx::assert_relative_eq;
use clms_core::gp::{nll, nll_log_gradient, optimize_hyperparameters, Dataset, GpModel};
use clms_core::kernels::{
    default_domain, eval_kernel, HyperparameterDomain, KernelFamily, KernelSpec,
};
use clms_core::linalg::Matrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dense_gram(spec: &KernelSpec, data: &Dataset, noise: f64) -> DMatrix<f64> {
    let m = data.len();
    DMatrix::from_fn(m, m, |i, j| {
        eval_kernel(spec, data.input(i), data.input(j)).unwrap()
            + if i == j { noise * noise } else { 0.0 }
    })
}

/// `½(BᵀA⁻¹B + log|A| + m log 2π)` through LU solve and LU determinant.
fn dense_nll(spec: &KernelSpec, data: &Dataset, noise: f64) -> f64 {
    let a = dense_gram(spec, data, noise);
    let b = DVector::from_column_slice(data.targets());
    let lu = a.clone().lu();
    let x = lu.solve(&b).unwrap();
    let m = data.len() as f64;
    0.5 * (b.dot(&x) + lu.determinant().ln() + m * (2.0 * std::f64::consts::PI).ln())
}

/// Analytic `∂nll/∂log θ = −½ tr((ααᵀ − A⁻¹) ∂A/∂log θ)` for SE-ARD, with
/// `θ = (amplitude, lengthscales…, noise)`.
fn analytic_gradient(spec: &KernelSpec, data: &Dataset, noise: f64) -> Vec<f64> {
    let m = data.len();
    let a = dense_gram(spec, data, noise);
    let a_inv = a.clone().try_inverse().unwrap();
    let alpha = &a_inv * DVector::from_column_slice(data.targets());
    let w = &alpha * alpha.transpose() - &a_inv;
    let phi = spec.phi();
    let mut grads = Vec::new();
    let kern = DMatrix::from_fn(m, m, |i, j| {
        eval_kernel(spec, data.input(i), data.input(j)).unwrap()
    });
    // amplitude: dK/dlog φ₀ = 2K
    grads.push(-0.5 * (&w * (&kern * 2.0)).trace());
    for l in 0..phi.len() - 1 {
        let ell = phi[l + 1];
        let dk = DMatrix::from_fn(m, m, |i, j| {
            let d = data.input(i)[l] - data.input(j)[l];
            kern[(i, j)] * 2.0 * d * d / (ell * ell)
        });
        grads.push(-0.5 * (&w * dk).trace());
    }
    let dn = DMatrix::<f64>::identity(m, m) * (2.0 * noise * noise);
    grads.push(-0.5 * (&w * dn).trace());
    grads
}

fn random_problem() -> impl Strategy<Value = (Dataset, KernelSpec, f64)> {
    (2usize..=50, 1usize..=3).prop_flat_map(|(m, d)| {
        (
            proptest::collection::vec(-3.0f64..3.0, m * d),
            proptest::collection::vec(-2.0f64..2.0, m),
            0.2f64..3.0,
            proptest::collection::vec(0.3f64..3.0, d),
            0.05f64..1.0,
        )
            .prop_map(move |(x, y, amp, ls, noise)| {
                let data = Dataset::new(Matrix::from_row_major(m, d, x).unwrap(), y).unwrap();
                (data, KernelSpec::se_ard(amp, &ls).unwrap(), noise)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nll_matches_dense_solve((data, spec, noise) in random_problem()) {
        let ours = nll(&data, &spec, noise).unwrap();
        let oracle = dense_nll(&spec, &data, noise);
        prop_assert!((ours - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{ours} vs {oracle}");
    }

    #[test]
    fn predictions_match_dense_solve((data, spec, noise) in random_problem(), xq in -3.0f64..3.0) {
        let model = GpModel::fit(&data, &spec, noise).unwrap();
        let q = vec![xq; data.input_dim()];
        let a = dense_gram(&spec, &data, noise);
        let k: DVector<f64> = DVector::from_fn(data.len(), |i, _| eval_kernel(&spec, data.input(i), &q).unwrap());
        let sol = a.lu().solve(&k).unwrap();
        let mean = sol.dot(&DVector::from_column_slice(data.targets()));
        let var = eval_kernel(&spec, &q, &q).unwrap() - k.dot(&sol);
        let p = model.predict(&q).unwrap();
        prop_assert!((p.mean - mean).abs() <= 1e-8 * (1.0 + mean.abs()));
        prop_assert!((p.variance - var.max(0.0)).abs() <= 1e-8);
        prop_assert!(p.variance >= 0.0);
    }

    #[test]
    fn finite_difference_gradient_matches_analytic((data, spec, noise) in random_problem()) {
        let fd = nll_log_gradient(&data, &spec, noise, 1e-5).unwrap();
        let an = analytic_gradient(&spec, &data, noise);
        for (a, b) in fd.iter().zip(&an) {
            prop_assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{fd:?} vs {an:?}");
        }
    }

    #[test]
    fn variance_is_nonnegative_far_and_near((data, spec, _noise) in random_problem(), xq in -10.0f64..10.0) {
        let model = GpModel::fit(&data, &spec, 0.0).unwrap();
        let p = model.predict(&vec![xq; data.input_dim()]).unwrap();
        prop_assert!(p.variance >= 0.0);
    }
}

#[test]
fn noise_free_fit_interpolates() {
    let xs: Vec<f64> = (0..8).map(|i| -2.0 + 0.55 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (1.3 * x).sin() + 0.2 * x).collect();
    let data = Dataset::from_scalar(&xs, &ys).unwrap();
    let model = GpModel::fit(&data, &KernelSpec::gaussian(1.0, 1).unwrap(), 0.0).unwrap();
    for (x, y) in xs.iter().zip(&ys) {
        let p = model.predict(&[*x]).unwrap();
        assert!((p.mean - y).abs() < 1e-6, "{x}: {} vs {y}", p.mean);
    }
}

#[test]
fn single_point_weight_and_variance_closed_form() {
    // α = b/(k(a,a)+σ²) = 2/(1+0.25); var(a) = 1 − 1/1.25
    let data = Dataset::from_scalar(&[0.4], &[2.0]).unwrap();
    let model = GpModel::fit(&data, &KernelSpec::gaussian(1.0, 1).unwrap(), 0.5).unwrap();
    assert_relative_eq!(model.alpha()[0], 1.6, max_relative = 1e-15);
    assert_relative_eq!(
        model.predict(&[0.4]).unwrap().variance,
        0.2,
        max_relative = 1e-12
    );
}

#[test]
fn nll_minimizer_recovers_informative_lengthscale() {
    // Samples of a smooth function: short lengthscales must be rejected.
    let xs: Vec<f64> = (0..15).map(|i| -3.0 + 6.0 * i as f64 / 14.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (0.8 * x).sin()).collect();
    let data = Dataset::from_scalar(&xs, &ys).unwrap();
    let noise = HyperparameterDomain::log_interval(1e-4, 1.0).unwrap();
    let fit = optimize_hyperparameters(
        &data,
        KernelFamily::SquaredExponentialArd,
        &default_domain(KernelFamily::SquaredExponentialArd, 1),
        &noise,
        4,
        7,
    )
    .unwrap();
    assert!(fit.spec.phi()[1] > 1.0, "{:?}", fit.spec.phi());
    let at_start = nll(&data, &KernelSpec::se_ard(1.0, &[1.0]).unwrap(), 0.01).unwrap();
    assert!(fit.nll <= at_start);
}

#[test]
fn six_input_search_stays_in_box() {
    let m = 12;
    let x: Vec<f64> = (0..m * 6)
        .map(|i| ((i * 37 % 101) as f64 / 101.0) * 2.0 - 1.0)
        .collect();
    let y: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7).cos()).collect();
    let data = Dataset::new(Matrix::from_row_major(m, 6, x).unwrap(), y).unwrap();
    let domain = default_domain(KernelFamily::SquaredExponentialArd, 6);
    let noise = HyperparameterDomain::log_interval(1e-3, 1.0).unwrap();
    let fit = optimize_hyperparameters(
        &data,
        KernelFamily::SquaredExponentialArd,
        &domain,
        &noise,
        2,
        1,
    )
    .unwrap();
    assert!(fit.nll.is_finite());
    assert!(domain.contains(fit.spec.phi()));
    assert!(noise.contains(&[fit.noise_sigma]));
}
