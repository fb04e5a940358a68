use clms_core::plant::{
    control, evaluate_cost, rollout, step_plant, CostKind, CostSpec, ModelHandle, DEFAULT_GUARD,
    PENALTY_COST,
};
use proptest::prelude::*;

#[test]
fn perfect_model_halves_the_state() {
    let t = rollout(3.0, 10, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
    assert!(!t.diverged);
    for (k, x) in t.states.iter().enumerate() {
        assert!(
            (x - 3.0 * 0.5f64.powi(k as i32)).abs() <= 1e-12,
            "k = {k}: {x}"
        );
    }
    assert_eq!(t.outputs, t.states);
}

#[test]
fn perfect_model_cost_is_the_geometric_sum() {
    // 9·Σ_{k=1}^{9} k·4^{-k} = 1048545/262144
    let t = rollout(3.0, 10, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
    let c = evaluate_cost(&t, &CostSpec::default());
    assert!((c - 3.999_881_744_384_765_6).abs() < 1e-12, "{c}");
    assert!((c - 4.0).abs() <= 1e-3);
}

#[test]
fn zero_model_settles_at_a_nonzero_fixed_point() {
    // x⁺ = f(x, 0) + x/2 iterated from 3 by an independent scalar loop.
    let expected = [
        3.0,
        2.628_973_976_231_639_8,
        2.648_519_331_483_529_4,
        2.648_369_730_718_530_8,
        2.648_371_409_646_130_4,
        2.648_371_390_848_94,
    ];
    let t = rollout(3.0, 10, &ModelHandle::Zero, DEFAULT_GUARD).unwrap();
    for (a, b) in t.states.iter().zip(expected) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
    let c = evaluate_cost(&t, &CostSpec::default());
    assert!((c - 315.523_370_520_165).abs() < 1e-9, "{c}");
}

#[test]
fn perfect_control_composes_to_half_state() {
    let u = control(3.0, &ModelHandle::Perfect).unwrap();
    assert!((u - 0.371_026_7).abs() < 1e-6);
    assert!((step_plant(3.0, u) - 1.5).abs() < 1e-15);
    assert_eq!(control(0.0, &ModelHandle::Perfect).unwrap(), 0.0);
}

#[test]
fn zero_state_gives_zero_trace_and_cost() {
    let t = rollout(0.0, 10, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
    assert!(t.states.iter().chain(&t.inputs).all(|v| *v == 0.0));
    assert_eq!(evaluate_cost(&t, &CostSpec::default()), 0.0);
}

#[test]
fn divergent_trace_costs_the_penalty() {
    let t = rollout(3.0, 10, &ModelHandle::Zero, 2.0).unwrap();
    assert!(t.diverged);
    assert_eq!(evaluate_cost(&t, &CostSpec::default()), PENALTY_COST);
}

proptest! {
    #[test]
    fn rollouts_are_deterministic_and_costs_nonnegative(x0 in -20.0f64..20.0, horizon in 1usize..30) {
        for model in [ModelHandle::Perfect, ModelHandle::Zero] {
            let a = rollout(x0, horizon, &model, DEFAULT_GUARD).unwrap();
            let b = rollout(x0, horizon, &model, DEFAULT_GUARD).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.states.len(), a.inputs.len() + 1);
            for kind in [CostKind::TimeWeightedQuadraticState, CostKind::MeanSquaredError] {
                let spec = CostSpec { kind, horizon };
                prop_assert!(evaluate_cost(&a, &spec) >= 0.0);
            }
        }
    }

    #[test]
    fn perfect_closed_loop_contracts_by_half(x0 in -50.0f64..50.0) {
        let t = rollout(x0, 20, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
        for w in t.states.windows(2) {
            prop_assert!((w[1] - w[0] / 2.0).abs() <= 1e-12 * (1.0 + w[0].abs()));
        }
    }
}
