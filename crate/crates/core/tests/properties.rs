use levy_occupation::applications::{omega_decomposition, price_corridor_option, CorridorSpec, OmegaSpec};
use levy_occupation::kernels::{KernelContext, NumericSettings};
use levy_occupation::scale::{scale_w, scale_z};
use levy_occupation::LevyModel;
use proptest::prelude::*;

fn models() -> Vec<LevyModel> {
    vec![
        LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap(),
        LevyModel::brownian_drift(-0.5, 0.8).unwrap(),
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap(),
        LevyModel::jump_diffusion(0.8, 0.6, 1.2, 0.5).unwrap(),
    ]
}

fn upward() -> Vec<LevyModel> {
    vec![
        LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap(),
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap(),
        LevyModel::jump_diffusion(0.8, 0.6, 1.2, 0.5).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_functions_increase_in_x_and_q(
        m in 0usize..4,
        q in 0.0f64..3.0,
        dq in 0.0f64..1.0,
        x in 0.0f64..4.0,
        dx in 1e-3f64..1.0,
    ) {
        let model = &models()[m];
        let w = scale_w(model, q, x).unwrap();
        prop_assert!(w >= 0.0);
        prop_assert!(scale_w(model, q, x + dx).unwrap() >= w);
        prop_assert!(scale_w(model, q + dq, x).unwrap() >= w * (1.0 - 1e-12));
        let z = scale_z(model, q, x).unwrap();
        prop_assert!(z >= 1.0);
        prop_assert!(scale_z(model, q, x + dx).unwrap() >= z);
    }

    #[test]
    fn kernels_sit_between_their_scale_functions(
        m in 0usize..4,
        p in 0.0f64..1.0,
        q in 0.0f64..2.0,
        a in 0.0f64..1.5,
        x in 0.0f64..3.0,
    ) {
        let model = &models()[m];
        let ctx = KernelContext::new(model, p, q, a, 3.0, &NumericSettings::default()).unwrap();
        let wk = ctx.kernel_w(x).unwrap();
        let zk = ctx.kernel_z(x).unwrap();
        let wp = scale_w(model, p, x).unwrap();
        let wpq = scale_w(model, p + q, x).unwrap();
        let slack = 1e-8 * wpq.max(1.0);
        prop_assert!(wk >= wp - slack, "{wk} < W^(p) {wp}");
        prop_assert!(wk <= wpq + slack, "{wk} > W^(p+q) {wpq}");
        prop_assert!(zk >= scale_z(model, p, x).unwrap() - slack);
        prop_assert!(zk >= 1.0 - slack);
    }

    #[test]
    fn omega_outcomes_partition_unity(
        m in 0usize..3,
        b in 0.1f64..3.0,
        q in 0.01f64..5.0,
        x in -4.0f64..4.0,
    ) {
        let d = omega_decomposition(&upward()[m], &OmegaSpec { b, q, x }, &NumericSettings::default()).unwrap();
        for v in [d.survive, d.bankrupt_below, d.bankrupt_inside] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((d.survive + d.bankrupt_below + d.bankrupt_inside - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corridor_price_is_bounded(
        m in 0usize..4,
        c in 0.5f64..4.0,
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
        fx in 0.0f64..1.0,
        p in 0.01f64..2.0,
    ) {
        let (a, b) = if lo <= hi { (lo * c, hi * c) } else { (hi * c, lo * c) };
        let spec = CorridorSpec { a, b, c, p, x: fx * c };
        let v = price_corridor_option(&models()[m], &spec, &NumericSettings::default()).unwrap();
        prop_assert!(v.value >= -1e-12);
        prop_assert!(v.value <= 1.0 / p);
        // Never more than the discounted time to exit from the whole strip.
        let whole = price_corridor_option(&models()[m], &CorridorSpec { a: 0.0, b: c, ..spec }, &NumericSettings::default()).unwrap();
        prop_assert!(v.value <= whole.value + 1e-10);
    }
}
