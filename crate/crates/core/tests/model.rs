use proptest::prelude::*;
use ptsoliton_core::{
    solve_amplitudes, stationary_residual, AmplitudeMode, Component, Error, GridSpec, ModelParams,
};

fn constraint_total(c: &Component) -> f64 {
    (18.0 + c.gain_loss * c.gain_loss - 9.0 * c.depth) / (9.0 * c.nonlinearity)
}

proptest! {
    #[test]
    fn amplitudes_satisfy_the_constraint(
        a in prop_oneof![-2.0..-0.1f64, 0.1..2.0f64],
        v in -2.0..10.0f64,
        w in -4.0..4.0f64,
        a1 in 0.0..3.0f64,
        equal in any::<bool>(),
    ) {
        let params = ModelParams::symmetric(a, v, w);
        let mode = if equal { AmplitudeMode::Equal } else { AmplitudeMode::FixedFirst(a1) };
        let total = constraint_total(params.first());
        match solve_amplitudes(&params, mode) {
            Ok(sol) => {
                let [p, q] = sol.amplitudes;
                prop_assert!(p >= 0.0 && q >= 0.0);
                prop_assert!((p * p + q * q - total).abs() <= 1e-12 * total.abs().max(1.0));
                if equal {
                    prop_assert_eq!(p, q);
                } else {
                    prop_assert_eq!(p, a1);
                }
            }
            Err(Error::NoRealAmplitude(_)) => {
                let need = if equal { 0.0 } else { a1 * a1 };
                prop_assert!(total < need);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn exact_profiles_are_stationary(
        a in prop_oneof![-1.5..-0.2f64, 0.2..1.5f64],
        w in -3.0..3.0f64,
        slack in 0.3..3.0f64,
    ) {
        // Choose V so the constraint total equals 0.25 + slack: A2 is real.
        let total = 0.25 + slack;
        let v = (18.0 + w * w - 9.0 * a * total) / 9.0;
        let sol = solve_amplitudes(&ModelParams::symmetric(a, v, w), AmplitudeMode::FixedFirst(0.5)).unwrap();
        let grid = GridSpec::new(30.0, 384).unwrap();
        let [f1, f2] = sol.sample(&grid);
        let [r1, r2] = stationary_residual([&f1, &f2], &sol.params, &grid).unwrap();
        prop_assert!(r1 < 1e-9 && r2 < 1e-9, "{} {}", r1, r2);
    }
}
