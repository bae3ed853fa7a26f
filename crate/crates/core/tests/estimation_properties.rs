use optoqfi::estimation::{self, Quadrature};
use optoqfi::model::{self, ModelVariant, PhysicalParams};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = PhysicalParams> {
    (
        8.0f64..9.58,
        prop_oneof![Just(0.0), 1e-4f64..0.2],
        any::<bool>(),
    )
        .prop_map(|(le, t, lin)| {
            let v = if lin {
                ModelVariant::Linear
            } else {
                ModelVariant::Quadratic
            };
            PhysicalParams::reference()
                .with_drive(10f64.powf(le))
                .with_temperature(t)
                .with_variant(v)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn report_invariants_hold(p in point()) {
        let r = estimation::estimate(&p, 1).unwrap();
        prop_assert!(r.lyapunov_residual <= 1e-10);
        let g = &r.qfim.global;
        prop_assert_eq!(g.total[(0, 1)], g.total[(1, 0)]);
        let scale = g.total.abs().max();
        prop_assert!((g.total - g.averages - g.variances).abs().max() <= 1e-12 * scale);
        for i in 0..2 {
            let ii = g.total[(i, i)];
            prop_assert!(ii >= 0.0);
            prop_assert!(r.qfim.light.total[(i, i)] <= ii * (1.0 + 1e-9));
            prop_assert!(r.qfim.mechanics.total[(i, i)] <= ii * (1.0 + 1e-9));
            for q in Quadrature::ALL {
                prop_assert!(r.fi.get(q)[(i, i)] <= ii * (1.0 + 1e-9), "{q}");
            }
            let w2 = p.omega_m * p.omega_m;
            let dl = r.qfim_dimensionless.total[(i, i)];
            prop_assert!((dl - w2 * ii).abs() <= 1e-12 * dl.abs().max(f64::MIN_POSITIVE));
        }
        prop_assert_eq!(r.qfim.global.total[(1, 1)] == 0.0, p.variant == ModelVariant::Linear);
    }

    #[test]
    fn more_runs_tighten_bounds_as_inverse_root(p in point(), runs in 2u32..500) {
        let one = estimation::estimate(&p, 1).unwrap();
        let many = estimation::estimate(&p, runs).unwrap();
        let r = one.bounds.global.relative[0] / many.bounds.global.relative[0];
        prop_assert!((r - f64::from(runs).sqrt()).abs() <= 1e-12 * r);
    }

    #[test]
    fn operating_point_does_not_depend_on_temperature(le in 8.0f64..9.58, t in 1e-4f64..0.2) {
        let cold = PhysicalParams::reference().with_drive(10f64.powf(le));
        let a = model::steady_state(&cold).unwrap();
        let b = model::steady_state(&cold.with_temperature(t)).unwrap();
        prop_assert_eq!(a.op_point.r0, b.op_point.r0);
        prop_assert!(b.op_point.n_bar > a.op_point.n_bar);
    }
}
