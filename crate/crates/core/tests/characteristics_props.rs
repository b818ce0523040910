mod common;

use minimax_core::characteristics::{evolve, exactness_residual, refine_seeds, write_strands_csv, Domain, ProblemSpec};
use minimax_core::expr::Expression;
use proptest::prelude::*;

fn trig_u0(a: f64, b: f64, phase: f64) -> String {
    format!("{a}*cos(q) + {b}*sin(2*q + {phase})")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn liouville_form_is_exact(a in -1.0f64..1.0, b in -0.5f64..0.5, phase in 0.0f64..3.0, c in -0.5f64..0.5, t in 0.1f64..2.0) {
        let h = format!("p^2/2 + {c}*cos(q)*p");
        let spec = common::periodic(&h, &trig_u0(a, b, phase), 2.0);
        let seeds = spec.base_seeds(48);
        let r = exactness_residual(&spec, t, &seeds, 1e-4, spec.default_step()).unwrap();
        prop_assert!(r <= 1e-6, "residual {r}");
    }

    #[test]
    fn time_zero_is_the_initial_jet(a in -1.0f64..1.0, b in -0.5f64..0.5, phase in 0.0f64..3.0) {
        let spec = common::periodic("p^2/2", &trig_u0(a, b, phase), 1.0);
        let seeds = spec.base_seeds(32);
        for s in evolve(&spec, 0.0, &seeds, 0.01).unwrap() {
            let st = s.last();
            let want = spec.initial_state(s.q0).unwrap();
            prop_assert_eq!(st.q, s.q0);
            prop_assert_eq!(st.p, want.p);
            prop_assert_eq!(st.z, want.z);
        }
    }
}

#[test]
fn step_halving_gains_fourth_order() {
    let spec = common::periodic("exp(-t)*p^2/2", "cos(q)", 2.0);
    let seeds = spec.base_seeds(32);
    let e = 1.0 - (-2.0f64).exp();
    let err = |step: f64| {
        evolve(&spec, 2.0, &seeds, step)
            .unwrap()
            .iter()
            .map(|s| {
                let st = s.last();
                let q = s.q0 - s.q0.sin() * e;
                let z = s.q0.cos() + 0.5 * s.q0.sin().powi(2) * e;
                (st.q - q).abs().max((st.z - z).abs())
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(0.4), err(0.2), err(0.1));
    assert!(e1 / e2 >= 8.0 && e2 / e3 >= 8.0, "{e1} {e2} {e3}");
}

#[test]
fn transport_moves_the_profile_rigidly() {
    let spec = common::transport();
    let seeds = spec.base_seeds(64);
    for s in evolve(&spec, 2.5, &seeds, 0.01).unwrap() {
        let st = s.last();
        assert!((st.q - (s.q0 + 0.7 * 2.5)).abs() < 1e-12);
        assert!((st.z - s.q0.cos()).abs() < 1e-12);
    }
}

#[test]
fn windowed_strands_freeze_outside() {
    let spec = ProblemSpec::new(
        Expression::parse("p^2/2").unwrap(),
        Expression::parse("q^2/2").unwrap(),
        Domain::Windowed { qmin: -1.0, qmax: 1.0 },
        1.0,
    )
    .unwrap();
    let seeds = spec.base_seeds(41);
    assert!(seeds[0] < -1.0 && *seeds.last().unwrap() > 1.0);
    for s in evolve(&spec, 1.0, &seeds, 0.01).unwrap() {
        if s.q0.abs() > 1.0 {
            assert_eq!(s.last().q, s.q0);
        } else {
            assert!((s.last().q - 2.0 * s.q0).abs() < 1e-12);
        }
    }
}

#[test]
fn refinement_keeps_seed_order_and_csv_is_tidy() {
    let spec = common::burgers();
    let seeds = spec.base_seeds(128);
    let strands = evolve(&spec, 2.0, &seeds, 1e-3).unwrap();
    let r = refine_seeds(&spec, 2.0, &strands, 0.05, 1e-3).unwrap();
    assert!(r.strands.len() > strands.len());
    assert!(r.strands.windows(2).all(|w| w[0].q0 < w[1].q0));
    let mut buf = Vec::new();
    write_strands_csv(&mut buf, &spec.domain, &r.strands).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("q0,t,q,p,z"));
    assert_eq!(text.lines().count(), r.strands.len() + 1);
}
